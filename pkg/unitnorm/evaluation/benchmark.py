"""
Module :module:`unitnorm.evaluation.benchmark` measures decoding speed
of the non-autoregressive model over an iteration grid against the
autoregressive baseline.
"""

import collections
import logging
import time

from unitnorm.models.autoregressive import ar_decode
from unitnorm.models.cmlm import DecodeConfig, decode

__all__ = ['BenchmarkRow', 'BENCHMARK_FIELDS', 'speed_benchmark']

logger = logging.getLogger(__name__)

BENCHMARK_FIELDS = ('system', 'iterations', 'utterances', 'units', 'passes',
                    'seconds', 'units_per_second', 'speedup')

BenchmarkRow = collections.namedtuple('BenchmarkRow', BENCHMARK_FIELDS)

AR_SYSTEM = 'ar'


def _batches(items, batch_size):
    return [items[i:i + batch_size] for i in range(0, len(items), batch_size)]


def _timed(decode_batch, sources, lengths, batch_size, clock):
    units = 0
    passes = 0
    started = clock()
    for batch, batch_lengths in zip(_batches(sources, batch_size),
                                    _batches(lengths, batch_size)):
        decoded, batch_passes = decode_batch(batch, batch_lengths)
        units += sum(len(u) for u in decoded)
        passes += batch_passes
    return units, passes, max(clock() - started, 1e-9)


def speed_benchmark(cmlm_model, ar_model, sources, reference_lengths,
                    iteration_grid=(3, 5, 7, 10, 15), omega=0.0,
                    batch_size=1, system='cmlm', clock=time.perf_counter):
    """
    Decode *sources* with *ar_model* and with *cmlm_model* at every
    iteration count of *iteration_grid*. Both decoders produce exactly
    *reference_lengths* units, so units per second compare equal work.
    Return list of :class:`BenchmarkRow`, the baseline first; *speedup*
    is relative to the baseline.

    The baseline decodes with cached keys and values, one new position
    per pass, so its cost grows linearly with each prefix and not with
    a full rerun of the decoder.
    """
    sources = list(sources)
    lengths = list(reference_lengths)
    if len(sources) != len(lengths):
        raise ValueError("Got %d reference lengths for %d sources"
                         % (len(lengths), len(sources)))

    def ar_batch(batch, batch_lengths):
        return ar_decode(ar_model, batch, reference_lengths=batch_lengths)

    units, passes, seconds = _timed(ar_batch, sources, lengths, batch_size,
                                    clock)
    baseline = units / seconds
    rows = [BenchmarkRow(AR_SYSTEM, 0, len(sources), units, passes, seconds,
                         baseline, 1.0)]
    logger.info("AR baseline: %d units in %.3f s (%.1f units/s)",
                units, seconds, baseline)

    for iterations in iteration_grid:
        config = DecodeConfig(iterations=iterations, omega=omega,
                              length_mode='oracle', seed=0)

        def cmlm_batch(batch, batch_lengths, config=config):
            decoded = decode(cmlm_model, batch, config,
                             reference_lengths=batch_lengths)
            passes = config.iterations * (2 if config.omega > 0 else 1)
            return decoded, passes

        units, passes, seconds = _timed(cmlm_batch, sources, lengths,
                                        batch_size, clock)
        speed = units / seconds
        rows.append(BenchmarkRow(system, iterations, len(sources), units,
                                 passes, seconds, speed, speed / baseline))
        logger.info("%s at %d iterations: %.1f units/s (%.2fx)",
                    system, iterations, speed, speed / baseline)
    return rows
