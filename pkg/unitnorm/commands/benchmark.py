"""
Measure decoding speed.
"""

from unitnorm.core.commands import BaseCommand, argument
from unitnorm.core.constants import SPLITS
from unitnorm.corpus import storage
from unitnorm.evaluation.benchmark import BENCHMARK_FIELDS, speed_benchmark
from unitnorm.models.autoregressive import ArModel
from unitnorm.models.cmlm import S2utModel
from unitnorm.models.training import load_model
from unitnorm.pipeline.report import write_rows


class Benchmark(BaseCommand):
    """
    Management command which decodes the first ``[evaluation]
    benchmark_utterances`` utterances of ``--split`` by the CMLM at
    every count of ``[decode] iteration_grid`` and by the autoregressive
    baseline, and writes units per second into CSV ``--out``.
    """

    name = 'benchmark'
    help = 'compare decoding speed of CMLM and autoregressive baseline'
    arguments = (
        argument('--model', dest='model', required=True,
                 help='CMLM checkpoint'),
        argument('--ar-model', dest='ar_model', required=True,
                 help='autoregressive checkpoint'),
        argument('--data', dest='data', required=True,
                 help='corpus directory'),
        argument('--split', dest='split', default=None, choices=SPLITS,
                 help='override [evaluation] split'),
        argument('--out', dest='out', required=True,
                 help='output CSV'),
    )

    def command(self):
        config = self.context.config
        cmlm_model, _ = load_model(self.args.model, S2utModel)
        ar_model, _ = load_model(self.args.ar_model, ArModel)
        utterances = storage.read_split(
            self.args.data, self.args.split or config.evaluation.split)
        utterances = utterances[:config.evaluation.benchmark_utterances]
        rows = speed_benchmark(
            cmlm_model, ar_model, [u.source_features for u in utterances],
            [len(u.target_units) for u in utterances],
            iteration_grid=config.decode.iteration_grid)
        write_rows(self.args.out, BENCHMARK_FIELDS, rows)
