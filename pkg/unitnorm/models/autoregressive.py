"""
Module :module:`unitnorm.models.autoregressive` implements the
autoregressive speech-to-unit baseline. It shares the source encoder
with the non-autoregressive model and decodes greedily left to right,
one decoder pass per emitted unit.
"""

import collections
import logging

import numpy as np

from unitnorm.models.cmlm import SourceEncoder, encode_batch
from unitnorm.models.layers import add_positions
from unitnorm.models.training import (
    TrainingLog, build_optimizer, iterate_batches, pad_sequences)
from unitnorm.tensor import ops
from unitnorm.tensor.nn import Embedding, Linear, Module, TransformerDecoder
from unitnorm.tensor.tensor import no_grad
from unitnorm.utils.seeding import make_rng

__all__ = ['ArModel', 'ar_loss', 'train_ar', 'ar_decode', 'LOSS_FIELDS']

logger = logging.getLogger(__name__)

LOSS_FIELDS = ('tokens', 'total')


class ArModel(Module):
    """
    Encoder-decoder transformer with causal decoder. Unit ids are
    ``0 .. units - 1``, id ``units`` starts every sequence and
    ``units + 1`` ends it.
    """

    kind = 'ar'

    def __init__(self, source_dim, units, model_dim=128, heads=4,
                 encoder_layers=3, decoder_layers=3, ffn_dim=256,
                 dropout=0.1, max_length=512, seed=0):
        super(ArModel, self).__init__()
        self.options = dict(
            source_dim=source_dim, units=units, model_dim=model_dim,
            heads=heads, encoder_layers=encoder_layers,
            decoder_layers=decoder_layers, ffn_dim=ffn_dim, dropout=dropout,
            max_length=max_length, seed=seed)
        self.units = units
        self.bos_id = units
        self.eos_id = units + 1
        self.max_length = max_length
        rng = make_rng(seed, self.kind)
        self.encoder = SourceEncoder(source_dim, model_dim, heads,
                                     encoder_layers, ffn_dim, rng,
                                     dropout=dropout)
        self.embedding = Embedding(units + 2, model_dim, rng)
        self.decoder = TransformerDecoder(decoder_layers, model_dim, heads,
                                          ffn_dim, rng, dropout=dropout)
        self.output = Linear(model_dim, units + 2, rng)

    @classmethod
    def from_config(cls, section, corpus, seed):
        return cls(
            corpus.source_feature_dim, corpus.units,
            model_dim=section.model_dim, heads=section.heads,
            encoder_layers=section.encoder_layers,
            decoder_layers=section.decoder_layers, ffn_dim=section.ffn_dim,
            dropout=section.dropout, max_length=section.max_length, seed=seed)

    def decoder_logits(self, memory, memory_mask, tokens, target_mask):
        hidden = add_positions(self.embedding(tokens))
        hidden = self.decoder(hidden, memory, mask=target_mask,
                              memory_mask=memory_mask, causal=True)
        return self.output(hidden)

    def decoder_step(self, memory, memory_mask, tokens, position, caches):
        """
        Logits ``B x 1 x V`` of the position after *tokens* (``B`` ids
        at *position*) reusing per-layer *caches* of earlier positions.
        """
        hidden = self.embedding(tokens[:, None])
        hidden = hidden + ops.sinusoidal_encoding(
            [position], hidden.shape[2], dtype=hidden.dtype)
        hidden = self.decoder.step(hidden, memory, caches,
                                   memory_mask=memory_mask)
        return self.output(hidden)


def _teacher_forcing(model, targets):
    inputs = [np.concatenate([[model.bos_id], y]) for y in targets]
    outputs = [np.concatenate([y, [model.eos_id]]) for y in targets]
    tokens, mask = pad_sequences(inputs, dtype=np.int64)
    labels, _ = pad_sequences(outputs, dtype=np.int64)
    return tokens, labels, mask


def ar_loss(model, sources, targets, label_smoothing=0.1):
    """
    Teacher-forced cross-entropy over all target positions and the end
    token. Return ``(total, components)``.
    """
    for y in targets:
        if len(y) > model.max_length:
            raise ValueError("Target length %d exceeds maximal length %d"
                             % (len(y), model.max_length))
    states, memory_mask = encode_batch(model, sources)
    tokens, labels, mask = _teacher_forcing(model, targets)
    logits = model.decoder_logits(states, memory_mask, tokens, mask)
    total = ops.cross_entropy(logits, labels, mask=mask,
                              label_smoothing=label_smoothing)
    components = collections.OrderedDict([
        ('tokens', total.item()), ('total', total.item())])
    return total, components


def train_ar(model, pairs, section, seed, path=None, log_interval=100,
             steps=None):
    steps = section.steps if steps is None else steps
    optimizer = build_optimizer(model, section)
    batches = iterate_batches(pairs, section.batch_size,
                              make_rng(seed, 'ar', 'batches'))
    model.train()
    log = TrainingLog(LOSS_FIELDS, path=path, log_interval=log_interval,
                      logger=logger)
    with log:
        for step in range(1, steps + 1):
            batch = next(batches)
            lr = optimizer.current_lr()
            total, components = ar_loss(
                model, [x for x, _ in batch], [y for _, y in batch],
                label_smoothing=section.label_smoothing)
            total.backward()
            log.append(step, components, lr, optimizer.step())
    model.eval()
    logger.info("AR training finished after %d steps, final loss %.5f",
                steps, log.rows[-1]['total'] if log.rows else float('nan'))
    return log


def ar_decode(model, sources, max_length=None, reference_lengths=None,
              cache=True):
    """
    Greedy decoding of a batch of *sources*. A sequence ends at the end
    token or after *max_length* units (default ``3 * N' + 10`` for
    ``N'`` encoder positions, capped by the model limit). With
    *reference_lengths* the end token is suppressed and every sequence
    gets exactly its reference length. Return ``(units, passes)`` where
    *passes* counts sequential decoder calls.

    With *cache* every pass feeds only the newest token and reuses keys
    and values of earlier positions, so a pass costs time linear in the
    prefix length. Without it every pass reruns the decoder over the
    whole prefix.
    """
    batch = len(sources)
    with no_grad():
        states, memory_mask = encode_batch(model, sources)
        if reference_lengths is not None:
            limits = np.asarray(reference_lengths, dtype=np.int64)
            if len(limits) != batch:
                raise ValueError("Got %d reference lengths for %d sources"
                                 % (len(limits), batch))
        elif max_length is not None:
            limits = np.full(batch, int(max_length), dtype=np.int64)
        else:
            limits = 3 * memory_mask.sum(axis=1) + 10
        limits = np.minimum(limits, model.max_length)

        tokens = np.full((batch, 1), model.bos_id, dtype=np.int64)
        finished = limits <= 0
        emitted = np.zeros(batch, dtype=np.int64)
        passes = 0
        caches = [{} for _ in model.decoder.layers]
        while not finished.all():
            if cache:
                logits = model.decoder_step(
                    states, memory_mask, tokens[:, -1], tokens.shape[1] - 1,
                    caches).data[:, -1]
            else:
                target_mask = np.ones(tokens.shape, dtype=bool)
                logits = model.decoder_logits(
                    states, memory_mask, tokens, target_mask).data[:, -1]
            logits[:, model.bos_id] = -np.inf
            if reference_lengths is not None:
                logits[:, model.eos_id] = -np.inf
            passes += 1
            predicted = np.argmax(logits, axis=-1)
            predicted = np.where(finished, model.eos_id, predicted)
            finished = finished | (predicted == model.eos_id)
            emitted += ~finished
            finished = finished | (emitted >= limits)
            tokens = np.concatenate([tokens, predicted[:, None]], axis=1)
    units = []
    for i in range(batch):
        sequence = tokens[i, 1:1 + emitted[i]]
        units.append(sequence.copy())
    return units, passes
