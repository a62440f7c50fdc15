"""
Module :module:`unitnorm.models.cmlm` implements the non-autoregressive
speech-to-unit model: conditional masked language model trained with
the unmasking objective and source dropout to a learned null
representation, decoded by mask-predict with optional guidance by the
unconditional distribution.
"""

import collections
import logging

import numpy as np

from unitnorm.core.exceptions import ShapeError
from unitnorm.models.layers import add_positions, frame_weights
from unitnorm.models.training import (
    TrainingLog, build_optimizer, iterate_batches, pad_sequences)
from unitnorm.tensor import ops
from unitnorm.tensor.nn import (
    Conv1d, Embedding, Linear, Module, Parameter, TransformerDecoder,
    TransformerEncoder)
from unitnorm.tensor.tensor import as_tensor, no_grad
from unitnorm.utils.seeding import make_rng

__all__ = [
    'SourceEncoder', 'S2utModel', 'DecodeConfig', 'LengthBucketOverflow',
    'mask_targets', 'cmlm_loss', 'train_step', 'train_cmlm', 'predict_length',
    'remask_count', 'guided_scores', 'decode', 'decode_batches',
    'encode_batch', 'LOSS_FIELDS',
]

logger = logging.getLogger(__name__)

LOSS_FIELDS = ('tokens', 'length', 'dropped', 'total')

DecodeConfig = collections.namedtuple(
    'DecodeConfig', ['iterations', 'omega', 'length_mode', 'seed'])
DecodeConfig.__new__.__defaults__ = (15, 0.0, 'predicted', 0)


class LengthBucketOverflow(ValueError):
    """
    Target sequence is longer than the longest length bucket.
    """

    pass


class SourceEncoder(Module):
    """
    Two strided convolutions (total stride 4) followed by a transformer
    encoder over the subsampled source frames.
    """

    def __init__(self, source_dim, model_dim, heads, layers, ffn_dim, rng,
                 dropout=0.0):
        super(SourceEncoder, self).__init__()
        self.source_dim = source_dim
        self.subsample = [
            Conv1d(source_dim, model_dim, 3, rng, stride=2, padding=1),
            Conv1d(model_dim, model_dim, 3, rng, stride=2, padding=1),
        ]
        self.encoder = TransformerEncoder(layers, model_dim, heads, ffn_dim,
                                          rng, dropout=dropout)

    def forward(self, x, mask):
        """
        Encode padded source features *x* (``B x N x H_src``) with valid
        frames *mask*. Return ``(states, subsampled_mask)``.
        """
        if x.ndim != 3 or x.shape[-1] != self.source_dim:
            raise ShapeError("Expected source features with last dimension "
                             "%d, got shape %s" % (self.source_dim, x.shape))
        for conv in self.subsample:
            x = ops.gelu(conv(x * frame_weights(mask, x.dtype)))
            mask = mask[:, ::2]
        states = self.encoder(add_positions(x), mask=mask)
        return states, mask


class S2utModel(Module):
    """
    Conditional masked language model. Unit ids are ``0 .. units - 1``,
    id ``units`` is the mask token. The length predictor classifies
    mean-pooled encoder states into buckets of *length_bucket* lengths.
    """

    kind = 'cmlm'

    def __init__(self, source_dim, units, model_dim=128, heads=4,
                 encoder_layers=3, decoder_layers=3, ffn_dim=256,
                 dropout=0.1, length_bucket=4, max_length=512, seed=0):
        super(S2utModel, self).__init__()
        if length_bucket < 1:
            raise ValueError("Length bucket width must be >= 1, got %r"
                             % length_bucket)
        self.options = dict(
            source_dim=source_dim, units=units, model_dim=model_dim,
            heads=heads, encoder_layers=encoder_layers,
            decoder_layers=decoder_layers, ffn_dim=ffn_dim, dropout=dropout,
            length_bucket=length_bucket, max_length=max_length, seed=seed)
        self.units = units
        self.mask_id = units
        self.length_bucket = length_bucket
        self.max_length = max_length
        self.buckets = max_length // length_bucket + 1
        rng = make_rng(seed, self.kind)
        self.encoder = SourceEncoder(source_dim, model_dim, heads,
                                     encoder_layers, ffn_dim, rng,
                                     dropout=dropout)
        self.null_source = Parameter(
            rng.normal(0.0, model_dim ** -0.5, size=model_dim))
        self.embedding = Embedding(units + 1, model_dim, rng)
        self.decoder = TransformerDecoder(decoder_layers, model_dim, heads,
                                          ffn_dim, rng, dropout=dropout)
        self.output = Linear(model_dim, units, rng)
        self.length_head = Linear(model_dim, self.buckets, rng)

    @classmethod
    def from_config(cls, section, corpus, seed):
        return cls(
            corpus.source_feature_dim, corpus.units,
            model_dim=section.model_dim, heads=section.heads,
            encoder_layers=section.encoder_layers,
            decoder_layers=section.decoder_layers, ffn_dim=section.ffn_dim,
            dropout=section.dropout, length_bucket=section.length_bucket,
            max_length=section.max_length, seed=seed)

    def length_to_bucket(self, lengths):
        lengths = np.asarray(lengths, dtype=np.int64)
        if np.any(lengths > self.max_length):
            raise LengthBucketOverflow(
                "Target length %d exceeds maximal length %d"
                % (lengths.max(), self.max_length))
        return lengths // self.length_bucket

    def bucket_to_length(self, buckets):
        """
        Representative length of every bucket: its middle.
        """
        buckets = np.asarray(buckets, dtype=np.int64)
        return buckets * self.length_bucket + self.length_bucket // 2

    def null_memory(self, batch, length):
        """
        Null representation broadcast over ``batch x length`` positions.
        """
        ones = np.ones((batch, length, 1), dtype=self.null_source.dtype)
        return ops.reshape(self.null_source, (1, 1, -1)) * ones

    def length_logits(self, states, memory_mask, stop_gradient=False):
        if stop_gradient:
            states = states.detach()
        return self.length_head(ops.mean_pool(states, memory_mask))

    def decoder_logits(self, memory, memory_mask, tokens, target_mask):
        """
        Unit logits of every target position given partially masked
        *tokens*. The decoder attends in both directions.
        """
        hidden = add_positions(self.embedding(tokens))
        hidden = self.decoder(hidden, memory, mask=target_mask,
                              memory_mask=memory_mask)
        return self.output(hidden)


def encode_batch(model, sources):
    """
    Pad list of source feature matrices and encode them. Return
    ``(states, memory_mask)``.
    """
    x, mask = pad_sequences(sources, dtype=np.float32)
    return model.encoder(as_tensor(x), mask)


def mask_targets(y, rng, mask_id):
    """
    Mask a uniformly random subset of *y* whose size is drawn from
    ``U[1, M]``. Return ``(masked, positions)`` with sorted positions.
    """
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1 or len(y) < 1:
        raise ValueError("Cannot mask an empty unit sequence")
    count = int(rng.integers(1, len(y) + 1))
    positions = np.sort(rng.choice(len(y), size=count, replace=False))
    masked = y.copy()
    masked[positions] = mask_id
    return masked, positions


def cmlm_loss(model, sources, targets, mask_rng, drop_rng, cg_dropout=0.0,
              label_smoothing=0.0, length_weight=0.1,
              stop_length_gradient=False):
    """
    Unmasking objective on one batch: cross-entropy at masked target
    positions plus weighted length prediction cross-entropy. With
    probability *cg_dropout* per example, encoder states are replaced by
    the null representation (length prediction always sees the encoder).
    Return ``(total, components)``.
    """
    states, memory_mask = encode_batch(model, sources)
    batch = len(targets)
    lengths = np.array([len(y) for y in targets], dtype=np.int64)
    length_targets = model.length_to_bucket(lengths)

    masked_rows = []
    loss_rows = []
    for y in targets:
        masked, positions = mask_targets(y, mask_rng, model.mask_id)
        selected = np.zeros(len(y), dtype=bool)
        selected[positions] = True
        masked_rows.append(masked)
        loss_rows.append(selected)
    tokens, target_mask = pad_sequences(masked_rows, dtype=np.int64)
    y, _ = pad_sequences(targets, dtype=np.int64)
    loss_mask, _ = pad_sequences(loss_rows, dtype=bool)

    dropped = np.zeros(batch, dtype=bool)
    memory = states
    encoder_mask = memory_mask
    if cg_dropout > 0:
        dropped = drop_rng.random(batch) < cg_dropout
        if dropped.any():
            keep = (~dropped).astype(states.dtype)[:, None, None]
            memory = states * keep + model.null_memory(
                batch, states.shape[1]) * (1.0 - keep)
            memory_mask = memory_mask | dropped[:, None]

    logits = model.decoder_logits(memory, memory_mask, tokens, target_mask)
    token_loss = ops.cross_entropy(logits, y, mask=loss_mask,
                                   label_smoothing=label_smoothing)
    length_loss = ops.cross_entropy(
        model.length_logits(states, encoder_mask,
                            stop_gradient=stop_length_gradient),
        length_targets)
    total = token_loss + length_loss * length_weight
    components = collections.OrderedDict([
        ('tokens', token_loss.item()), ('length', length_loss.item()),
        ('dropped', float(dropped.mean())), ('total', total.item())])
    return total, components


def train_step(model, optimizer, sources, targets, mask_rng, drop_rng,
               cg_dropout=0.0, label_smoothing=0.0, length_weight=0.1,
               stop_length_gradient=False):
    """
    One optimizer update on a batch. Return ``(components, grad_norm)``.
    """
    total, components = cmlm_loss(
        model, sources, targets, mask_rng, drop_rng, cg_dropout=cg_dropout,
        label_smoothing=label_smoothing, length_weight=length_weight,
        stop_length_gradient=stop_length_gradient)
    total.backward()
    return components, optimizer.step()


def train_cmlm(model, pairs, section, seed, cg_dropout=None, path=None,
               log_interval=100, steps=None):
    """
    Train *model* on ``(source_features, target_units)`` *pairs*. Return
    :class:`TrainingLog`.
    """
    steps = section.steps if steps is None else steps
    cg_dropout = section.cg_dropout if cg_dropout is None else cg_dropout
    optimizer = build_optimizer(model, section)
    batches = iterate_batches(pairs, section.batch_size,
                              make_rng(seed, 'cmlm', 'batches'))
    mask_rng = make_rng(seed, 'cmlm', 'mask')
    drop_rng = make_rng(seed, 'cmlm', 'drop')
    model.train()
    log = TrainingLog(LOSS_FIELDS, path=path, log_interval=log_interval,
                      logger=logger)
    with log:
        for step in range(1, steps + 1):
            batch = next(batches)
            lr = optimizer.current_lr()
            components, norm = train_step(
                model, optimizer, [x for x, _ in batch],
                [y for _, y in batch], mask_rng, drop_rng,
                cg_dropout=cg_dropout,
                label_smoothing=section.label_smoothing,
                length_weight=section.length_loss_weight,
                stop_length_gradient=section.stop_length_gradient)
            log.append(step, components, lr, norm)
    model.eval()
    logger.info("CMLM training (source dropout %.2f) finished after %d "
                "steps, final loss %.5f", cg_dropout, steps,
                log.rows[-1]['total'] if log.rows else float('nan'))
    return log


def _bucket_lengths(model, states, memory_mask):
    logits = model.length_logits(states, memory_mask)
    lengths = model.bucket_to_length(np.argmax(logits.data, axis=-1))
    if np.any(lengths < 1):
        logger.warning("Predicted zero length for %d source(s), using 1",
                       int(np.sum(lengths < 1)))
    return np.clip(lengths, 1, model.max_length)


def predict_length(model, sources, reference_lengths=None):
    """
    Predicted target length of every source, at least 1. With
    *reference_lengths* (oracle mode) these are returned unchanged.
    """
    if reference_lengths is not None:
        lengths = np.asarray(reference_lengths, dtype=np.int64)
        if len(lengths) != len(sources):
            raise ValueError("Got %d reference lengths for %d sources"
                             % (len(lengths), len(sources)))
        return lengths
    with no_grad():
        states, memory_mask = encode_batch(model, sources)
        return _bucket_lengths(model, states, memory_mask)


def remask_count(length, iterations, iteration):
    """
    Number of tokens re-masked after *iteration* (``1 .. iterations``):
    ``floor(length * (iterations - iteration) / iterations)``.
    """
    if not 1 <= iteration <= iterations:
        raise ValueError("Iteration %r out of range [1, %r]"
                         % (iteration, iterations))
    return (length * (iterations - iteration)) // iterations


def guided_scores(conditional, unconditional, omega):
    """
    Scores ``omega * (conditional - unconditional) + conditional`` used
    to pick tokens for re-masking. ``omega == 0`` returns *conditional*
    itself.
    """
    if omega == 0:
        return conditional
    return omega * (conditional - unconditional) + conditional


def decode(model, sources, config, reference_lengths=None):
    """
    Mask-predict decoding of a batch of *sources* with
    :class:`DecodeConfig` *config*. Every iteration predicts all masked
    positions in parallel with the conditional argmax, then re-masks the
    positions with the lowest (guided) scores. Return list of unit
    arrays.
    """
    if config.iterations < 1:
        raise ValueError("Number of iterations must be >= 1, got %r"
                         % config.iterations)
    if config.omega < 0:
        raise ValueError("Guidance weight must be >= 0, got %r"
                         % config.omega)
    if config.length_mode == 'oracle':
        if reference_lengths is None:
            raise ValueError("Oracle length mode needs reference lengths")
        lengths = np.maximum(predict_length(model, sources,
                                            reference_lengths), 1)
    elif config.length_mode == 'predicted':
        lengths = None
    else:
        raise ValueError("Unknown length mode '%s'" % config.length_mode)

    with no_grad():
        states, memory_mask = encode_batch(model, sources)
        if lengths is None:
            lengths = _bucket_lengths(model, states, memory_mask)
        batch = len(sources)
        target_mask = np.arange(lengths.max())[None, :] < lengths[:, None]
        tokens = np.where(target_mask, model.mask_id, 0).astype(np.int64)
        scores = np.zeros(tokens.shape)
        null_memory = null_mask = None
        if config.omega > 0:
            null_memory = model.null_memory(batch, states.shape[1])
            null_mask = np.ones(memory_mask.shape, dtype=bool)
        rows = np.arange(batch)[:, None]
        columns = np.arange(tokens.shape[1])[None, :]

        for iteration in range(1, config.iterations + 1):
            masked = (tokens == model.mask_id) & target_mask
            log_probs = ops.log_softmax(model.decoder_logits(
                states, memory_mask, tokens, target_mask), axis=-1).data
            predicted = np.argmax(log_probs, axis=-1)
            conditional = np.exp(np.take_along_axis(
                log_probs, predicted[..., None], axis=-1)[..., 0])
            unconditional = None
            if config.omega > 0:
                null_log_probs = ops.log_softmax(model.decoder_logits(
                    null_memory, null_mask, tokens, target_mask),
                    axis=-1).data
                unconditional = np.exp(np.take_along_axis(
                    null_log_probs, predicted[..., None], axis=-1)[..., 0])
            step_scores = guided_scores(conditional, unconditional,
                                        config.omega)
            tokens = np.where(masked, predicted, tokens)
            scores = np.where(masked, step_scores, scores)
            if iteration == config.iterations:
                break
            ranking = np.where(target_mask, scores, np.inf)
            order = np.argsort(ranking, axis=1, kind='stable')
            counts = np.array([remask_count(int(length), config.iterations,
                                            iteration)
                               for length in lengths])
            remask = np.zeros(tokens.shape, dtype=bool)
            remask[rows, order] = columns < counts[:, None]
            tokens = np.where(remask, model.mask_id, tokens)
    return [tokens[i, :lengths[i]].copy() for i in range(batch)]


def decode_batches(model, sources, config, batch_size=32,
                   reference_lengths=None):
    """
    :func:`decode` over a list of any length, *batch_size* sources at
    a time.
    """
    units = []
    for start in range(0, len(sources), batch_size):
        lengths = None
        if reference_lengths is not None:
            lengths = reference_lengths[start:start + batch_size]
        units.extend(decode(model, sources[start:start + batch_size], config,
                            reference_lengths=lengths))
    return units
