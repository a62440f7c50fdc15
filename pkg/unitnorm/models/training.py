"""
Module :module:`unitnorm.models.training` contains helpers shared by the
training loops: batching of variable-length sequences, optimizer
construction, per-step CSV log and model checkpoints.
"""

import csv
import logging

import numpy as np

from unitnorm.core.exceptions import CheckpointError
from unitnorm.tensor import checkpoint
from unitnorm.tensor.optim import Adam, InverseSqrtSchedule

__all__ = [
    'pad_sequences', 'iterate_batches', 'build_optimizer', 'TrainingLog',
    'ema', 'save_model', 'load_model', 'lengths_mask',
]

logger = logging.getLogger(__name__)


def lengths_mask(lengths, max_length=None):
    """
    Boolean ``B x max_length`` array, row *i* holds :const:`True` on the
    first ``lengths[i]`` positions.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    if max_length is None:
        max_length = int(lengths.max()) if lengths.size else 0
    return np.arange(max_length)[None, :] < lengths[:, None]


def pad_sequences(sequences, fill=0, dtype=None):
    """
    Stack arrays of different lengths (first axis) into one array padded
    with *fill*. Return ``(padded, mask)``.
    """
    if not sequences:
        raise ValueError("Cannot pad an empty list of sequences")
    sequences = [np.asarray(s) for s in sequences]
    lengths = [len(s) for s in sequences]
    dtype = dtype or sequences[0].dtype
    shape = (len(sequences), max(lengths)) + sequences[0].shape[1:]
    padded = np.full(shape, fill, dtype=dtype)
    for i, sequence in enumerate(sequences):
        padded[i, :len(sequence)] = sequence
    return padded, lengths_mask(lengths, shape[1])


def iterate_batches(items, batch_size, rng):
    """
    Endless generator of batches of *items*. Every epoch visits items in
    a new order drawn from *rng*.
    """
    if not items:
        raise ValueError("Cannot draw batches from an empty dataset")
    if batch_size < 1:
        raise ValueError("Batch size must be >= 1, got %r" % batch_size)
    while True:
        order = rng.permutation(len(items))
        for start in range(0, len(order), batch_size):
            yield [items[i] for i in order[start:start + batch_size]]


def build_optimizer(model, section):
    """
    Adam over trainable parameters of *model* with hyperparameters of
    config *section* (``lr``, ``warmup_steps``, ``clip_norm``).
    """
    params = [p for p in model.parameters() if p.requires_grad]
    return Adam(params, lr=InverseSqrtSchedule(section.lr,
                                               section.warmup_steps),
                betas=(0.9, 0.98), clip_norm=section.clip_norm)


def ema(values, window=100):
    """
    Exponential moving average of *values* with smoothing
    ``2 / (window + 1)``.
    """
    alpha = 2.0 / (window + 1.0)
    result = []
    current = None
    for value in values:
        current = value if current is None else \
            alpha * value + (1.0 - alpha) * current
        result.append(current)
    return result


class TrainingLog(object):
    """
    Collects loss components of every training step. Rows are written
    into CSV file *path* (if set) and every *log_interval* steps they are
    logged by *logger*.
    """

    def __init__(self, fields, path=None, log_interval=100, logger=None):
        self.fields = ('step',) + tuple(fields) + ('lr', 'grad_norm')
        self.rows = []
        self.log_interval = log_interval
        self.logger = logger or logging.getLogger(
            "{:s}.{:s}".format(__name__, self.__class__.__name__))
        self._file = None
        self._writer = None
        if path:
            self._file = open(path, 'w', newline='')
            self._writer = csv.writer(self._file)
            self._writer.writerow(self.fields)

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def append(self, step, components, lr, grad_norm):
        row = dict(components)
        row.update(step=step, lr=lr, grad_norm=grad_norm)
        self.rows.append(row)
        if self._writer is not None:
            self._writer.writerow(
                [step] + ['%.8g' % row[name] for name in self.fields[1:]])
        if self.log_interval and step % self.log_interval == 0:
            self.logger.info(
                "step %d: %s, lr %.3g", step,
                ', '.join('%s %.5f' % (name, row[name])
                          for name in self.fields[1:-2]), lr)

    def column(self, name):
        return [row[name] for row in self.rows]

    def close(self):
        if self._file is not None:
            self._file.close()
            self._file = None
            self._writer = None


def save_model(path, model, fingerprint='', metadata=None):
    """
    Write parameters of *model* into checkpoint *path*. Metadata carries
    the model kind and its constructor options, so :func:`load_model`
    can rebuild it.
    """
    document = {'kind': model.kind, 'options': model.options}
    document.update(metadata or {})
    checkpoint.save(path, model.state_dict(), fingerprint=fingerprint,
                    metadata=document)
    logger.info("Saved %s model (%d parameters) into '%s'",
                model.kind, model.num_parameters(), path)


def load_model(path, model_class, fingerprint=None):
    """
    Rebuild model of *model_class* from checkpoint *path*, return
    ``(model, checkpoint)``. The model is returned in evaluation mode.
    """
    loaded = checkpoint.load(path, fingerprint=fingerprint)
    kind = loaded.metadata.get('kind')
    if kind != model_class.kind:
        raise CheckpointError("Checkpoint '%s' holds '%s' model, expected "
                              "'%s'" % (path, kind, model_class.kind))
    model = model_class(**loaded.metadata['options'])
    model.load_state_dict(loaded.arrays)
    model.eval()
    return model, loaded
