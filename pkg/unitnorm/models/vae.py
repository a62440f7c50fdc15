"""
Module :module:`unitnorm.models.vae` implements the variational
autoencoder which compresses feature frames into Gaussian latents and
decodes them back into features and unit logits.
"""

import collections
import logging

import numpy as np

from unitnorm.core.exceptions import ShapeError
from unitnorm.models.layers import (
    WaveNetStack, add_positions, as_batch, frame_weights, unbatch)
from unitnorm.models.training import (
    TrainingLog, build_optimizer, iterate_batches, pad_sequences)
from unitnorm.tensor import ops
from unitnorm.tensor.nn import Linear, Module, TransformerEncoder
from unitnorm.tensor.tensor import Tensor, as_tensor, no_grad
from unitnorm.utils.seeding import make_rng

__all__ = [
    'VaeModel', 'VaeLossWeights', 'sample_latent', 'kl_term', 'vae_loss',
    'train_vae', 'reconstruction_accuracy', 'LOSS_FIELDS',
]

logger = logging.getLogger(__name__)

LOSS_FIELDS = ('recon', 'nll', 'kl', 'total')

VaeLossWeights = collections.namedtuple(
    'VaeLossWeights', ['recon', 'nll', 'kl'])
VaeLossWeights.__new__.__defaults__ = (100.0, 1.0, 0.001)


class VaeModel(Module):
    """
    Convolutional encoder with separate mean and log-variance heads,
    convolutional decoder followed by a transformer refiner, and an
    affine language-modeling head over the unit vocabulary.
    """

    kind = 'vae'

    def __init__(self, feature_dim, units, latent_dim=16, channels=64,
                 stacks=2, layers=3, kernel_size=3, model_dim=128, heads=4,
                 refiner_layers=2, ffn_dim=256, dropout=0.1,
                 logvar_min=-12.0, logvar_max=6.0, seed=0):
        super(VaeModel, self).__init__()
        if logvar_min >= logvar_max:
            raise ValueError("Invalid log-variance bounds [%r, %r]"
                             % (logvar_min, logvar_max))
        self.options = dict(
            feature_dim=feature_dim, units=units, latent_dim=latent_dim,
            channels=channels, stacks=stacks, layers=layers,
            kernel_size=kernel_size, model_dim=model_dim, heads=heads,
            refiner_layers=refiner_layers, ffn_dim=ffn_dim, dropout=dropout,
            logvar_min=logvar_min, logvar_max=logvar_max, seed=seed)
        self.feature_dim = feature_dim
        self.units = units
        self.latent_dim = latent_dim
        self.logvar_bounds = (float(logvar_min), float(logvar_max))
        rng = make_rng(seed, self.kind)
        self.encoder = WaveNetStack(feature_dim, channels, channels, stacks,
                                    layers, kernel_size, rng)
        self.mu_head = Linear(channels, latent_dim, rng)
        self.logvar_head = Linear(channels, latent_dim, rng)
        self.decoder = WaveNetStack(latent_dim, channels, model_dim, stacks,
                                    layers, kernel_size, rng)
        self.refiner = TransformerEncoder(refiner_layers, model_dim, heads,
                                          ffn_dim, rng, dropout=dropout)
        self.output = Linear(model_dim, feature_dim, rng)
        self.lm_head = Linear(feature_dim, units, rng)

    @classmethod
    def from_config(cls, section, corpus, seed):
        """
        Build model from ``[vae]`` *section* and ``[corpus]`` *corpus*.
        """
        return cls(
            corpus.feature_dim, corpus.units, latent_dim=section.latent_dim,
            channels=section.channels, stacks=section.stacks,
            layers=section.layers, kernel_size=section.kernel_size,
            model_dim=section.model_dim, heads=section.heads,
            refiner_layers=section.refiner_layers, ffn_dim=section.ffn_dim,
            dropout=section.dropout, logvar_min=section.logvar_min,
            logvar_max=section.logvar_max, seed=seed)

    def encode(self, h, mask=None):
        """
        Map features *h* (``M x H`` or padded ``B x M x H``) to latent mean
        and clamped log-variance, each of the same length.
        """
        h, mask, batched = as_batch(h, self.feature_dim, 'features', mask)
        weights = frame_weights(mask, h.dtype)
        hidden = self.encoder(h * weights, weights)
        mu = self.mu_head(hidden) * weights
        logvar = ops.clamp(self.logvar_head(hidden), *self.logvar_bounds)
        return unbatch(mu, batched), unbatch(logvar, batched)

    def decode(self, z, mask=None):
        """
        Reconstruct features from latents *z* (``M x Z`` or ``B x M x Z``).
        """
        z, mask, batched = as_batch(z, self.latent_dim, 'latents', mask)
        weights = frame_weights(mask, z.dtype)
        hidden = add_positions(self.decoder(z * weights, weights))
        hidden = self.refiner(hidden, mask=mask)
        return unbatch(self.output(hidden) * weights, batched)

    def lm_logits(self, h_hat):
        """
        Unnormalized unit logits of every reconstructed frame.
        """
        h_hat = as_tensor(h_hat)
        if h_hat.shape[-1] != self.feature_dim:
            raise ShapeError("Expected features with last dimension %d, got "
                             "shape %s" % (self.feature_dim, h_hat.shape))
        return self.lm_head(h_hat)

    def reconstruct(self, h, mask=None):
        """
        Deterministic round trip through the posterior mean. Return
        ``(features, units)`` as arrays.
        """
        with no_grad():
            mu, _ = self.encode(h, mask)
            h_hat = self.decode(mu, mask)
            logits = self.lm_logits(h_hat)
        return h_hat.data, np.argmax(logits.data, axis=-1)


def sample_latent(mu, logvar, rng):
    """
    Reparameterized sample ``mu + exp(logvar / 2) * eps`` with standard
    normal ``eps`` drawn from *rng* (generator or integer seed).
    """
    mu, logvar = as_tensor(mu), as_tensor(logvar)
    if mu.shape != logvar.shape:
        raise ShapeError("Mean %s and log-variance %s differ in shape"
                         % (mu.shape, logvar.shape))
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    eps = Tensor(rng.standard_normal(mu.shape), dtype=mu.dtype)
    return mu + ops.exp(logvar * 0.5) * eps


def kl_term(mu, logvar, mask=None):
    """
    KL divergence of the diagonal Gaussian posterior from the standard
    normal prior, summed over latent dimensions and averaged over
    frames where *mask* holds.
    """
    mu, logvar = as_tensor(mu), as_tensor(logvar)
    if mu.shape != logvar.shape:
        raise ShapeError("Mean %s and log-variance %s differ in shape"
                         % (mu.shape, logvar.shape))
    per_frame = (1.0 + logvar - mu * mu - ops.exp(logvar)).sum(axis=-1) * -0.5
    if mask is None:
        return per_frame.mean()
    mask = np.asarray(mask, dtype=bool).reshape(per_frame.shape)
    count = mask.sum()
    if count == 0:
        raise ValueError("kl_term mask selects no frame")
    return (per_frame * mask.astype(per_frame.dtype)).sum() * (1.0 / count)


def vae_loss(model, h, y, weights, rng, mask=None):
    """
    Weighted sum of feature reconstruction error, unit negative
    log-likelihood and KL term. Return ``(total, components)`` where
    *components* maps ``recon``, ``nll``, ``kl`` and ``total`` to floats.
    Padded frames (outside *mask*) are excluded from all terms.
    """
    h = as_tensor(h)
    y = np.asarray(y, dtype=np.int64)
    if h.shape[:-1] != y.shape:
        raise ShapeError("Features %s and units %s differ in length"
                         % (h.shape, y.shape))
    mu, logvar = model.encode(h, mask)
    z = sample_latent(mu, logvar, rng)
    h_hat = model.decode(z, mask)
    logits = model.lm_logits(h_hat)
    recon = ops.mse(h_hat, h, mask=mask)
    nll = ops.cross_entropy(logits, y, mask=mask)
    kl = kl_term(mu, logvar, mask=mask)
    total = recon * weights.recon + nll * weights.nll + kl * weights.kl
    components = collections.OrderedDict([
        ('recon', recon.item()), ('nll', nll.item()), ('kl', kl.item()),
        ('total', total.item())])
    return total, components


def train_vae(model, utterances, section, seed, path=None, log_interval=100,
              steps=None):
    """
    Train *model* on target features and units of *utterances* for
    ``section.steps`` (or *steps*) updates. Return :class:`TrainingLog`.
    """
    steps = section.steps if steps is None else steps
    weights = VaeLossWeights(section.recon_weight, section.nll_weight,
                             section.kl_weight)
    optimizer = build_optimizer(model, section)
    batches = iterate_batches(utterances, section.batch_size,
                              make_rng(seed, 'vae', 'batches'))
    latent_rng = make_rng(seed, 'vae', 'latent')
    model.train()
    log = TrainingLog(LOSS_FIELDS, path=path, log_interval=log_interval,
                      logger=logger)
    with log:
        for step in range(1, steps + 1):
            batch = next(batches)
            h, mask = pad_sequences([u.target_features for u in batch],
                                    dtype=np.float32)
            y, _ = pad_sequences([u.target_units for u in batch],
                                 dtype=np.int64)
            lr = optimizer.current_lr()
            total, components = vae_loss(model, h, y, weights, latent_rng,
                                         mask=mask)
            total.backward()
            norm = optimizer.step()
            log.append(step, components, lr, norm)
    model.eval()
    logger.info("VAE training finished after %d steps, final loss %.5f",
                steps, log.rows[-1]['total'] if log.rows else float('nan'))
    return log


def reconstruction_accuracy(model, utterances, batch_size=32):
    """
    Fraction of frames whose round-trip unit equals the stored unit.
    """
    correct = 0
    total = 0
    for start in range(0, len(utterances), batch_size):
        batch = utterances[start:start + batch_size]
        h, mask = pad_sequences([u.target_features for u in batch],
                                dtype=np.float32)
        _, units = model.reconstruct(h, mask)
        for i, utterance in enumerate(batch):
            length = len(utterance.target_units)
            correct += int(np.sum(units[i, :length] == utterance.target_units))
            total += length
    return correct / float(total)
