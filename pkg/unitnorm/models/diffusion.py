"""
Module :module:`unitnorm.models.diffusion` implements the latent
denoising diffusion model: noise estimation network, forward noising,
multitask training and the deterministic DDIM recursion which turns
partially noised latents back into normalized units.
"""

import collections
import logging
import math

import numpy as np

from unitnorm.core.exceptions import ShapeError
from unitnorm.models.layers import (
    WaveNetStack, add_positions, as_batch, frame_weights, unbatch)
from unitnorm.models.training import (
    TrainingLog, build_optimizer, iterate_batches, pad_sequences)
from unitnorm.models.vae import sample_latent
from unitnorm.tensor import ops
from unitnorm.tensor.nn import (
    Conv1d, Linear, Module, Parameter, TransformerEncoder)
from unitnorm.tensor.tensor import Tensor, as_tensor, no_grad
from unitnorm.utils.seeding import make_rng

__all__ = [
    'DiffusionModel', 'DiffusionLossWeights', 'TimeEmbedding',
    'forward_diffuse', 'predict_z0', 'diffusion_loss', 'train_diffusion',
    'ddim_timesteps', 'ddim_normalize', 'NormalizationResult', 'LOSS_FIELDS',
]

logger = logging.getLogger(__name__)

LOSS_FIELDS = ('noise', 'recon', 'nll', 'total')

DiffusionLossWeights = collections.namedtuple(
    'DiffusionLossWeights', ['noise', 'recon', 'nll'])
DiffusionLossWeights.__new__.__defaults__ = (1.0, 0.25, 0.005)

NormalizationResult = collections.namedtuple(
    'NormalizationResult', ['units', 'features', 'latent'])


class TimeEmbedding(Module):
    """
    Sinusoidal embedding of the timestep with learnable frequencies,
    followed by a two-layer perceptron.
    """

    def __init__(self, dim, rng):
        super(TimeEmbedding, self).__init__()
        if dim % 2:
            raise ValueError("Time embedding dimension must be even, got %d"
                             % dim)
        half = dim // 2
        self.frequencies = Parameter(
            np.exp(-math.log(10000.0) * np.arange(half) / max(half - 1, 1)))
        self.hidden = Linear(dim, dim, rng)
        self.output = Linear(dim, dim, rng)

    def forward(self, t):
        t = Tensor(np.asarray(t, dtype=np.float64).reshape(-1, 1),
                   dtype=self.frequencies.dtype)
        angles = t * self.frequencies
        embedding = ops.concat([ops.sin(angles), ops.cos(angles)], axis=-1)
        return self.output(ops.gelu(self.hidden(embedding)))


class DiffusionModel(Module):
    """
    Noise estimation network: convolutional input projection,
    time-conditioned gated residual blocks, transformer trunk and affine
    output projection back to the latent dimension.
    """

    kind = 'diffusion'

    def __init__(self, latent_dim, model_dim=128, stacks=2, layers=3,
                 kernel_size=3, heads=4, transformer_layers=3, ffn_dim=256,
                 dropout=0.1, timesteps=200, seed=0):
        super(DiffusionModel, self).__init__()
        self.options = dict(
            latent_dim=latent_dim, model_dim=model_dim, stacks=stacks,
            layers=layers, kernel_size=kernel_size, heads=heads,
            transformer_layers=transformer_layers, ffn_dim=ffn_dim,
            dropout=dropout, timesteps=timesteps, seed=seed)
        self.latent_dim = latent_dim
        self.timesteps = timesteps
        rng = make_rng(seed, self.kind)
        self.input = Conv1d(latent_dim, model_dim, kernel_size, rng)
        self.time = TimeEmbedding(model_dim, rng)
        self.blocks = WaveNetStack(model_dim, model_dim, model_dim, stacks,
                                   layers, kernel_size, rng,
                                   condition_dim=model_dim)
        self.trunk = TransformerEncoder(transformer_layers, model_dim, heads,
                                        ffn_dim, rng, dropout=dropout)
        self.output = Linear(model_dim, latent_dim, rng)

    @classmethod
    def from_config(cls, section, vae_section, schedule_section, seed):
        return cls(
            vae_section.latent_dim, model_dim=section.model_dim,
            stacks=section.stacks, layers=section.layers,
            kernel_size=section.kernel_size, heads=section.heads,
            transformer_layers=section.transformer_layers,
            ffn_dim=section.ffn_dim, dropout=section.dropout,
            timesteps=schedule_section.timesteps, seed=seed)

    def forward(self, z_t, t, mask=None):
        """
        Estimate noise contained in latents *z_t* at timestep *t* (one
        integer or one per sequence).
        """
        z, mask, batched = as_batch(z_t, self.latent_dim, 'latents', mask)
        t = np.asarray(t, dtype=np.int64)
        if np.any(t < 0) or np.any(t > self.timesteps):
            raise ValueError("Timestep %s out of range [0, %d]"
                             % (t.tolist(), self.timesteps))
        t = np.broadcast_to(t, (z.shape[0],))
        weights = frame_weights(mask, z.dtype)
        x = self.input(z * weights) * weights
        x = x + self.blocks(x, weights, condition=self.time(t))
        x = self.trunk(add_positions(x), mask=mask)
        return unbatch(self.output(x) * weights, batched)


def _coefficients(schedule, t, ndim, lowest):
    t = schedule.check_timestep(t, lowest=lowest)
    signal, sigma = schedule.coefficients(t)
    if np.ndim(signal):
        shape = (-1,) + (1,) * (ndim - 1)
        signal, sigma = signal.reshape(shape), sigma.reshape(shape)
    return signal, sigma


def forward_diffuse(schedule, z0, t, noise):
    """
    Noised latents ``sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) *
    noise`` for ``1 <= t <= T``; *t* is one integer or one per sequence.
    Works on arrays and on tensors.
    """
    if np.shape(z0) != np.shape(noise):
        raise ShapeError("Latents %s and noise %s differ in shape"
                         % (np.shape(z0), np.shape(noise)))
    signal, sigma = _coefficients(schedule, t, len(np.shape(z0)), 1)
    if isinstance(z0, Tensor) or isinstance(noise, Tensor):
        return as_tensor(z0) * signal + as_tensor(noise) * sigma
    return signal * np.asarray(z0) + sigma * np.asarray(noise)


def predict_z0(schedule, z_t, t, noise, clip=None):
    """
    Invert :func:`forward_diffuse` with estimated *noise*. With *clip*
    the estimate is clamped to ``[-clip, clip]``, which guards against
    tiny ``alpha_bar`` close to ``T``.
    """
    if np.shape(z_t) != np.shape(noise):
        raise ShapeError("Latents %s and noise %s differ in shape"
                         % (np.shape(z_t), np.shape(noise)))
    signal, sigma = _coefficients(schedule, t, len(np.shape(z_t)), 1)
    if isinstance(z_t, Tensor) or isinstance(noise, Tensor):
        z0 = (as_tensor(z_t) - as_tensor(noise) * sigma) * (1.0 / signal)
        return ops.clamp(z0, -clip, clip) if clip else z0
    z0 = (np.asarray(z_t) - sigma * np.asarray(noise)) / signal
    return np.clip(z0, -clip, clip) if clip else z0


def diffusion_loss(model, vae, schedule, h, y, weights, rng, mask=None,
                   clip_latent=None, timesteps=None, noise=None):
    """
    Multitask objective: mean squared noise estimation error plus
    reconstruction and unit likelihood of the latent estimate decoded by
    the frozen *vae*. One timestep is sampled per sequence unless
    *timesteps* is given; *noise* overrides the sampled noise. Return
    ``(total, components)``.
    """
    h = as_tensor(h)
    y = np.asarray(y, dtype=np.int64)
    if h.shape[:-1] != y.shape:
        raise ShapeError("Features %s and units %s differ in length"
                         % (h.shape, y.shape))
    with no_grad():
        mu, logvar = vae.encode(h, mask)
        z0 = sample_latent(mu, logvar, rng).data
    batch = z0.shape[0] if z0.ndim == 3 else 1
    if timesteps is None:
        timesteps = rng.integers(1, schedule.timesteps + 1, size=batch)
    if z0.ndim == 2:
        timesteps = np.asarray(timesteps).reshape(-1)[0]
    if noise is None:
        noise = rng.standard_normal(z0.shape)
    noise = np.asarray(noise, dtype=z0.dtype)
    z_t = forward_diffuse(schedule, z0, timesteps, noise).astype(z0.dtype)
    noise_hat = model(z_t, timesteps, mask)
    noise_loss = ops.mse(noise_hat, noise, mask=mask)
    z0_hat = predict_z0(schedule, Tensor(z_t, dtype=z0.dtype), timesteps,
                        noise_hat, clip=clip_latent)
    h_hat = vae.decode(z0_hat, mask)
    recon = ops.mse(h_hat, h, mask=mask)
    nll = ops.cross_entropy(vae.lm_logits(h_hat), y, mask=mask)
    total = noise_loss * weights.noise + recon * weights.recon + \
        nll * weights.nll
    components = collections.OrderedDict([
        ('noise', noise_loss.item()), ('recon', recon.item()),
        ('nll', nll.item()), ('total', total.item())])
    return total, components


def train_diffusion(model, vae, schedule, utterances, section, seed,
                    path=None, log_interval=100, steps=None):
    """
    Train *model* with frozen *vae* on target features and units of
    *utterances*. Return :class:`TrainingLog`.
    """
    steps = section.steps if steps is None else steps
    weights = DiffusionLossWeights(section.noise_weight, section.recon_weight,
                                   section.nll_weight)
    vae.eval()
    vae.freeze()
    optimizer = build_optimizer(model, section)
    batches = iterate_batches(utterances, section.batch_size,
                              make_rng(seed, 'diffusion', 'batches'))
    noise_rng = make_rng(seed, 'diffusion', 'noise')
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
            total, components = diffusion_loss(
                model, vae, schedule, h, y, weights, noise_rng, mask=mask,
                clip_latent=section.clip_latent)
            total.backward()
            norm = optimizer.step()
            log.append(step, components, lr, norm)
    model.eval()
    logger.info("Diffusion training finished after %d steps, final loss "
                "%.5f", steps,
                log.rows[-1]['total'] if log.rows else float('nan'))
    return log


def ddim_timesteps(t_start, step_size=1):
    """
    Pairs ``(t, t_prev)`` visited by the DDIM recursion from *t_start*
    down to zero with stride *step_size*.
    """
    if step_size < 1:
        raise ValueError("DDIM step size must be >= 1, got %r" % step_size)
    pairs = []
    t = int(t_start)
    while t > 0:
        pairs.append((t, max(t - step_size, 0)))
        t -= step_size
    return pairs


def ddim_normalize(vae, model, schedule, h, t_start, step_size=1, rng=None,
                   noise=None, clip_latent=None, mask=None):
    """
    Encode features *h* to the posterior mean, inject noise at
    *t_start*, run the deterministic DDIM recursion down to zero and
    decode. Noise is either given as *noise* (same shape as the latents)
    or drawn from *rng*. Return :class:`NormalizationResult` of arrays.
    """
    schedule.check_timestep(t_start)
    with no_grad():
        mu, _ = vae.encode(h, mask)
        z0 = mu.data
        if noise is None:
            if rng is None:
                raise ValueError("Either noise or random generator is needed")
            noise = rng.standard_normal(z0.shape)
        noise = np.asarray(noise, dtype=z0.dtype)
        if noise.shape != z0.shape:
            raise ShapeError("Noise %s does not match latents %s"
                             % (noise.shape, z0.shape))
        signal, sigma = schedule.coefficients(t_start)
        z = (signal * z0 + sigma * noise).astype(z0.dtype)
        for t, t_prev in ddim_timesteps(t_start, step_size):
            noise_hat = model(z, t, mask).data
            z0_hat = predict_z0(schedule, z, t, noise_hat, clip=clip_latent)
            signal_prev, sigma_prev = schedule.coefficients(t_prev)
            z = (signal_prev * z0_hat + sigma_prev * noise_hat).astype(
                z0.dtype)
        features = vae.decode(z, mask)
        logits = vae.lm_logits(features)
    return NormalizationResult(np.argmax(logits.data, axis=-1),
                               features.data, z)
