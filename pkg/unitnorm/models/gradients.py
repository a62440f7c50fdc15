"""
Module :module:`unitnorm.models.gradients` builds tiny 64-bit instances
of the three trained models together with deterministic closures of
their losses, for finite-difference gradient checks of whole models.
"""

import numpy as np

from unitnorm.models.cmlm import S2utModel, cmlm_loss
from unitnorm.models.diffusion import (
    DiffusionLossWeights, DiffusionModel, diffusion_loss)
from unitnorm.models.schedule import build_cosine_schedule
from unitnorm.models.vae import VaeLossWeights, VaeModel, vae_loss
from unitnorm.tensor.gradcheck import check_parameters
from unitnorm.tensor.tensor import precision

__all__ = ['model_cases', 'run_model_cases']

FEATURE_DIM = 6
SOURCE_DIM = 5
UNITS = 6
LATENT_DIM = 3


def _features(rng, lengths, dim):
    batch = np.zeros((len(lengths), max(lengths), dim))
    mask = np.zeros(batch.shape[:2], dtype=bool)
    for i, length in enumerate(lengths):
        batch[i, :length] = rng.normal(size=(length, dim))
        mask[i, :length] = True
    return batch, mask


def _tiny_vae(seed):
    return VaeModel(FEATURE_DIM, UNITS, latent_dim=LATENT_DIM, channels=4,
                    stacks=1, layers=2, model_dim=8, heads=2,
                    refiner_layers=1, ffn_dim=8, dropout=0.0, seed=seed)


def model_cases(seed):
    """
    Return list of ``(name, loss_fn, params)`` for the VAE loss, the
    multitask diffusion loss and the CMLM loss. Models are in evaluation
    mode (no dropout) and cast to 64 bits; every loss call draws its
    random numbers from a freshly seeded generator.
    """
    rng = np.random.default_rng(seed)
    h, mask = _features(rng, [5, 3], FEATURE_DIM)
    y = rng.integers(0, UNITS, size=mask.shape) * mask
    cases = []

    with precision(np.float64):
        vae = _tiny_vae(seed).astype(np.float64).eval()
        cases.append(('vae_loss', lambda: vae_loss(
            vae, h, y, VaeLossWeights(), np.random.default_rng(seed),
            mask=mask)[0], vae.parameters()))

        frozen = _tiny_vae(seed + 1).astype(np.float64).eval().freeze()
        diffusion = DiffusionModel(
            LATENT_DIM, model_dim=8, stacks=1, layers=2, heads=2,
            transformer_layers=1, ffn_dim=8, dropout=0.0, timesteps=20,
            seed=seed).astype(np.float64).eval()
        schedule = build_cosine_schedule(20)
        timesteps = np.array([2, 5])
        noise = rng.standard_normal(h.shape[:2] + (LATENT_DIM,))
        cases.append(('diffusion_loss', lambda: diffusion_loss(
            diffusion, frozen, schedule, h, y, DiffusionLossWeights(),
            np.random.default_rng(seed), mask=mask, timesteps=timesteps,
            noise=noise)[0], diffusion.parameters()))

        cmlm = S2utModel(SOURCE_DIM, UNITS, model_dim=8, heads=2,
                         encoder_layers=1, decoder_layers=1, ffn_dim=8,
                         dropout=0.0, length_bucket=2, max_length=16,
                         seed=seed).astype(np.float64).eval()
        sources = [rng.normal(size=(9, SOURCE_DIM)),
                   rng.normal(size=(6, SOURCE_DIM))]
        targets = [rng.integers(0, UNITS, size=5),
                   rng.integers(0, UNITS, size=4)]
        cases.append(('cmlm_loss', lambda: cmlm_loss(
            cmlm, sources, targets, np.random.default_rng(seed),
            np.random.default_rng(seed + 1), cg_dropout=0.5,
            label_smoothing=0.1)[0], cmlm.parameters()))
    return cases


def run_model_cases(seed, max_elements=3, tolerance=1e-3):
    """
    Check every model loss of :func:`model_cases`, perturbing at most
    *max_elements* entries of each parameter.
    """
    rng = np.random.default_rng(seed)
    return [check_parameters(fn, params, name=name, tolerance=tolerance,
                             max_elements=max_elements, rng=rng)
            for name, fn, params in model_cases(seed)]
