"""
Module :module:`unitnorm.models.schedule` precomputes the forward
noising schedule of the diffusion model.
"""

import math

import numpy as np

__all__ = [
    'NoiseSchedule', 'build_cosine_schedule', 'build_linear_schedule',
    'build_schedule',
]

DEFAULT_TIMESTEPS = 200
DEFAULT_OFFSET = 0.008
DEFAULT_MAX_BETA = 0.999


class NoiseSchedule(object):
    """
    Arrays indexed by timestep ``0 .. timesteps``. Index 0 holds
    ``alpha_bar = 1`` (``beta = 0``), so that ``alpha_bar[t - 1]`` is
    defined for ``t = 1``. Instances are immutable.
    """

    def __init__(self, betas, kind='cosine'):
        betas = np.asarray(betas, dtype=np.float64)
        if betas.ndim != 1 or len(betas) < 1:
            raise ValueError("Schedule needs at least one beta")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise ValueError("Betas must lie in (0, 1)")
        self.kind = kind
        self.timesteps = len(betas)
        self.betas = np.concatenate([[0.0], betas])
        self.alphas = 1.0 - self.betas
        self.alpha_bars = np.cumprod(self.alphas)
        for name in ('betas', 'alphas', 'alpha_bars'):
            getattr(self, name).setflags(write=False)

    def __repr__(self):
        return "<{}.{}: {} timesteps={}>".format(
            self.__class__.__module__, self.__class__.__name__, self.kind,
            self.timesteps)

    def check_timestep(self, t, lowest=0):
        t = np.asarray(t)
        if np.any(t < lowest) or np.any(t > self.timesteps):
            raise ValueError("Timestep %s out of range [%d, %d]"
                             % (t.tolist(), lowest, self.timesteps))
        return t.astype(np.int64)

    def coefficients(self, t):
        """
        Return ``(sqrt(alpha_bar_t), sqrt(1 - alpha_bar_t))``; *t* is an
        integer or integer array.
        """
        t = self.check_timestep(t)
        alpha_bar = self.alpha_bars[t]
        return np.sqrt(alpha_bar), np.sqrt(1.0 - alpha_bar)

    def rows(self):
        """
        Yield dump rows ``t, beta, alpha, alpha_bar, sqrt(alpha_bar),
        sqrt(1 - alpha_bar)`` for ``t = 0 .. timesteps``.
        """
        for t in range(self.timesteps + 1):
            alpha_bar = self.alpha_bars[t]
            yield (t, self.betas[t], self.alphas[t], alpha_bar,
                   math.sqrt(alpha_bar), math.sqrt(1.0 - alpha_bar))


def build_cosine_schedule(timesteps=DEFAULT_TIMESTEPS, offset=DEFAULT_OFFSET,
                          max_beta=DEFAULT_MAX_BETA):
    """
    Cosine schedule: ``f(t) = cos^2((t / T + s) / (1 + s) * pi / 2)``,
    ``alpha_bar_t = f(t) / f(0)``, ``beta_t = 1 - alpha_bar_t /
    alpha_bar_{t-1}`` clipped to *max_beta*.
    """
    if int(timesteps) != timesteps or timesteps < 1:
        raise ValueError("Number of timesteps must be integer >= 1, got %r"
                         % timesteps)
    if offset <= 0:
        raise ValueError("Schedule offset must be > 0, got %r" % offset)
    if not 0 < max_beta < 1:
        raise ValueError("Maximal beta must be in (0, 1), got %r" % max_beta)
    steps = np.arange(timesteps + 1, dtype=np.float64)
    phase = (steps / timesteps + offset) / (1.0 + offset) * math.pi / 2
    f = np.cos(phase) ** 2
    alpha_bars = f / f[0]
    betas = 1.0 - alpha_bars[1:] / alpha_bars[:-1]
    return NoiseSchedule(np.clip(betas, None, max_beta), kind='cosine')


def build_linear_schedule(timesteps=DEFAULT_TIMESTEPS, beta_start=1e-4,
                          beta_end=0.02):
    """
    Linearly spaced betas, scaled so that the total noise matches the
    1000-step reference schedule.
    """
    if int(timesteps) != timesteps or timesteps < 1:
        raise ValueError("Number of timesteps must be integer >= 1, got %r"
                         % timesteps)
    scale = 1000.0 / timesteps
    return NoiseSchedule(np.linspace(scale * beta_start,
                                     min(scale * beta_end, 0.999),
                                     int(timesteps)), kind='linear')


def build_schedule(section):
    """
    Build schedule configured in ``[schedule]`` config *section*.
    """
    if section.kind == 'cosine':
        return build_cosine_schedule(section.timesteps, section.offset,
                                     section.max_beta)
    if section.kind == 'linear':
        return build_linear_schedule(section.timesteps)
    raise ValueError("Unknown schedule kind '%s'" % section.kind)
