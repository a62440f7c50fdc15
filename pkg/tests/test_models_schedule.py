
import numpy as np
import pytest

from unitnorm.core.config import make_section
from unitnorm.models.schedule import (
    NoiseSchedule, build_cosine_schedule, build_linear_schedule,
    build_schedule)


@pytest.mark.parametrize('t, beta, signal, sigma', [
    (50, 0.007, 0.917, 0.398),
    (100, 0.016, 0.697, 0.717),
    (120, 0.022, 0.577, 0.816),
    (150, 0.038, 0.373, 0.928),
])
def test_cosine_schedule_reference_rows(t, beta, signal, sigma):
    schedule = build_cosine_schedule(200, 0.008)
    assert schedule.betas[t] == pytest.approx(beta, abs=0.005)
    got_signal, got_sigma = schedule.coefficients(t)
    assert got_signal == pytest.approx(signal, abs=0.02)
    assert got_sigma == pytest.approx(sigma, abs=0.02)


def test_alpha_bar_is_running_product():
    schedule = build_cosine_schedule()
    assert schedule.alpha_bars[0] == 1.0
    assert np.allclose(np.cumprod(1.0 - schedule.betas), schedule.alpha_bars,
                       atol=1e-6)
    assert np.all(np.diff(schedule.alpha_bars) < 0)
    assert np.all(schedule.betas[1:] > 0)
    assert np.all(schedule.betas <= 0.999)


def test_coefficients():
    schedule = build_cosine_schedule()
    assert schedule.coefficients(0) == (1.0, 0.0)
    signal, sigma = schedule.coefficients(np.arange(201))
    assert np.allclose(signal ** 2 + sigma ** 2, 1.0, atol=1e-6)
    assert np.all((signal >= 0) & (signal <= 1))
    with pytest.raises(ValueError):
        schedule.coefficients(201)
    with pytest.raises(ValueError):
        schedule.coefficients(-1)


def test_schedule_is_read_only():
    schedule = build_cosine_schedule(10)
    with pytest.raises(ValueError):
        schedule.betas[1] = 0.5


@pytest.mark.parametrize('kwargs', [
    {'timesteps': 0}, {'timesteps': 2.5}, {'offset': 0.0},
    {'max_beta': 1.0},
])
def test_invalid_cosine_parameters(kwargs):
    with pytest.raises(ValueError):
        build_cosine_schedule(**kwargs)


def test_invalid_betas():
    with pytest.raises(ValueError):
        NoiseSchedule([0.1, 0.0])
    with pytest.raises(ValueError):
        NoiseSchedule([])


def test_rows():
    rows = list(build_cosine_schedule(4).rows())
    assert len(rows) == 5
    assert rows[0][:4] == (0, 0.0, 1.0, 1.0)
    for t, beta, alpha, alpha_bar, signal, sigma in rows:
        assert alpha == pytest.approx(1.0 - beta)
        assert signal == pytest.approx(np.sqrt(alpha_bar))


def test_build_schedule_from_config():
    schedule = build_schedule(make_section('schedule', timesteps=50))
    assert schedule.kind == 'cosine'
    assert schedule.timesteps == 50
    linear = build_schedule(make_section('schedule', kind='linear'))
    assert linear.kind == 'linear'
    assert np.all(np.diff(linear.betas[1:]) > 0)
    assert isinstance(build_linear_schedule(10), NoiseSchedule)
