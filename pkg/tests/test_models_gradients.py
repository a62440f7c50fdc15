import numpy as np
import pytest

from unitnorm.models.gradients import model_cases, run_model_cases
from unitnorm.tensor.tensor import precision


def test_model_cases_cover_every_trained_loss():
    cases = model_cases(0)
    assert [name for name, _, _ in cases] == [
        'vae_loss', 'diffusion_loss', 'cmlm_loss']
    for _, fn, params in cases:
        params = list(params)
        assert params
        assert all(p.data.dtype == np.float64 for p in params)


def test_model_losses_are_deterministic():
    with precision(np.float64):
        for name, fn, _ in model_cases(1):
            assert fn().item() == fn().item(), name


@pytest.mark.parametrize('seed', [0, 1, 2])
def test_model_gradients_match_finite_differences(seed):
    results = run_model_cases(seed, max_elements=2)
    assert [r.name for r in results] == [
        'vae_loss', 'diffusion_loss', 'cmlm_loss']
    for result in results:
        assert result.checked > 0
        assert result.ok, result
