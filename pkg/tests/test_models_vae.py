
import numpy as np
import pytest

from unitnorm.core.config import make_section
from unitnorm.core.exceptions import ShapeError
from unitnorm.corpus.kmeans import train_kmeans
from unitnorm.corpus.synth import assign_units, generate_corpus
from unitnorm.models.training import ema
from unitnorm.models.vae import (
    VaeLossWeights, VaeModel, kl_term, reconstruction_accuracy,
    sample_latent, train_vae, vae_loss)
from unitnorm.tensor.tensor import Tensor, precision

from tests.test_corpus_synth import make_options


def tiny_vae(feature_dim=64, units=16, latent_dim=16, seed=0, **kwargs):
    options = dict(channels=16, stacks=1, layers=2, model_dim=32, heads=2,
                   refiner_layers=1, ffn_dim=32, dropout=0.0)
    options.update(kwargs)
    return VaeModel(feature_dim, units, latent_dim=latent_dim, seed=seed,
                    **options)


def test_default_loss_weights():
    assert VaeLossWeights() == (100.0, 1.0, 0.001)


def test_encode_decode_shapes():
    model = tiny_vae().eval()
    h = np.random.default_rng(0).normal(size=(7, 64))
    mu, logvar = model.encode(h)
    assert mu.shape == (7, 16)
    assert logvar.shape == (7, 16)
    again, _ = model.encode(h)
    assert np.array_equal(mu.data, again.data)
    assert np.all(logvar.data >= -12.0) and np.all(logvar.data <= 6.0)
    h_hat = model.decode(mu)
    assert h_hat.shape == (7, 64)
    assert model.lm_logits(h_hat).shape == (7, 16)


def test_wrong_dimensions():
    model = tiny_vae()
    with pytest.raises(ShapeError):
        model.encode(np.zeros((7, 63)))
    with pytest.raises(ShapeError):
        model.decode(np.zeros((7, 15)))
    with pytest.raises(ShapeError):
        model.encode(np.zeros((0, 64)))


def test_padding_does_not_change_valid_frames():
    model = tiny_vae().eval()
    rng = np.random.default_rng(1)
    h = rng.normal(size=(5, 64))
    alone, _ = model.encode(h)
    batch = np.zeros((2, 8, 64))
    batch[0, :5] = h
    batch[1] = rng.normal(size=(8, 64))
    mask = np.array([[True] * 5 + [False] * 3, [True] * 8])
    batched, _ = model.encode(batch, mask)
    assert np.allclose(batched.data[0, :5], alone.data, atol=1e-5)
    assert np.all(batched.data[0, 5:] == 0)


def test_sample_latent():
    mu = np.ones((3, 4))
    logvar = np.full((3, 4), -12.0)
    z = sample_latent(mu, logvar, 0)
    assert np.allclose(z.data, mu, atol=1e-2)
    assert np.array_equal(sample_latent(mu, np.zeros((3, 4)), 5).data,
                          sample_latent(mu, np.zeros((3, 4)), 5).data)
    with pytest.raises(ShapeError):
        sample_latent(mu, np.zeros((3, 5)), 0)


def test_sample_latent_moments():
    n = 100000
    z = sample_latent(np.ones(n), np.full(n, np.log(4.0)),
                      np.random.default_rng(2)).data.astype(np.float64)
    assert abs(z.mean() - 1.0) < 3 * 2.0 / np.sqrt(n)
    assert abs(z.var() - 4.0) < 3 * 4.0 * np.sqrt(2.0 / n)


def test_sample_latent_gradient_reaches_both_inputs():
    mu = Tensor(np.zeros(4), requires_grad=True)
    logvar = Tensor(np.zeros(4), requires_grad=True)
    sample_latent(mu, logvar, 0).sum().backward()
    assert np.allclose(mu.grad, 1.0)
    assert np.any(logvar.grad != 0)


def test_kl_term_closed_form():
    assert kl_term(np.zeros((3, 5)), np.zeros((3, 5))).item() == 0.0
    assert kl_term(np.ones((1, 1)), np.zeros((1, 1))).item() == \
        pytest.approx(0.5)
    assert kl_term(np.ones((2, 4)), np.zeros((2, 4))).item() == \
        pytest.approx(2.0)


def test_kl_term_matches_loop():
    rng = np.random.default_rng(3)
    mu = rng.normal(size=(6, 4))
    logvar = rng.uniform(-2.0, 2.0, size=(6, 4))
    expected = 0.0
    for i in range(6):
        for j in range(4):
            expected += -0.5 * (1.0 + logvar[i, j] - mu[i, j] ** 2 -
                                np.exp(logvar[i, j]))
    expected /= 6
    with precision(np.float64):
        value = kl_term(mu, logvar).item()
    assert value == pytest.approx(expected, abs=1e-5)
    assert value >= 0


def test_kl_term_mask():
    mu = np.zeros((1, 3, 2))
    mu[0, 2] = 5.0
    mask = np.array([[True, True, False]])
    assert kl_term(mu, np.zeros((1, 3, 2)), mask=mask).item() == 0.0
    with pytest.raises(ValueError):
        kl_term(mu, np.zeros((1, 3, 2)), mask=np.zeros((1, 3), dtype=bool))


def test_vae_loss_components():
    model = tiny_vae().eval()
    rng = np.random.default_rng(4)
    h = rng.normal(size=(6, 64))
    y = rng.integers(0, 16, size=6)
    weights = VaeLossWeights(3.0, 2.0, 0.5)
    total, parts = vae_loss(model, h, y, weights, np.random.default_rng(0))
    assert list(parts) == ['recon', 'nll', 'kl', 'total']
    combined = 3.0 * parts['recon'] + 2.0 * parts['nll'] + 0.5 * parts['kl']
    assert total.item() == pytest.approx(combined, rel=1e-5)
    zero, _ = vae_loss(model, h, y, VaeLossWeights(0.0, 0.0, 0.0), 0)
    assert zero.item() == 0.0


def test_vae_loss_recon_only_is_composition():
    model = tiny_vae().eval()
    rng = np.random.default_rng(5)
    h = rng.normal(size=(6, 64)).astype(np.float32)
    y = rng.integers(0, 16, size=6)
    total, _ = vae_loss(model, h, y, VaeLossWeights(1.0, 0.0, 0.0), 11)
    mu, logvar = model.encode(h)
    h_hat = model.decode(sample_latent(mu, logvar, 11)).data
    assert total.item() == pytest.approx(float(np.mean((h_hat - h) ** 2)),
                                         rel=1e-5)


def test_vae_loss_length_mismatch():
    with pytest.raises(ShapeError):
        vae_loss(tiny_vae(), np.zeros((6, 64)), np.zeros(5, dtype=int),
                 VaeLossWeights(), 0)


def unit_corpus(**kwargs):
    utterances = generate_corpus(make_options(**kwargs))
    frames = np.concatenate([u.target_features for u in utterances])
    return assign_units(utterances, train_kmeans(frames, 16, seed=0))


def test_train_vae_logs_every_step(tmpdir):
    utterances = unit_corpus(utterances=8)
    section = make_section('vae', batch_size=4, warmup_steps=2)
    path = str(tmpdir.join('vae.csv'))
    log = train_vae(tiny_vae(), utterances, section, seed=1, path=path,
                    steps=3)
    assert log.column('step') == [1, 2, 3]
    assert all(np.isfinite(log.column('total')))
    assert tmpdir.join('vae.csv').read().startswith(
        'step,recon,nll,kl,total,lr,grad_norm')


@pytest.mark.slow
def test_training_reduces_loss_and_reconstructs_units():
    utterances = unit_corpus(utterances=120, speaker_sigma=0.0,
                             frame_sigma=0.0)
    section = make_section('vae', batch_size=8, steps=600, warmup_steps=50,
                           lr=1e-3)
    model = tiny_vae()
    log = train_vae(model, utterances[:100], section, seed=0)
    smoothed = ema(log.column('total'))
    assert smoothed[-1] < smoothed[99]
    assert reconstruction_accuracy(model, utterances[100:]) > 0.9
