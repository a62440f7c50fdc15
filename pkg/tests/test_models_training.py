
import csv
import os

import numpy as np
import pytest

from unitnorm.core.config import make_section
from unitnorm.core.exceptions import CheckpointError
from unitnorm.models.training import (
    TrainingLog, build_optimizer, ema, iterate_batches, lengths_mask,
    load_model, pad_sequences, save_model)
from unitnorm.models.vae import VaeModel
from unitnorm.models.diffusion import DiffusionModel


def tiny_vae(seed=0):
    return VaeModel(6, 5, latent_dim=3, channels=4, stacks=1, layers=1,
                    model_dim=8, heads=2, refiner_layers=1, ffn_dim=8,
                    seed=seed)


def test_pad_sequences():
    padded, mask = pad_sequences([np.ones((2, 3)), np.ones((4, 3))],
                                 fill=-1, dtype=np.float32)
    assert padded.shape == (2, 4, 3)
    assert padded.dtype == np.float32
    assert np.all(padded[0, 2:] == -1)
    assert mask.tolist() == [[True, True, False, False], [True] * 4]
    with pytest.raises(ValueError):
        pad_sequences([])


def test_lengths_mask():
    assert lengths_mask([1, 3]).tolist() == [[True, False, False],
                                             [True, True, True]]
    assert lengths_mask([1], max_length=2).tolist() == [[True, False]]


def test_iterate_batches_visits_every_item_per_epoch():
    items = list(range(10))
    batches = iterate_batches(items, 4, np.random.default_rng(0))
    epoch = [next(batches) for _ in range(3)]
    assert [len(b) for b in epoch] == [4, 4, 2]
    assert sorted(sum(epoch, [])) == items
    with pytest.raises(ValueError):
        next(iterate_batches([], 4, np.random.default_rng(0)))
    with pytest.raises(ValueError):
        next(iterate_batches(items, 0, np.random.default_rng(0)))


def test_ema():
    assert ema([]) == []
    assert ema([2.0, 2.0, 2.0]) == pytest.approx([2.0, 2.0, 2.0])
    smoothed = ema([0.0] + [1.0] * 50, window=9)
    assert smoothed[0] == 0.0
    assert smoothed[1] == pytest.approx(0.2)
    assert all(a <= b for a, b in zip(smoothed, smoothed[1:]))


def test_build_optimizer_skips_frozen_parameters():
    model = tiny_vae()
    model.lm_head.freeze()
    optimizer = build_optimizer(model, make_section('vae', warmup_steps=10))
    assert len(optimizer.params) == len(model.parameters()) - 2
    assert optimizer.clip_norm == 2.0
    assert optimizer.current_lr() == pytest.approx(5e-4 / 10)


def test_training_log_writes_csv(tmpdir):
    path = os.path.join(str(tmpdir), 'log.csv')
    with TrainingLog(('loss',), path=path, log_interval=1) as log:
        log.append(1, {'loss': 0.5}, 1e-4, 2.0)
        log.append(2, {'loss': 0.25}, 2e-4, 1.0)
    assert log.column('loss') == [0.5, 0.25]
    with open(path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['step', 'loss', 'lr', 'grad_norm']
    assert rows[2] == ['2', '0.25', '0.0002', '1']


def test_save_and_load_model(tmpdir):
    path = os.path.join(str(tmpdir), 'vae.ckpt')
    model = tiny_vae(seed=4)
    save_model(path, model, fingerprint='abc')
    loaded, checkpoint = load_model(path, VaeModel)
    assert checkpoint.fingerprint == 'abc'
    assert loaded.options == model.options
    assert not loaded.training
    for (name, a), (_, b) in zip(model.named_parameters(),
                                 loaded.named_parameters()):
        assert np.array_equal(a.data, b.data), name


def test_load_model_checks_kind_and_fingerprint(tmpdir):
    path = os.path.join(str(tmpdir), 'vae.ckpt')
    save_model(path, tiny_vae(), fingerprint='abc')
    with pytest.raises(CheckpointError):
        load_model(path, DiffusionModel)
    with pytest.raises(CheckpointError):
        load_model(path, VaeModel, fingerprint='other')
