
import math

import numpy as np
import pytest

from unitnorm.core.exceptions import ShapeError
from unitnorm.tensor import ops
from unitnorm.tensor.gradcheck import check_gradient
from unitnorm.tensor.tensor import Tensor


def test_matmul_identity():
    a = np.array([[1.5, -2.0], [0.25, 3.0]])
    out = ops.matmul(Tensor(np.eye(2)), Tensor(a))
    assert np.allclose(out.data, a)


def test_matmul_hand_checked():
    out = ops.matmul(Tensor([[1, 2], [3, 4]]), Tensor([[0], [1]]))
    assert np.array_equal(out.data, [[2], [4]])


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeError):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        ops.matmul(Tensor(np.ones(3)), Tensor(np.ones((3, 2))))


def test_matmul_gradient():
    rng = np.random.default_rng(0)
    result = check_gradient(
        lambda t: ops.sum(ops.matmul(t[0], t[1]) * ops.matmul(t[0], t[1])),
        [rng.uniform(-1, 1, (5, 7)), rng.uniform(-1, 1, (7, 3))])
    assert result.ok, result


def test_matmul_batched_broadcast_gradient():
    rng = np.random.default_rng(1)
    result = check_gradient(
        lambda t: ops.sum(ops.tanh(ops.matmul(t[0], t[1]))),
        [rng.uniform(-1, 1, (2, 3, 4)), rng.uniform(-1, 1, (4, 5))])
    assert result.ok, result


def test_softmax_symmetric():
    out = ops.softmax(Tensor([0.0, 0.0, 0.0]))
    assert np.allclose(out.data, [1 / 3.0] * 3)


def test_softmax_stable():
    out = ops.softmax(Tensor([1000.0, 0.0]))
    assert np.allclose(out.data, [1.0, 0.0], atol=1e-6)
    log_out = ops.log_softmax(Tensor([1000.0, 0.0]))
    assert np.all(np.isfinite(log_out.data))
    assert log_out.data[0] == pytest.approx(0.0, abs=1e-6)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(2)
    out = ops.softmax(Tensor(rng.normal(0, 5, size=(6, 9))), axis=-1)
    assert np.all(out.data >= 0)
    assert np.allclose(out.data.sum(axis=-1), 1.0, atol=1e-6)
    out = ops.softmax(Tensor(rng.normal(0, 5, size=(6, 9))), axis=0)
    assert np.allclose(out.data.sum(axis=0), 1.0, atol=1e-6)


def test_log_softmax_matches_log_of_softmax():
    x = Tensor(np.random.default_rng(3).normal(size=(3, 5)))
    assert np.allclose(ops.log_softmax(x).data, np.log(ops.softmax(x).data),
                       atol=1e-5)


def test_softmax_invalid_axis():
    with pytest.raises(ShapeError):
        ops.softmax(Tensor(np.ones((2, 3))), axis=2)


def test_softmax_gradient():
    rng = np.random.default_rng(4)
    w = rng.uniform(-1, 1, (3, 5))
    result = check_gradient(lambda t: ops.sum(ops.softmax(t[0]) * w),
                            [rng.uniform(-1, 1, (3, 5))])
    assert result.ok, result


def test_cross_entropy_perfect_logits():
    targets = np.array([0, 2, 1])
    logits = np.full((3, 4), -50.0)
    logits[np.arange(3), targets] = 50.0
    loss = ops.cross_entropy(Tensor(logits), targets)
    assert loss.item() == pytest.approx(0.0, abs=1e-6)


def test_cross_entropy_uniform():
    loss = ops.cross_entropy(Tensor(np.zeros((5, 4))), [0, 1, 2, 3, 0])
    assert loss.item() == pytest.approx(math.log(4), abs=1e-5)


def _cross_entropy_loop(logits, targets, mask, smoothing):
    total = 0.0
    count = 0
    for i in range(len(targets)):
        if not mask[i]:
            continue
        row = logits[i]
        top = max(row)
        norm = top + math.log(sum(math.exp(v - top) for v in row))
        vocab = len(row)
        loss = 0.0
        for j in range(vocab):
            weight = smoothing / vocab + (1.0 - smoothing) * (j == targets[i])
            loss -= weight * (row[j] - norm)
        total += loss
        count += 1
    return total / count


def test_cross_entropy_loop_oracle():
    rng = np.random.default_rng(5)
    logits = rng.normal(0, 2, size=(12, 7))
    targets = rng.integers(0, 7, size=12)
    mask = rng.random(12) < 0.6
    mask[0] = True
    for smoothing in [0.0, 0.2]:
        loss = ops.cross_entropy(Tensor(logits, dtype=np.float64), targets,
                                 mask=mask, label_smoothing=smoothing)
        expected = _cross_entropy_loop(logits, targets, mask, smoothing)
        assert loss.item() == pytest.approx(expected, abs=1e-5)


def test_cross_entropy_errors():
    logits = Tensor(np.zeros((3, 4)))
    with pytest.raises(ValueError):
        ops.cross_entropy(logits, [0, 4, 1])
    with pytest.raises(ValueError):
        ops.cross_entropy(logits, [0, -1, 1])
    with pytest.raises(ValueError):
        ops.cross_entropy(logits, [0, 1, 1], mask=[False, False, False])
    with pytest.raises(ValueError):
        ops.cross_entropy(logits, [0, 1, 1], label_smoothing=1.0)
    with pytest.raises(ShapeError):
        ops.cross_entropy(logits, [0, 1])


def test_cross_entropy_masked_target_out_of_range_is_ignored():
    logits = Tensor(np.zeros((3, 4)))
    loss = ops.cross_entropy(logits, [0, 99, 1], mask=[True, False, True])
    assert loss.item() == pytest.approx(math.log(4), abs=1e-5)


def test_mse_values():
    assert ops.mse(Tensor([1.0, 2.0]), Tensor([1.0, 2.0])).item() == 0.0
    assert ops.mse(Tensor([0.0, 0.0]), Tensor([2.0, 0.0])).item() == 2.0


def test_mse_mask_over_rows():
    a = Tensor(np.zeros((2, 3, 2)))
    b = np.zeros((2, 3, 2))
    b[0, 2] = 4.0
    mask = np.array([[True, True, False], [True, False, False]])
    assert ops.mse(a, b, mask=mask).item() == 0.0
    mask[0, 2] = True
    assert ops.mse(a, b, mask=mask).item() == pytest.approx(32.0 / 8)


def test_mse_shape_mismatch():
    with pytest.raises(ShapeError):
        ops.mse(Tensor([1.0, 2.0]), Tensor([1.0]))


def test_mse_gradient():
    rng = np.random.default_rng(6)
    result = check_gradient(lambda t: ops.mse(t[0], t[1]),
                            [rng.uniform(-1, 1, (4, 3)),
                             rng.uniform(-1, 1, (4, 3))])
    assert result.ok, result


def test_add_broadcast_gradient_shapes():
    a = Tensor(np.ones((2, 3)), requires_grad=True)
    b = Tensor(np.ones(3), requires_grad=True)
    ops.sum(a + b).backward()
    assert b.grad.shape == (3,)
    assert np.array_equal(b.grad, [2.0, 2.0, 2.0])


def test_add_incompatible_shapes():
    with pytest.raises(ShapeError):
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones(2)))


def test_layer_norm_normalizes():
    x = Tensor(np.random.default_rng(7).normal(3, 2, size=(4, 16)))
    out = ops.layer_norm(x, np.ones(16), np.zeros(16))
    assert np.allclose(out.data.mean(axis=-1), 0.0, atol=1e-5)
    assert np.allclose(out.data.std(axis=-1), 1.0, atol=1e-3)


def test_gelu_relu_values():
    out = ops.relu(Tensor([-1.0, 0.0, 2.0]))
    assert np.array_equal(out.data, [0.0, 0.0, 2.0])
    out = ops.gelu(Tensor([0.0, 10.0, -10.0]))
    assert np.allclose(out.data, [0.0, 10.0, 0.0], atol=1e-4)


def test_embedding_lookup_and_range():
    weight = Tensor(np.arange(12).reshape(4, 3), requires_grad=True)
    out = ops.embedding(weight, [[1, 1], [3, 0]])
    assert out.shape == (2, 2, 3)
    assert np.array_equal(out.data[1, 0], [9, 10, 11])
    ops.sum(out).backward()
    assert np.array_equal(weight.grad[:, 0], [1, 2, 0, 1])
    with pytest.raises(ValueError):
        ops.embedding(weight, [4])


def test_conv1d_matches_loop():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(2, 9, 3))
    weight = rng.normal(size=(3, 3, 4))
    bias = rng.normal(size=4)
    for stride, dilation in [(1, 1), (2, 1), (1, 2)]:
        out = ops.conv1d(Tensor(x, dtype=np.float64),
                         Tensor(weight, dtype=np.float64),
                         Tensor(bias, dtype=np.float64),
                         stride=stride, dilation=dilation, padding=(1, 1))
        padded = np.pad(x, ((0, 0), (1, 1), (0, 0)))
        span = dilation * 2 + 1
        length = (padded.shape[1] - span) // stride + 1
        assert out.shape == (2, length, 4)
        for b in range(2):
            for i in range(length):
                expected = bias.copy()
                for k in range(3):
                    frame = padded[b, i * stride + k * dilation]
                    expected += frame @ weight[k]
                assert np.allclose(out.data[b, i], expected)


def test_conv1d_errors():
    with pytest.raises(ShapeError):
        ops.conv1d(Tensor(np.ones((1, 5, 3))), Tensor(np.ones((3, 2, 4))))
    with pytest.raises(ShapeError):
        ops.conv1d(Tensor(np.ones((1, 2, 3))), Tensor(np.ones((5, 3, 4))))
    with pytest.raises(ShapeError):
        ops.conv1d(Tensor(np.ones((5, 3))), Tensor(np.ones((3, 3, 4))))


def test_mean_pool_masked():
    x = Tensor(np.array([[[1.0], [3.0], [100.0]]]))
    out = ops.mean_pool(x, mask=[[True, True, False]])
    assert np.allclose(out.data, [[2.0]])
    with pytest.raises(ValueError):
        ops.mean_pool(x, mask=[[False, False, False]])


def test_dropout_inverted_and_eval_identity():
    rng = np.random.default_rng(9)
    x = Tensor(np.ones((200, 50)))
    out = ops.dropout(x, 0.1, rng)
    kept = out.data[out.data != 0]
    assert np.allclose(kept, 1.0 / 0.9)
    assert out.data.mean() == pytest.approx(1.0, abs=0.05)
    assert ops.dropout(x, 0.1, rng, training=False) is x
    with pytest.raises(ValueError):
        ops.dropout(x, 1.0, rng)


def test_concat_and_getitem_gradients():
    a = Tensor(np.ones((2, 3)), requires_grad=True)
    b = Tensor(np.ones((1, 3)), requires_grad=True)
    out = ops.concat([a, b], axis=0)
    assert out.shape == (3, 3)
    ops.sum(out[np.array([0, 0, 2])]).backward()
    assert np.array_equal(a.grad, [[2, 2, 2], [0, 0, 0]])
    assert np.array_equal(b.grad, [[1, 1, 1]])


def test_where_and_masked_fill():
    a = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    out = ops.masked_fill(a, [False, True, False], -5.0)
    assert np.array_equal(out.data, [1.0, -5.0, 3.0])
    ops.sum(out).backward()
    assert np.array_equal(a.grad, [1.0, 0.0, 1.0])
    out = ops.where([True, False, True], Tensor([1.0, 2.0, 3.0]), 0.0)
    assert np.array_equal(out.data, [1.0, 0.0, 3.0])


def test_sinusoidal_encoding():
    enc = ops.sinusoidal_encoding(np.arange(5), 8)
    assert enc.shape == (5, 8)
    assert np.allclose(enc.data[0], [0, 0, 0, 0, 1, 1, 1, 1])
    assert np.all(np.abs(enc.data) <= 1.0)
    with pytest.raises(ValueError):
        ops.sinusoidal_encoding([0], 7)
