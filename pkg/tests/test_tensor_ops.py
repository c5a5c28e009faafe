"""Tensor op semantics, frozen 64-bit oracle values, and gradient properties."""

import numpy as np
import pytest

from textrec import tensor as T
from textrec.errors import ShapeError, TapeStateError
from gradcheck import numeric_grad, assert_grads_close


def t64(a, requires_grad=False):
    return T.Tensor(np.array(a, dtype=np.float64), requires_grad=requires_grad)


class TestMatmul:
    def test_identity(self):
        out = T.matmul(t64([[1, 0], [0, 1]]), t64([[3, 4], [5, 6]]))
        np.testing.assert_array_equal(out.data, [[3, 4], [5, 6]])

    def test_zero(self):
        out = T.matmul(t64([[1, 2]]), t64([[0], [0]]))
        np.testing.assert_array_equal(out.data, [[0]])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            T.matmul(t64([[1, 2]]), t64([[1, 2]]))

    def test_grad_of_sum_vs_finite_differences(self):
        rng = np.random.default_rng(0)
        a = T.Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b = T.Tensor(rng.standard_normal((4, 2)), requires_grad=True)
        with T.ComputeTape() as tape:
            loss = T.sum_all(T.matmul(a, b))
        tape.backward(loss)

        def f():
            return float(np.matmul(a.data, b.data).sum())

        assert_grads_close(a.grad, numeric_grad(f, a.data), rtol=1e-6, atol=1e-9, label="matmul/a")
        assert_grads_close(b.grad, numeric_grad(f, b.data), rtol=1e-6, atol=1e-9, label="matmul/b")


class TestSoftmaxRows:
    def test_symmetry(self):
        out = T.softmax_rows(t64([[0.0, 0.0]]))
        np.testing.assert_allclose(out.data, [[0.5, 0.5]], atol=1e-12)

    def test_large_values_no_overflow(self):
        out = T.softmax_rows(T.Tensor(np.array([[1000.0, 0.0]], dtype=np.float32)))
        assert out.is_finite()
        np.testing.assert_allclose(out.data, [[1.0, 0.0]], atol=1e-12)

    def test_against_64bit_reference(self):
        # reference: exp(x - max) / sum, computed at float64
        expected = [0.09003057317038046, 0.24472847105479764, 0.6652409557748218]
        out = T.softmax_rows(t64([[1.0, 2.0, 3.0]]))
        np.testing.assert_allclose(out.data[0], expected, atol=1e-6)

    def test_rows_sum_to_one_property(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            scale = rng.choice([1.0, 10.0, 1000.0])
            x = (rng.standard_normal((4, 7)) * scale).astype(np.float32)
            out = T.softmax_rows(T.Tensor(x))
            assert out.is_finite()
            np.testing.assert_allclose(out.data.sum(axis=-1), 1.0, atol=1e-6)


class TestLayerNorm:
    def test_constant_vector_zeroed(self):
        x = t64([[5.0, 5.0, 5.0, 5.0]])
        out = T.layer_norm(x, t64([1, 1, 1, 1]), t64([0, 0, 0, 0]))
        np.testing.assert_allclose(out.data, 0.0, atol=1e-12)

    def test_zero_gain_gives_bias(self):
        x = t64([[1.0, -2.0, 0.5]])
        out = T.layer_norm(x, t64([0, 0, 0]), t64([7.0, -1.0, 2.0]))
        np.testing.assert_allclose(out.data, [[7.0, -1.0, 2.0]], atol=1e-12)

    def test_normalizes_before_affine(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((5, 8))
        out = T.layer_norm(T.Tensor(x), t64(np.ones(8)), t64(np.zeros(8)))
        np.testing.assert_allclose(out.data.mean(axis=-1), 0.0, atol=1e-7)
        np.testing.assert_allclose(out.data.var(axis=-1), 1.0, atol=1e-4)

    def test_grad_vs_finite_differences(self):
        rng = np.random.default_rng(3)
        x = T.Tensor(rng.standard_normal((2, 5)), requires_grad=True)
        gain = T.Tensor(rng.standard_normal(5), requires_grad=True)
        bias = T.Tensor(rng.standard_normal(5), requires_grad=True)
        w = rng.standard_normal((2, 5))
        with T.ComputeTape() as tape:
            loss = T.sum_all(T.mul(T.layer_norm(x, gain, bias), T.Tensor(w)))
        tape.backward(loss)

        def f():
            mean = x.data.mean(axis=1, keepdims=True)
            var = ((x.data - mean) ** 2).mean(axis=1, keepdims=True)
            y = (x.data - mean) / np.sqrt(var + 1e-5) * gain.data + bias.data
            return float((y * w).sum())

        for tensor_, name in ((x, "x"), (gain, "gain"), (bias, "bias")):
            assert_grads_close(tensor_.grad, numeric_grad(f, tensor_.data), rtol=1e-4, label=name)


class TestGelu:
    def test_zero(self):
        assert T.gelu(t64([0.0])).data[0] == 0.0

    def test_asymptote(self):
        assert abs(T.gelu(t64([10.0])).data[0] - 10.0) < 1e-4

    def test_against_64bit_reference(self):
        # 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715 x^3))) at x=-0.5, float64
        out = T.gelu(t64([-0.5]))
        assert abs(out.data[0] - (-0.15428599017485606)) < 1e-6

    def test_monotone_on_tested_range(self):
        x = np.linspace(-0.7, 4.0, 200)
        y = T.gelu(t64(x)).data
        assert np.all(np.diff(y) > 0)


class TestCrossEntropy:
    def test_uniform_logits(self):
        logits = t64(np.zeros((1, 4)))
        loss = T.cross_entropy(logits, [2])
        assert abs(loss.item() - 1.3862943611198906) < 1e-9

    def test_dominant_logit(self):
        row = np.zeros((1, 5))
        row[0, 3] = 1000.0
        loss = T.cross_entropy(t64(row), [3])
        assert loss.item() < 1e-8

    def test_against_64bit_reference(self):
        # frozen from a float64 log-softmax computation (rng seed 7)
        logits = np.array(
            [[1.2301533574825742e-03, 2.9874553750846988e-01, -2.7413785536221758e-01,
              -8.9059183875727421e-01, -4.5467078517172255e-01],
             [-9.9164655499646237e-01, 6.0143602597438485e-02, 1.3402152455545335e+00,
              -4.9220651855132963e-01, -6.2047489981994042e-01]])
        loss = T.cross_entropy(T.Tensor(logits), [3, 0])
        assert abs(loss.item() - 2.581527072082854) < 1e-6

    def test_out_of_range_target(self):
        with pytest.raises(IndexError):
            T.cross_entropy(t64(np.zeros((2, 3))), [0, 3])

    def test_grad_flows_to_logits(self):
        rng = np.random.default_rng(4)
        logits = T.Tensor(rng.standard_normal((3, 6)), requires_grad=True)
        targets = [5, 0, 2]
        with T.ComputeTape() as tape:
            loss = T.cross_entropy(logits, targets)
        tape.backward(loss)

        def f():
            sh = logits.data - logits.data.max(axis=1, keepdims=True)
            lse = np.log(np.exp(sh).sum(axis=1))
            return float(-(sh[np.arange(3), targets] - lse).mean())

        assert_grads_close(logits.grad, numeric_grad(f, logits.data), rtol=1e-4, label="ce")


class TestBackward:
    def test_sum_gives_ones(self):
        x = T.Tensor(np.random.default_rng(5).standard_normal((2, 3, 4)), requires_grad=True)
        with T.ComputeTape() as tape:
            loss = T.sum_all(x)
        tape.backward(loss)
        np.testing.assert_array_equal(x.grad, np.ones((2, 3, 4)))

    def test_elementwise_square(self):
        x = t64([1.0, 2.0], requires_grad=True)
        with T.ComputeTape() as tape:
            loss = T.sum_all(T.mul(x, x))
        tape.backward(loss)
        np.testing.assert_allclose(x.grad, [2.0, 4.0], atol=1e-12)

    def test_double_backward_is_error(self):
        x = t64([1.0], requires_grad=True)
        with T.ComputeTape() as tape:
            loss = T.sum_all(x)
        tape.backward(loss)
        with pytest.raises(TapeStateError):
            tape.backward(loss)

    def test_reset_allows_reuse(self):
        x = t64([1.0], requires_grad=True)
        with T.ComputeTape() as tape:
            loss = T.sum_all(x)
        tape.backward(loss)
        tape.reset()
        with tape:
            loss = T.sum_all(T.mul(x, x))
        tape.backward(loss)
        np.testing.assert_allclose(x.grad[..., 0], 1.0 + 2.0)  # accumulates across calls

    def test_unrecorded_loss_is_error(self):
        loss = t64(3.0)
        with pytest.raises(TapeStateError):
            T.backward(loss)

    def test_linearity(self):
        rng = np.random.default_rng(6)
        base = rng.standard_normal((3, 3))
        wa, wb = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))

        def grad_of(a_coef, b_coef):
            x = T.Tensor(base.copy(), requires_grad=True)
            with T.ComputeTape() as tape:
                l1 = T.sum_all(T.mul(x, T.Tensor(wa)))
                l2 = T.sum_all(T.mul(T.matmul(x, x), T.Tensor(wb)))
                loss = T.add(T.scale(l1, a_coef), T.scale(l2, b_coef))
            tape.backward(loss)
            return x.grad

        g1 = grad_of(1.0, 0.0)
        g2 = grad_of(0.0, 1.0)
        combo = grad_of(0.7, -1.3)
        np.testing.assert_allclose(combo, 0.7 * g1 + (-1.3) * g2, atol=1e-6)

    def test_no_grad_outside_tape(self):
        x = t64([1.0, 2.0], requires_grad=True)
        out = T.mul(x, x)
        assert out.requires_grad is False and out._tape is None

    def test_frozen_input_gets_no_grad(self):
        frozen = t64([[1.0, 2.0]], requires_grad=False)
        w = t64([[1.0], [1.0]], requires_grad=True)
        with T.ComputeTape() as tape:
            loss = T.sum_all(T.matmul(frozen, w))
        tape.backward(loss)
        assert frozen.grad is None and w.grad is not None


def _rand(rng, shape):
    return rng.standard_normal(shape)


def _weighted_loss(out, w):
    return T.sum_all(T.mul(out, T.Tensor(w)))


def _op_cases(rng):
    """One randomized instance per op: (inputs, graph fn, numpy fn)."""
    m, k, n, d = rng.integers(2, 5, size=4)
    x2 = _rand(rng, (int(m), int(d)))
    cases = {
        "matmul": (
            [_rand(rng, (int(m), int(k))), _rand(rng, (int(k), int(n)))],
            lambda a, b: T.matmul(a, b),
            lambda a, b: np.matmul(a, b),
        ),
        "matmul_batched": (
            [_rand(rng, (2, int(m), int(k))), _rand(rng, (2, int(k), int(n)))],
            lambda a, b: T.matmul(a, b),
            lambda a, b: np.matmul(a, b),
        ),
        "add_broadcast": (
            [_rand(rng, (int(m), int(d))), _rand(rng, (int(d),))],
            lambda a, b: T.add(a, b),
            lambda a, b: a + b,
        ),
        "mul": (
            [_rand(rng, (int(m), int(d))), _rand(rng, (int(m), int(d)))],
            lambda a, b: T.mul(a, b),
            lambda a, b: a * b,
        ),
        "scale": (
            [x2.copy()],
            lambda a: T.scale(a, 0.37),
            lambda a: a * 0.37,
        ),
        "gelu": (
            [x2.copy()],
            lambda a: T.gelu(a),
            lambda a: 0.5 * a * (1 + np.tanh(0.7978845608028654 * (a + 0.044715 * a ** 3))),
        ),
        "relu": (
            [x2.copy() + 0.1],  # keep away from the kink, FD is invalid there
            lambda a: T.relu(a),
            lambda a: np.maximum(a, 0.0),
        ),
        "layer_norm": (
            [x2.copy(), _rand(rng, (int(d),)), _rand(rng, (int(d),))],
            lambda a, g, b: T.layer_norm(a, g, b),
            lambda a, g, b: (a - a.mean(axis=-1, keepdims=True))
            / np.sqrt(a.var(axis=-1, keepdims=True) + 1e-5) * g + b,
        ),
        "softmax_rows": (
            [x2.copy()],
            lambda a: T.softmax_rows(a),
            lambda a: np.exp(a - a.max(axis=-1, keepdims=True))
            / np.exp(a - a.max(axis=-1, keepdims=True)).sum(axis=-1, keepdims=True),
        ),
        "gather_rows": (
            [x2.copy()],
            lambda a: T.gather_rows(a, np.array([0, 0, int(m) - 1])),
            lambda a: a[np.array([0, 0, int(m) - 1])],
        ),
        "concat_rows": (
            [x2.copy(), _rand(rng, (2, int(d)))],
            lambda a, b: T.concat_rows(a, b),
            lambda a, b: np.concatenate([a, b], axis=0),
        ),
        "reshape": (
            [x2.copy()],
            lambda a: T.reshape(a, (int(d), int(m))),
            lambda a: a.reshape(int(d), int(m)),
        ),
        "transpose": (
            [_rand(rng, (2, int(m), int(d)))],
            lambda a: T.transpose(a, (1, 2, 0)),
            lambda a: np.transpose(a, (1, 2, 0)),
        ),
    }
    return cases


@pytest.mark.parametrize("op_name", sorted(_op_cases(np.random.default_rng(0)).keys()))
def test_gradient_matches_finite_differences_property(op_name):
    """Every op: analytic grad vs central FD at 64-bit, 100 random instances."""
    checked = 0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        arrays, graph_fn, np_fn = _op_cases(rng)[op_name]
        tensors = [T.Tensor(a, requires_grad=True) for a in arrays]
        probe = np_fn(*[t.data for t in tensors])
        w = np.random.default_rng(seed).standard_normal(probe.shape)
        with T.ComputeTape() as tape:
            loss = _weighted_loss(graph_fn(*tensors), w)
        tape.backward(loss)

        def f():
            return float((np_fn(*[t.data for t in tensors]) * w).sum())

        for i, t in enumerate(tensors):
            assert_grads_close(t.grad, numeric_grad(f, t.data), rtol=1e-4,
                               label=f"{op_name}[{seed}] input {i}")
            checked += 1
    assert checked >= 100


def test_dropout_grad_and_scaling():
    rng = np.random.default_rng(8)
    x = T.Tensor(rng.standard_normal((50, 20)), requires_grad=True)
    mask_rng = np.random.default_rng(9)
    with T.ComputeTape() as tape:
        out = T.dropout(x, 0.25, mask_rng)
        loss = T.sum_all(out)
    tape.backward(loss)
    kept = out.data != 0
    # inverted dropout: kept entries scaled by 1/(1-p), dropped contribute 0 grad
    np.testing.assert_allclose(out.data[kept], (x.data / 0.75)[kept], rtol=1e-6)
    np.testing.assert_allclose(x.grad[kept], 1.0 / 0.75, rtol=1e-6)
    np.testing.assert_allclose(x.grad[~kept], 0.0)
    assert abs(kept.mean() - 0.75) < 0.03


def test_determinism_same_seed_bit_identical():
    def run():
        rng = np.random.default_rng(42)
        x = T.Tensor(rng.standard_normal((6, 6)).astype(np.float32), requires_grad=True)
        w = T.Tensor(rng.standard_normal((6, 6)).astype(np.float32), requires_grad=True)
        with T.ComputeTape() as tape:
            h = T.gelu(T.matmul(x, w))
            loss = T.cross_entropy(h, [1, 2, 3, 4, 5, 0])
        tape.backward(loss)
        return loss.item(), x.grad.copy(), w.grad.copy()

    l1, gx1, gw1 = run()
    l2, gx2, gw2 = run()
    assert l1 == l2
    np.testing.assert_array_equal(gx1, gx2)
    np.testing.assert_array_equal(gw1, gw2)


def test_nan_fault_is_detectable():
    bad = T.Tensor(np.array([1.0, np.nan]))
    assert not bad.is_finite()
    assert T.Tensor(np.array([1.0, 2.0])).is_finite()
