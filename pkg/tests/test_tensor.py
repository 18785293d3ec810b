import numpy as np
import pytest

from berd import tensor as T
from berd.gradcheck import grad_check
from berd.params import ParameterStore, adam_step
from berd.tensor import Tensor


def t64(x):
    return Tensor(np.asarray(x, dtype=np.float64))


class TestSegmentMax:
    def test_three_segment_example(self):
        h = t64([[1, 0], [2, 3], [0, 5], [4, 1], [2, 2]])
        out = T.segment_max(h, 2, 4)
        np.testing.assert_array_equal(out.data, [2, 3, 4, 5, 2, 2])

    def test_all_ones_constant(self):
        h = t64(np.ones((6, 3)))
        out = T.segment_max(h, 2, 4)
        np.testing.assert_array_equal(out.data, np.ones(9))

    def test_scalar_columns(self):
        h = t64([[5], [1], [3], [2]])
        out = T.segment_max(h, 1, 3)
        np.testing.assert_array_equal(out.data, [5, 3, 2])

    def test_empty_trailing_segment_zeros(self):
        h = t64([[5], [1], [3]])
        out = T.segment_max(h, 1, 3)
        np.testing.assert_array_equal(out.data, [5, 3, 0])

    def test_invalid_splits_rejected(self):
        h = t64(np.ones((4, 2)))
        with pytest.raises(ValueError):
            T.segment_max(h, 3, 3)
        with pytest.raises(ValueError):
            T.segment_max(h, 0, 2)
        with pytest.raises(ValueError):
            T.segment_max(h, 2, 5)

    def test_tie_gradient_goes_to_lowest_row(self):
        h = t64([[2.0], [2.0], [1.0], [1.0]])
        out = T.segment_max(h, 2, 4)
        out.sum().backward()
        np.testing.assert_array_equal(h.grad.ravel(), [1, 0, 1, 0])


class TestConv1dSame:
    def test_sum_kernel(self):
        x = t64([[1], [2], [3]])
        w = t64([[1], [1], [1]])
        b = t64([0.0])
        out = T.conv1d_same(x, w, b)
        np.testing.assert_allclose(out.data.ravel(), [3, 6, 5])

    def test_zero_kernel_zero_bias(self):
        x = t64(np.random.default_rng(0).normal(size=(5, 2)))
        out = T.conv1d_same(x, t64(np.zeros((6, 4))), t64(np.zeros(4)))
        np.testing.assert_array_equal(out.data, np.zeros((5, 4)))

    def test_center_tap_is_identity(self):
        x = t64(np.random.default_rng(1).normal(size=(7, 1)))
        out = T.conv1d_same(x, t64([[0.0], [1.0], [0.0]]), t64([0.0]))
        np.testing.assert_allclose(out.data, x.data)

    def test_weight_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            T.conv1d_same(t64(np.ones((4, 2))), t64(np.ones((5, 3))), t64(np.zeros(3)))

    def test_batched_matches_per_row(self):
        rng = np.random.default_rng(2)
        xb = rng.normal(size=(3, 6, 4))
        w = t64(rng.normal(size=(12, 5)))
        b = t64(rng.normal(size=5))
        batched = T.conv1d_same(t64(xb), w, b)
        for i in range(3):
            single = T.conv1d_same(t64(xb[i]), w, b)
            np.testing.assert_allclose(batched.data[i], single.data, atol=1e-12)


class TestMaxOverTime:
    def test_column_max(self):
        out = T.max_over_time(t64([[1, 4], [3, 2]]))
        np.testing.assert_array_equal(out.data, [3, 4])

    def test_single_row_identity(self):
        out = T.max_over_time(t64([[7, 8, 9]]))
        np.testing.assert_array_equal(out.data, [7, 8, 9])

    def test_equal_rows_gradient_on_row_zero(self):
        x = t64(np.ones((3, 2)))
        out = T.max_over_time(x)
        out.sum().backward()
        np.testing.assert_array_equal(x.grad, [[1, 1], [0, 0], [0, 0]])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            T.max_over_time(t64(np.zeros((0, 3))))


class TestMaskedMax:
    def test_matches_max_over_time_on_full_mask(self):
        x = np.random.default_rng(3).normal(size=(4, 3))
        out = T.masked_max(t64(x), np.ones(4, dtype=bool))
        np.testing.assert_allclose(out.data, x.max(axis=0))

    def test_empty_mask_yields_zeros_and_no_grad(self):
        x = t64(np.random.default_rng(4).normal(size=(2, 4, 3)))
        mask = np.zeros((2, 4), dtype=bool)
        mask[0] = True
        out = T.masked_max(x, mask)
        np.testing.assert_array_equal(out.data[1], np.zeros(3))
        out.sum().backward()
        np.testing.assert_array_equal(x.grad[1], np.zeros((4, 3)))

    def test_partial_mask_ignores_masked_rows(self):
        x = t64([[9.0, 9.0], [1.0, 2.0], [0.0, 5.0]])
        out = T.masked_max(x, np.array([False, True, True]))
        np.testing.assert_array_equal(out.data, [1, 5])


class TestDense:
    def test_identity_weights(self):
        x = np.array([1.5, -2.0, 0.5])
        out = T.dense(t64(x), t64(np.eye(3)), t64(np.zeros(3)))
        np.testing.assert_allclose(out.data, x)

    def test_bias_with_tanh(self):
        out = T.dense(t64(np.zeros(2)), t64(np.zeros((2, 2))),
                      t64([1.0, -1.0]), activation=True)
        np.testing.assert_allclose(out.data, [np.tanh(1.0), -np.tanh(1.0)])

    def test_ones_weight_sums(self):
        out = T.dense(t64([1.0, 1.0, 1.0]), t64(np.ones((3, 2))), t64(np.zeros(2)))
        np.testing.assert_allclose(out.data, [3.0, 3.0])

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError):
            T.dense(t64(np.ones(3)), t64(np.ones((4, 2))), t64(np.zeros(2)))


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(T.softmax([0.0, 0.0]), [0.5, 0.5])

    def test_closed_form(self):
        np.testing.assert_allclose(T.softmax([np.log(2.0), 0.0]), [2 / 3, 1 / 3])

    def test_large_logits_no_overflow(self):
        out = T.softmax([1000.0, 1000.0])
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [0.5, 0.5])

    def test_rows_sum_to_one(self):
        p = T.softmax(np.random.default_rng(5).normal(size=(6, 9)))
        np.testing.assert_allclose(p.sum(axis=-1), np.ones(6), atol=1e-12)


class TestCrossEntropy:
    def test_uniform_pair(self):
        assert T.cross_entropy([0.5, 0.5], 0) == pytest.approx(np.log(2.0))

    def test_one_hot_is_zero(self):
        assert T.cross_entropy([0.0, 1.0, 0.0], 1) == 0.0

    def test_probability_floor(self):
        assert T.cross_entropy([0.0, 1.0], 0) == pytest.approx(-np.log(1e-12))
        assert T.cross_entropy([0.0, 1.0], 0) == pytest.approx(27.631, abs=1e-3)

    def test_gold_out_of_range(self):
        with pytest.raises(ValueError):
            T.cross_entropy([0.5, 0.5], 2)

    def test_fused_matches_composition(self):
        rng = np.random.default_rng(6)
        logits = rng.normal(size=(5, 4))
        gold = rng.integers(0, 4, size=5)
        loss, probs = T.softmax_cross_entropy(t64(logits), gold)
        manual = np.mean([T.cross_entropy(T.softmax(logits[i]), int(gold[i]))
                          for i in range(5)])
        assert float(loss.data) == pytest.approx(manual)
        np.testing.assert_allclose(probs, T.softmax(logits))


class TestAdam:
    def test_zero_grad_no_update(self):
        store = ParameterStore(np.float64)
        p = store.add("w", [1.0, 2.0])
        adam_step(store, lr=0.1)
        np.testing.assert_array_equal(p.data, [1.0, 2.0])

    def test_single_step_closed_form(self):
        store = ParameterStore(np.float64)
        p = store.add("w", [1.0])
        p.grad = np.array([1.0])
        adam_step(store, lr=0.1)
        # m_hat = v_hat = 1 after bias correction, so the step is lr/(1+eps)
        assert p.data[0] == pytest.approx(0.9, abs=1e-6)

    def test_identical_params_get_identical_updates(self):
        store = ParameterStore(np.float64)
        a = store.add("a", [0.3, -0.2])
        b = store.add("b", [0.3, -0.2])
        for _ in range(3):
            a.grad = np.array([0.5, -1.0])
            b.grad = np.array([0.5, -1.0])
            adam_step(store, lr=0.05, weight_decay=0.01, warmup_steps=2)
        np.testing.assert_array_equal(a.data, b.data)

    def test_warmup_scales_first_steps(self):
        s1 = ParameterStore(np.float64)
        s2 = ParameterStore(np.float64)
        p1 = s1.add("w", [1.0])
        p2 = s2.add("w", [1.0])
        p1.grad = np.array([1.0])
        p2.grad = np.array([1.0])
        adam_step(s1, lr=0.1, warmup_steps=0)
        adam_step(s2, lr=0.1, warmup_steps=4)
        step1 = 1.0 - p1.data[0]
        step2 = 1.0 - p2.data[0]
        assert step2 == pytest.approx(step1 / 4)

    def test_decoupled_weight_decay_direction(self):
        store = ParameterStore(np.float64)
        p = store.add("w", [2.0])
        p.grad = np.array([0.0])
        # grad 0 keeps the Adam step at 0 but eps makes m_hat/denominator 0/eps
        adam_step(store, lr=0.1, weight_decay=0.5)
        assert p.data[0] == pytest.approx(2.0 * (1 - 0.1 * 0.5))


class TestGradCheck:
    def test_quadratic(self):
        def fn(vals):
            x = vals["x"]
            return x * x

        err = grad_check(fn, {"x": np.array(3.0)})
        assert err < 1e-8

    def test_constant_function(self):
        def fn(vals):
            return (vals["x"] * 0.0).sum()

        assert grad_check(fn, {"x": np.array([1.0, 2.0])}) == 0.0

    def test_nonfinite_raises(self):
        def fn(vals):
            return vals["x"] * np.inf

        with pytest.raises(FloatingPointError):
            grad_check(fn, {"x": np.array(1.0)})


class TestAutodiffComposites:
    """Gradient spot checks for ops whose backward passes are hand-written."""

    def _check(self, fn, inputs, tol=1e-7):
        assert grad_check(fn, inputs) < tol

    def test_embedding_with_repeats(self):
        ids = np.array([0, 2, 2, 1])
        w = np.random.default_rng(7).normal(size=(4, 3))
        weights = np.random.default_rng(8).normal(size=(4, 3))

        def fn(vals):
            return (T.embedding(vals["w"], ids) * T.constant(weights, np.float64)).sum()

        self._check(fn, {"w": w})

    def test_concat_and_matmul(self):
        rng = np.random.default_rng(9)
        a, b, w = rng.normal(size=(2, 3)), rng.normal(size=(2, 2)), rng.normal(size=(5, 2))

        def fn(vals):
            x = T.concat([vals["a"], vals["b"]], axis=-1)
            return T.matmul(x, vals["w"]).sum()

        self._check(fn, {"a": a, "b": b, "w": w})

    def test_batched_matmul_broadcast(self):
        rng = np.random.default_rng(10)
        x, w = rng.normal(size=(2, 3, 4)), rng.normal(size=(4, 2))

        def fn(vals):
            return T.matmul(vals["x"], vals["w"]).sum()

        self._check(fn, {"x": x, "w": w})

    def test_take_scatter(self):
        x = np.random.default_rng(11).normal(size=(5, 2))
        idx = np.array([1, 1, 4, 0])

        def fn(vals):
            taken = T.take(vals["x"], idx)
            return (taken * taken).sum()

        self._check(fn, {"x": x})

    def test_softmax_tensor_backward(self):
        x = np.random.default_rng(12).normal(size=(3, 4))
        weights = np.random.default_rng(13).normal(size=(3, 4))

        def fn(vals):
            return (T.softmax_tensor(vals["x"]) * T.constant(weights, np.float64)).sum()

        self._check(fn, {"x": x})

    def test_dropout_identity_without_rng(self):
        x = Tensor(np.arange(6.0).reshape(2, 3))
        assert T.dropout(x, 0.5, None) is x

    def test_dropout_inverted_scaling(self):
        rng = np.random.default_rng(14)
        x = Tensor(np.ones((200, 50)))
        out = T.dropout(x, 0.5, rng)
        kept = out.data[out.data > 0]
        np.testing.assert_allclose(kept, 2.0)
        assert abs(out.data.mean() - 1.0) < 0.05
