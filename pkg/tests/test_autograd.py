import numpy as np
import pytest

from peprank import autograd as ag
from peprank.autograd import ParameterStore, Tensor


def leaf(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


class TestForwardValues:
    def test_matmul_identity(self):
        rng = np.random.default_rng(0)
        a = Tensor(rng.normal(size=(4, 4)))
        out = ag.matmul(Tensor(np.eye(4)), a)
        np.testing.assert_array_equal(out.data, a.data)

    def test_matmul_hand_computed(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        b = Tensor([[5.0, 6.0], [7.0, 8.0]])
        np.testing.assert_array_equal(
            ag.matmul(a, b).data, [[19.0, 22.0], [43.0, 50.0]]
        )

    def test_softmax_masked_uniform_over_valid(self):
        logits = Tensor(np.zeros((2, 4)))
        mask = np.array([[True, True, False, True], [True, False, False, False]])
        probs = ag.softmax_masked(logits, mask).data
        np.testing.assert_allclose(probs[0], [1 / 3, 1 / 3, 0.0, 1 / 3])
        np.testing.assert_allclose(probs[1], [1.0, 0.0, 0.0, 0.0])

    def test_softmax_all_masked_row_rejected(self):
        with pytest.raises(ValueError, match="masked"):
            ag.softmax_masked(Tensor(np.zeros((1, 3))), np.zeros((1, 3), dtype=bool))

    def test_layer_norm_constant_vector_is_zero(self):
        x = Tensor(np.full((3, 8), 4.2))
        out = ag.layer_norm(x, Tensor(np.ones(8)), Tensor(np.zeros(8)))
        np.testing.assert_allclose(out.data, 0.0, atol=1e-12)

    def test_rmse_masked(self):
        pred = Tensor([1.0, 2.0, 100.0])
        target = Tensor([1.0, 4.0, 0.0])
        mask = np.array([True, True, False])
        out = ag.rmse(pred, target, mask)
        assert out.item() == pytest.approx(np.sqrt(4.0 / 2))

    def test_rmse_all_masked_rejected(self):
        with pytest.raises(ValueError, match="zero unmasked"):
            ag.rmse(Tensor([1.0]), Tensor([2.0]), np.array([False]))

    def test_dropout_eval_is_identity(self):
        x = Tensor(np.arange(6.0))
        assert ag.dropout(x, 0.5, training=False) is x

    def test_dropout_train_scales(self):
        rng = np.random.default_rng(1)
        x = Tensor(np.ones(10000))
        out = ag.dropout(x, 0.25, training=True, rng=rng)
        kept = out.data[out.data > 0]
        np.testing.assert_allclose(kept, 1 / 0.75)
        assert kept.size == pytest.approx(7500, abs=200)

    def test_concat_split_round_trip(self):
        rng = np.random.default_rng(2)
        a, b = Tensor(rng.normal(size=(2, 3))), Tensor(rng.normal(size=(4, 3)))
        joined = ag.concat([a, b], axis=0)
        parts = ag.split(joined, [2], axis=0)
        np.testing.assert_array_equal(parts[0].data, a.data)
        np.testing.assert_array_equal(parts[1].data, b.data)

    def test_non_scalar_backward_rejected(self):
        with pytest.raises(ValueError, match="scalar"):
            ag.backward(Tensor(np.zeros(3), requires_grad=True))


class TestBackwardClosedForms:
    def test_sum_gradient_is_ones(self):
        x = Tensor(np.arange(12.0).reshape(3, 4), requires_grad=True)
        ag.backward(ag.tensor_sum(x))
        np.testing.assert_array_equal(x.grad, np.ones((3, 4)))

    def test_mean_square_gradient(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.normal(size=8), requires_grad=True)
        ag.backward(ag.mean(ag.mul(x, x)))
        np.testing.assert_allclose(x.grad, 2 * x.data / 8)

    def test_fanout_accumulates(self):
        x = Tensor(np.array([3.0]), requires_grad=True)
        out = ag.add(ag.mul(x, 2.0), ag.mul(x, 5.0))
        ag.backward(ag.tensor_sum(out))
        np.testing.assert_allclose(x.grad, [7.0])

    def test_off_path_parameter_keeps_zero_grad(self):
        store = ParameterStore(seed=0)
        used = store.create("used", (3,))
        unused = store.create("unused", (3,))
        store.zero_grad()
        ag.backward(ag.tensor_sum(used))
        np.testing.assert_array_equal(unused.grad, np.zeros(3))
        np.testing.assert_array_equal(used.grad, np.ones(3))


class TestGradCheck:
    def test_linear_map_is_exact(self):
        rng = np.random.default_rng(4)
        x = leaf(rng, 3, 5)
        w = leaf(rng, 5, 2)
        b = leaf(rng, 2)
        err = ag.grad_check(lambda: ag.tensor_sum(ag.linear(x, w, b)), [x, w, b])
        assert err < 1e-9

    @pytest.mark.parametrize(
        "name",
        [
            "add", "mul", "matmul", "transpose", "reshape", "concat", "split",
            "sum", "mean", "relu", "gelu", "layer_norm", "softmax_masked",
            "rmse", "take", "exp", "log", "sqrt", "sigmoid", "softplus",
            "dropout", "linear",
        ],
    )
    def test_each_op(self, name):
        rng = np.random.default_rng(5)
        if name == "add":
            a, b = leaf(rng, 3, 4), leaf(rng, 4)
            f = lambda: ag.tensor_sum(ag.mul(ag.add(a, b), ag.add(a, b)))
            inputs = [a, b]
        elif name == "mul":
            a, b = leaf(rng, 3, 4), leaf(rng, 3, 1)
            f = lambda: ag.tensor_sum(ag.mul(a, b))
            inputs = [a, b]
        elif name == "matmul":
            a, b = leaf(rng, 2, 3, 4), leaf(rng, 2, 4, 5)
            f = lambda: ag.tensor_sum(ag.mul(ag.matmul(a, b), ag.matmul(a, b)))
            inputs = [a, b]
        elif name == "transpose":
            a = leaf(rng, 2, 3, 4)
            f = lambda: ag.tensor_sum(ag.mul(ag.transpose(a, (2, 0, 1)), 3.0))
            inputs = [a]
        elif name == "reshape":
            a = leaf(rng, 6, 2)
            f = lambda: ag.tensor_sum(ag.mul(ag.reshape(a, (3, 4)), ag.reshape(a, (3, 4))))
            inputs = [a]
        elif name == "concat":
            a, b = leaf(rng, 2, 3), leaf(rng, 4, 3)
            f = lambda: ag.tensor_sum(ag.mul(ag.concat([a, b], axis=0), 2.0))
            inputs = [a, b]
        elif name == "split":
            a = leaf(rng, 6, 3)
            f = lambda: ag.tensor_sum(ag.mul(ag.split(a, [2], axis=0)[1], ag.split(a, [2], axis=0)[1]))
            inputs = [a]
        elif name == "sum":
            a = leaf(rng, 3, 4)
            f = lambda: ag.tensor_sum(ag.mul(ag.tensor_sum(a, axis=1), ag.tensor_sum(a, axis=1)))
            inputs = [a]
        elif name == "mean":
            a = leaf(rng, 3, 4)
            f = lambda: ag.tensor_sum(ag.mul(ag.mean(a, axis=0), ag.mean(a, axis=0)))
            inputs = [a]
        elif name == "relu":
            a = Tensor(rng.normal(size=(4, 4)) + np.sign(rng.normal(size=(4, 4))) * 0.1,
                       requires_grad=True)
            f = lambda: ag.tensor_sum(ag.relu(a))
            inputs = [a]
        elif name == "gelu":
            a = leaf(rng, 4, 4)
            f = lambda: ag.tensor_sum(ag.gelu(a))
            inputs = [a]
        elif name == "layer_norm":
            a, g, b = leaf(rng, 3, 8), leaf(rng, 8), leaf(rng, 8)
            f = lambda: ag.tensor_sum(ag.mul(ag.layer_norm(a, g, b), ag.layer_norm(a, g, b)))
            inputs = [a, g, b]
        elif name == "softmax_masked":
            a = leaf(rng, 2, 5)
            mask = np.array([[True] * 5, [True, True, False, True, False]])
            weights = Tensor(rng.normal(size=(2, 5)))
            f = lambda: ag.tensor_sum(ag.mul(ag.softmax_masked(a, mask), weights))
            inputs = [a]
        elif name == "rmse":
            a, t = leaf(rng, 3, 4), leaf(rng, 3, 4)
            mask = rng.random((3, 4)) > 0.3
            f = lambda: ag.rmse(a, t, mask)
            inputs = [a, t]
        elif name == "take":
            a = leaf(rng, 5, 3)
            f = lambda: ag.tensor_sum(ag.mul(ag.take(a, [0, 2, 2], axis=0), 2.0))
            inputs = [a]
        elif name == "exp":
            a = leaf(rng, 3, 3)
            f = lambda: ag.tensor_sum(ag.exp(a))
            inputs = [a]
        elif name == "log":
            a = Tensor(rng.uniform(0.5, 3.0, size=(3, 3)), requires_grad=True)
            f = lambda: ag.tensor_sum(ag.log(a))
            inputs = [a]
        elif name == "sqrt":
            a = Tensor(rng.uniform(0.5, 3.0, size=(3, 3)), requires_grad=True)
            f = lambda: ag.tensor_sum(ag.sqrt(a))
            inputs = [a]
        elif name == "sigmoid":
            a = leaf(rng, 3, 3)
            f = lambda: ag.tensor_sum(ag.mul(ag.sigmoid(a), ag.sigmoid(a)))
            inputs = [a]
        elif name == "softplus":
            a = leaf(rng, 3, 3)
            f = lambda: ag.tensor_sum(ag.softplus(a))
            inputs = [a]
        elif name == "dropout":
            a = leaf(rng, 4, 4)
            # deterministic: a fresh, identically seeded rng on every call
            f = lambda: ag.tensor_sum(
                ag.dropout(a, 0.4, training=True, rng=np.random.default_rng(99))
            )
            inputs = [a]
        elif name == "linear":
            x, w, b = leaf(rng, 3, 5), leaf(rng, 5, 2), leaf(rng, 2)
            f = lambda: ag.tensor_sum(ag.mul(ag.linear(x, w, b), ag.linear(x, w, b)))
            inputs = [x, w, b]
        else:
            raise AssertionError(name)
        assert ag.grad_check(f, inputs) < 1e-4

    def test_composed_attention_style_block(self):
        rng = np.random.default_rng(6)
        q = leaf(rng, 2, 3, 4)
        k = leaf(rng, 2, 5, 4)
        v = leaf(rng, 2, 5, 4)
        mask = np.ones((2, 3, 5), dtype=bool)
        mask[1, :, 4] = False
        target = Tensor(rng.normal(size=(2, 3, 4)))

        def f():
            scores = ag.mul(ag.matmul(q, ag.transpose(k, (0, 2, 1))), 0.5)
            probs = ag.softmax_masked(scores, mask)
            return ag.rmse(ag.matmul(probs, v), target)

        assert ag.grad_check(f, [q, k, v]) < 1e-4


class TestDeterminism:
    def test_forward_bit_identical(self):
        def run():
            store = ParameterStore(seed=42)
            w = store.create("w", (6, 6))
            x = Tensor(np.linspace(-1, 1, 18).reshape(3, 6))
            return ag.tensor_sum(ag.gelu(ag.matmul(x, w))).item()

        assert run() == run()


class TestParameterStore:
    def test_duplicate_name_rejected(self):
        store = ParameterStore()
        store.create("a", (2,))
        with pytest.raises(ValueError, match="duplicate"):
            store.create("a", (2,))

    def test_seeded_init_reproducible(self):
        a = ParameterStore(seed=7).create("w", (4, 4))
        b = ParameterStore(seed=7).create("w", (4, 4))
        np.testing.assert_array_equal(a.data, b.data)

    def test_clip_grad_norm(self):
        store = ParameterStore(seed=0)
        p = store.create("p", (4,))
        p.grad = np.full(4, 1.5)  # norm 3.0
        raw = store.clip_grad_norm(1.5)
        assert raw == pytest.approx(3.0)
        assert store.grad_norm() == pytest.approx(1.5)

    def test_clip_noop_below_threshold(self):
        store = ParameterStore(seed=0)
        p = store.create("p", (4,))
        p.grad = np.full(4, 0.1)
        store.clip_grad_norm(1.5)
        np.testing.assert_allclose(p.grad, 0.1)

    def test_load_arrays_shape_mismatch(self):
        store = ParameterStore(seed=0)
        store.create("w", (2, 2))
        with pytest.raises(ValueError, match="'w'"):
            store.load_arrays({"w": np.zeros((3, 3))})

    def test_load_arrays_name_mismatch(self):
        store = ParameterStore(seed=0)
        store.create("w", (2, 2))
        with pytest.raises(ValueError, match="mismatch"):
            store.load_arrays({"other": np.zeros((2, 2))})
