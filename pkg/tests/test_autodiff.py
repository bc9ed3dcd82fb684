"""Backward-pass correctness: exact identities, finite differences, tape order."""

import numpy as np
import pytest

from relate import autodiff as ad
from relate.autodiff import ConsistencyError, ShapeError, Tensor, backward, grad_check
from relate.params import ParameterStore

from reference import central_difference


class TestBackwardExact:
    def test_bilinear_form_gradient_is_other_factor(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.standard_normal((3, 4)), trainable=True)
        y = rng.standard_normal((3, 4))
        loss = ad.sum_all(ad.elemwise_mul(x, Tensor(y)))
        backward(loss)
        np.testing.assert_array_equal(x.grad, y)

    def test_unused_parameter_gets_zero_gradient(self):
        used = Tensor(np.ones((2, 2)), trainable=True)
        unused = Tensor(np.ones((2, 2)), trainable=True)
        backward(ad.sum_all(used))
        np.testing.assert_array_equal(used.grad, np.ones((2, 2)))
        np.testing.assert_array_equal(unused.grad, np.zeros((2, 2)))

    def test_non_scalar_loss_rejected(self):
        with pytest.raises(ShapeError):
            backward(Tensor(np.ones((2, 2)), trainable=True))

    def test_gradients_accumulate_across_backward_calls(self):
        x = Tensor(np.ones((2, 2)), trainable=True)
        backward(ad.sum_all(x))
        backward(ad.sum_all(x))
        np.testing.assert_array_equal(x.grad, 2 * np.ones((2, 2)))

    def test_reused_tensor_accumulates_within_one_graph(self):
        x = Tensor(np.full((2, 2), 3.0), trainable=True)
        loss = ad.sum_all(ad.add(ad.elemwise_mul(x, x), x))  # d/dx (x^2 + x) = 2x + 1
        backward(loss)
        np.testing.assert_allclose(x.grad, 2 * x.data + 1)


class TestBackwardNumeric:
    def test_relu_matmul_matches_central_differences(self):
        rng = np.random.default_rng(1)
        x0 = rng.standard_normal((3, 4))
        w = rng.standard_normal((4, 5))

        x = Tensor(x0, trainable=True)
        backward(ad.sum_all(ad.relu(ad.matmul(x, Tensor(w)))))

        def f(flat):
            return float(np.sum(np.maximum(flat.reshape(3, 4) @ w, 0.0)))

        numeric = central_difference(f, x0.ravel()).reshape(3, 4)
        rel = np.abs(x.grad - numeric) / np.maximum(1.0, np.abs(numeric))
        assert rel.max() <= 1e-6

    def test_softmax_attention_chain_matches_central_differences(self):
        rng = np.random.default_rng(2)
        w0 = rng.standard_normal((4, 4))
        z = rng.standard_normal((2, 4))
        mix = rng.standard_normal((2, 4))

        w = Tensor(w0, trainable=True)
        out = ad.matmul(ad.softmax_rows(ad.matmul(Tensor(z), w)), Tensor(w0 * 0 + np.eye(4)))
        backward(ad.sum_all(ad.elemwise_mul(out, Tensor(mix))))

        def f(flat):
            logits = z @ flat.reshape(4, 4)
            e = np.exp(logits - logits.max(axis=-1, keepdims=True))
            soft = e / e.sum(axis=-1, keepdims=True)
            return float(np.sum(soft @ np.eye(4) * mix))

        numeric = central_difference(f, w0.ravel()).reshape(4, 4)
        rel = np.abs(w.grad - numeric) / np.maximum(1.0, np.abs(numeric))
        assert rel.max() <= 1e-6

    def test_bce_with_logits_gradient(self):
        rng = np.random.default_rng(3)
        z0 = rng.standard_normal((6, 1))
        y = (rng.random((6, 1)) < 0.5).astype(float)
        z = Tensor(z0, trainable=True)
        backward(ad.bce_with_logits(z, y))

        def f(flat):
            zz = flat.reshape(6, 1)
            return float(np.mean(np.maximum(zz, 0) - zz * y + np.log1p(np.exp(-np.abs(zz)))))

        numeric = central_difference(f, z0.ravel()).reshape(6, 1)
        np.testing.assert_allclose(z.grad, numeric, atol=1e-8)


class TestPermutationConsistency:
    def test_permuted_inputs_give_permuted_gradients(self):
        """matmul+softmax chain: backward commutes with row permutation."""
        rng = np.random.default_rng(4)
        x0 = rng.standard_normal((5, 3))
        w = rng.standard_normal((3, 3))
        mix = rng.standard_normal((5, 3))
        perm = rng.permutation(5)

        def grad_of(x_val, mix_val):
            x = Tensor(x_val, trainable=True)
            out = ad.softmax_rows(ad.matmul(x, Tensor(w)))
            backward(ad.sum_all(ad.elemwise_mul(out, Tensor(mix_val))))
            return x.grad

        base = grad_of(x0, mix)
        permuted = grad_of(x0[perm], mix[perm])
        assert np.max(np.abs(permuted - base[perm])) <= 1e-9


class TestTapeOrder:
    def test_creation_order_is_topological(self):
        x = Tensor(np.ones((2, 2)), trainable=True)
        y = ad.relu(x)
        z = ad.add(y, x)
        loss = ad.sum_all(ad.elemwise_mul(z, y))
        node = loss
        stack = [loss]
        while stack:
            t = stack.pop()
            for p in t._parents:
                assert p._id < t._id
                stack.append(p)


class TestGradCheck:
    def _store_with(self, name, value):
        store = ParameterStore()
        store.register(name, value)
        return store

    def test_linear_loss_is_exact(self):
        rng = np.random.default_rng(5)
        c = rng.standard_normal((3, 3))
        store = self._store_with("theta", rng.standard_normal((3, 3)))
        err = grad_check(lambda: ad.sum_all(ad.elemwise_mul(store["theta"], Tensor(c))), store)
        assert err <= 1e-10

    def test_epsilon_validation(self):
        store = self._store_with("theta", np.ones((1, 1)))
        loss = lambda: ad.sum_all(store["theta"])
        for eps in (0.0, -1e-5, 0.5):
            with pytest.raises(ValueError):
                grad_check(loss, store, epsilon=eps)

    def test_nondeterministic_loss_detected(self):
        store = self._store_with("theta", np.ones((1, 1)))
        rng = np.random.default_rng(0)

        def noisy():
            return ad.sum_all(ad.elemwise_mul(store["theta"], Tensor(rng.random((1, 1)))))

        with pytest.raises(ConsistencyError):
            grad_check(noisy, store)

    def test_nonlinear_block(self):
        rng = np.random.default_rng(6)
        store = ParameterStore()
        store.register("w", rng.standard_normal((4, 4)))
        store.register("b", rng.standard_normal(4))
        x = Tensor(rng.standard_normal((3, 4)))
        mix = Tensor(rng.standard_normal((3, 4)))

        def loss():
            h = ad.sigmoid(ad.add(ad.matmul(x, store["w"]), store["b"]))
            return ad.sum_all(ad.elemwise_mul(h, mix))

        assert grad_check(loss, store) <= 1e-6


class TestNoGrad:
    def test_no_tape_inside_no_grad(self):
        x = Tensor(np.ones((2, 2)), trainable=True)
        with ad.no_grad():
            y = ad.relu(x)
        assert y._backward is None
        backward(ad.sum_all(ad.relu(x)))
        assert x.grad is not None
