"""AdamW behavior and ParameterStore bookkeeping/serialization."""

import numpy as np
import pytest

from relate import autodiff as ad
from relate.optim import AdamW
from relate.params import ParameterStore, read_parameter_file

from reference import adamw_scalar_step


class TestAdamW:
    def test_decay_only_step_scales_theta(self):
        store = ParameterStore()
        theta = store.register("theta", np.full((2, 2), 3.0))
        opt = AdamW(store, lr=5e-3, weight_decay=0.01)
        opt.step()  # gradient is zero
        np.testing.assert_allclose(theta.data, 3.0 * (1 - 5e-5), rtol=0, atol=1e-15)

    def test_lr_zero_is_null_step(self):
        store = ParameterStore()
        theta = store.register("theta", np.arange(4.0))
        theta.grad[...] = 1.0
        AdamW(store, lr=0.0).step()
        np.testing.assert_array_equal(theta.data, np.arange(4.0))

    def test_negative_lr_rejected(self):
        store = ParameterStore()
        store.register("theta", np.ones(1))
        with pytest.raises(ValueError):
            AdamW(store, lr=-1e-3)

    def test_scalar_oracle_first_step(self):
        store = ParameterStore()
        theta = store.register("theta", np.array([1.0]))
        theta.grad[...] = 0.5
        opt = AdamW(store, lr=5e-3)
        opt.step()
        expected, _, _ = adamw_scalar_step(1.0, 0.5, 0.0, 0.0, t=1, lr=5e-3, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0)
        assert abs(theta.data[0] - expected) <= 1e-12

    def test_scalar_oracle_three_steps_with_decay(self):
        store = ParameterStore()
        theta = store.register("theta", np.array([2.0]))
        opt = AdamW(store, lr=1e-2, weight_decay=0.05)
        ref_theta, m, v = 2.0, 0.0, 0.0
        grads = [0.5, -0.3, 1.1]
        for t, g in enumerate(grads, start=1):
            theta.grad[...] = g
            opt.step()
            ref_theta, m, v = adamw_scalar_step(ref_theta, g, m, v, t, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.05)
            assert abs(theta.data[0] - ref_theta) <= 1e-12

    def test_gradients_zeroed_after_step(self):
        store = ParameterStore()
        theta = store.register("theta", np.ones(3))
        theta.grad[...] = 2.0
        AdamW(store, lr=1e-3).step()
        np.testing.assert_array_equal(theta.grad, np.zeros(3))

    def test_nontrainable_entries_untouched(self):
        store = ParameterStore()
        frozen = store.register("frozen", np.ones(2), trainable=False)
        live = store.register("live", np.ones(2))
        live.grad[...] = 1.0
        AdamW(store, lr=0.1).step()
        np.testing.assert_array_equal(frozen.data, np.ones(2))
        assert not np.allclose(live.data, np.ones(2))


class TestParameterStore:
    def test_duplicate_name_rejected(self):
        store = ParameterStore()
        store.register("a.b", np.ones(2))
        with pytest.raises(ValueError):
            store.register("a.b", np.ones(2))

    def test_total_count_sums_trainable_sizes(self):
        store = ParameterStore()
        store.register("w", np.ones((3, 4)))
        store.register("b", np.ones(4))
        store.register("frozen", np.ones((10, 10)), trainable=False)
        assert store.total_count() == 12 + 4

    def test_total_count_prefix_filter(self):
        store = ParameterStore()
        store.register("enc.w", np.ones((2, 2)))
        store.register("enc.b", np.ones(2))
        store.register("head.w", np.ones(5))
        assert store.total_count("enc") == 6
        assert store.total_count("head") == 5

    def test_gradient_shape_matches_value_shape(self):
        store = ParameterStore()
        for name, shape in (("a", (3,)), ("b", (2, 5)), ("c", (2, 3, 4))):
            t = store.register(name, np.zeros(shape))
            assert t.grad.shape == t.data.shape

    def test_zero_grads(self):
        store = ParameterStore()
        t = store.register("x", np.ones(3))
        t.grad[...] = 5.0
        store.zero_grads()
        np.testing.assert_array_equal(t.grad, np.zeros(3))


class TestSerialization:
    def _populated_store(self):
        rng = np.random.default_rng(0)
        store = ParameterStore()
        store.register("enc.w", rng.standard_normal((3, 4)))
        store.register("enc.b", rng.standard_normal(4))
        store.register("latents.z0", rng.standard_normal((2, 4)))
        return store

    def test_round_trip(self, tmp_path):
        store = self._populated_store()
        path = tmp_path / "model.bin"
        store.save(path)
        other = self._populated_store()
        for _, t in other.items():
            t.data[...] = 0.0
        other.load(path)
        for name, t in store.items():
            np.testing.assert_array_equal(other[name].data, t.data)

    def test_file_layout_magic_and_header(self, tmp_path):
        store = self._populated_store()
        path = tmp_path / "model.bin"
        store.save(path)
        raw = path.read_bytes()
        assert raw[:8] == b"RELATEPS"
        version = int.from_bytes(raw[8:12], "little")
        count = int.from_bytes(raw[12:16], "little")
        assert version == 1
        assert count == 3

    def test_read_parameter_file(self, tmp_path):
        store = self._populated_store()
        path = tmp_path / "model.bin"
        store.save(path)
        loaded = read_parameter_file(path)
        assert set(loaded) == {"enc.w", "enc.b", "latents.z0"}
        np.testing.assert_array_equal(loaded["enc.w"], store["enc.w"].data)

    def test_shape_mismatch_rejected(self, tmp_path):
        store = self._populated_store()
        path = tmp_path / "model.bin"
        store.save(path)
        other = ParameterStore()
        other.register("enc.w", np.zeros((4, 3)))
        other.register("enc.b", np.zeros(4))
        other.register("latents.z0", np.zeros((2, 4)))
        with pytest.raises(ValueError):
            other.load(path)

    def test_subset_load_tolerates_extra_file_entries(self, tmp_path):
        store = self._populated_store()
        path = tmp_path / "model.bin"
        store.save(path)
        partial = ParameterStore()
        partial.register("enc.w", np.zeros((3, 4)))
        with pytest.raises(ValueError):
            partial.load(path)
        partial.load(path, subset_ok=True)
        np.testing.assert_array_equal(partial["enc.w"].data, store["enc.w"].data)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(ValueError):
            read_parameter_file(path)
