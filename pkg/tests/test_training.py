"""Loss, optimizer and training-loop contracts."""

import numpy as np
import pytest

from naada.network import NetworkSpec, init_network
from naada.tensor import Tensor
from naada.training import (
    AdamState,
    EpochStats,
    TrainConfig,
    TrainingDiverged,
    adam_step,
    mse_loss,
    train,
    write_history_csv,
)


class TestMseLoss:
    def test_identical_inputs_give_zero(self):
        x = Tensor(np.random.default_rng(0).uniform(size=(2, 1, 4, 4)))
        assert mse_loss(x, Tensor(x.data.copy())).item() == 0.0

    def test_constant_offset(self):
        a = Tensor(np.full((3, 5), 0.4))
        b = Tensor(np.full((3, 5), 0.5))
        assert mse_loss(a, b).item() == pytest.approx(0.01, rel=1e-6)

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(2, 3, 4))
        b = rng.normal(size=(2, 3, 4))
        expected = 0.0
        for x, y in zip(a.ravel(), b.ravel()):
            expected += (x - y) ** 2
        expected /= a.size
        got = mse_loss(Tensor(a), Tensor(b)).item()
        assert got == pytest.approx(expected, abs=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            mse_loss(Tensor(np.zeros((2, 2))), Tensor(np.zeros((2, 3))))

    def test_non_negative_and_zero_iff_equal(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(4, 4))
        b = a.copy()
        b[0, 0] += 1e-6
        assert mse_loss(Tensor(a), Tensor(b)).item() > 0.0


def _param(value, name="w"):
    t = Tensor(np.asarray(value, dtype=np.float64), requires_grad=True)
    return {name: t}, t


class TestAdam:
    def test_first_step_magnitude_is_lr_times_sign(self):
        params, w = _param([1.0, -2.0, 3.0])
        w.grad = np.array([0.3, -0.7, 1e-3])
        cfg = TrainConfig(lr=0.01)
        adam_step(params, AdamState(), cfg)
        # bias-corrected first step: m_hat/sqrt(v_hat) = g/|g|
        expected = np.array([1.0, -2.0, 3.0]) - 0.01 * np.sign([0.3, -0.7, 1e-3])
        np.testing.assert_allclose(w.data, expected, atol=1e-4)

    def test_zero_gradient_leaves_parameters_unchanged(self):
        params, w = _param([1.0, 2.0])
        st = AdamState()
        for _ in range(5):
            w.grad = np.zeros(2)
            adam_step(params, st, TrainConfig())
        np.testing.assert_array_equal(w.data, [1.0, 2.0])

    def test_missing_gradient_rejected(self):
        params, w = _param([1.0])
        with pytest.raises(ValueError):
            adam_step(params, AdamState(), TrainConfig())

    def test_quadratic_bowl_converges_monotonically_after_warmup(self):
        rng = np.random.default_rng(3)
        params, w = _param(rng.normal(size=8))
        st = AdamState()
        cfg = TrainConfig(lr=0.01)
        losses = []
        for _ in range(100):
            losses.append(float(np.sum(w.data**2)))
            w.grad = 2.0 * w.data
            adam_step(params, st, cfg)
        warmup = 10
        assert all(b <= a + 1e-12 for a, b in zip(losses[warmup:], losses[warmup + 1 :]))
        assert losses[-1] < 0.5 * losses[0]

    def test_step_counter_advances(self):
        params, w = _param([1.0])
        st = AdamState()
        w.grad = np.array([1.0])
        adam_step(params, st, TrainConfig())
        assert st.step == 1 and "w" in st.m


def _toy_data(n=48, patch=16, seed=0):
    rng = np.random.default_rng(seed)
    clean = rng.uniform(0.2, 0.8, (n, 1, patch, patch)).astype(np.float32)
    noisy = np.clip(clean + rng.normal(0, 0.2, clean.shape), 0, 1).astype(np.float32)
    return (noisy[: n // 2], clean[: n // 2]), (noisy[n // 2 :], clean[n // 2 :])


def _tiny_state(seed=0):
    return init_network(NetworkSpec(width_mult=1 / 1024, patch=16), seed=seed)


class TestTrainLoop:
    def test_patience_one_frozen_model_stops_after_two_validations(self):
        tr, va = _toy_data()
        state = _tiny_state()
        state.update_running = False  # batchnorm buffers must not drift either
        # lr far below float32 resolution: parameters cannot move, so the
        # second validation can never beat the first
        cfg = TrainConfig(lr=1e-30, batch_size=8, max_epochs=50, patience=1, seed=0)
        result = train(state, tr, va, cfg)
        assert result.stopped_early
        assert len(result.history) == 2  # epoch 1 improves on inf; epoch 2 does not

    def test_same_seed_identical_history(self):
        tr, va = _toy_data()
        cfg = TrainConfig(lr=0.005, batch_size=8, max_epochs=3, patience=5, seed=7)
        r1 = train(_tiny_state(seed=1), tr, va, cfg)
        r2 = train(_tiny_state(seed=1), tr, va, cfg)
        assert [h.row() for h in r1.history] == [h.row() for h in r2.history]

    def test_best_checkpoint_dominates_logged_validations(self):
        tr, va = _toy_data()
        cfg = TrainConfig(lr=0.01, batch_size=8, max_epochs=6, patience=6, seed=3)
        result = train(_tiny_state(seed=2), tr, va, cfg)
        logged = [h.val_loss for h in result.history if np.isfinite(h.val_loss)]
        assert result.best_val_loss <= min(logged) + 1e-12

    def test_diverged_loss_aborts_with_diagnostic(self):
        tr, va = _toy_data()
        state = _tiny_state(seed=4)
        state.decoder[-1].bias.data[:] = np.nan  # poison one parameter
        with pytest.raises(TrainingDiverged, match="epoch 1"):
            train(state, tr, va, TrainConfig(batch_size=8, max_epochs=2, seed=0))

    def test_empty_dataset_rejected(self):
        tr, va = _toy_data()
        empty = (tr[0][:0], tr[1][:0])
        with pytest.raises(ValueError):
            train(_tiny_state(), empty, va, TrainConfig())

    def test_history_csv_round_trip(self, tmp_path):
        rows = [EpochStats(1, 0.5, 0.4, 3.0, 4.0), EpochStats(2, 0.3, 0.2, 5.2, 7.0)]
        path = tmp_path / "history.csv"
        write_history_csv(rows, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss,train_psnr,val_psnr"
        assert len(lines) == 3 and lines[1].startswith("1,0.5,0.4")

    def test_validation_interval_skips_epochs(self):
        tr, va = _toy_data()
        cfg = TrainConfig(lr=0.001, batch_size=8, max_epochs=4, patience=10,
                          seed=5, val_interval=2)
        result = train(_tiny_state(seed=5), tr, va, cfg)
        with_val = [h for h in result.history if np.isfinite(h.val_loss)]
        assert [h.epoch for h in with_val] == [2, 4]

    def test_config_validation(self):
        for bad in (dict(lr=0.0), dict(beta1=1.0), dict(patience=0), dict(val_interval=0)):
            with pytest.raises(ValueError):
                TrainConfig(**bad)
