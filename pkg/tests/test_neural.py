import json

import numpy as np
import pytest

from bmui.errors import CorruptModelError, InsufficientDataError
from bmui.neural import (
    CLASS_NAMES,
    ClassifierHyperparams,
    DirectionClassifier,
    EnvelopeRegressor,
    RegressorHyperparams,
    TrainConfig,
    grad_check,
    load_model,
    save_model,
    split_by_trial,
    train_classifier,
    train_regressor,
)
from bmui.neural.gradcheck import TINY_CLASSIFIER, TINY_REGRESSOR
from bmui.neural.ops import gelu, layer_norm, sinusoidal_positions, softmax
from bmui.sessions import WindowPair


def tiny_regressor(seed=0):
    return EnvelopeRegressor(TINY_REGRESSOR, seed=seed)


class TestOps:
    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        a = softmax(rng.normal(scale=3.0, size=(4, 7)))
        np.testing.assert_allclose(a.sum(axis=-1), 1.0, atol=1e-12)
        assert a.min() >= 0.0

    def test_softmax_shift_invariant(self):
        x = np.array([[1.0, 2.0, 3.0]])
        np.testing.assert_allclose(softmax(x), softmax(x + 100.0), atol=1e-12)

    def test_gelu_limits(self):
        assert gelu(np.array([0.0]))[0] == 0.0
        assert gelu(np.array([10.0]))[0] == pytest.approx(10.0, abs=1e-6)
        assert gelu(np.array([-10.0]))[0] == pytest.approx(0.0, abs=1e-6)

    def test_layer_norm_stats(self):
        rng = np.random.default_rng(1)
        x = rng.normal(loc=5.0, scale=3.0, size=(2, 6, 16))
        y, _ = layer_norm(x, np.ones(16), np.zeros(16))
        np.testing.assert_allclose(y.mean(axis=-1), 0.0, atol=1e-10)
        np.testing.assert_allclose(y.std(axis=-1), 1.0, atol=1e-3)

    def test_sinusoidal_positions_bounded_and_distinct(self):
        pos = sinusoidal_positions(20, 16)
        assert pos.shape == (20, 16)
        assert np.abs(pos).max() <= 1.0
        assert np.linalg.norm(pos[0] - pos[1]) > 1e-3


class TestRegressorForward:
    def test_output_shape(self):
        m = tiny_regressor()
        x = np.random.default_rng(0).normal(size=(3, 20))
        assert m.forward(x).shape == (2,)
        xb = np.random.default_rng(0).normal(size=(5, 3, 20))
        assert m.forward(xb).shape == (5, 2)

    def test_deterministic(self):
        x = np.random.default_rng(1).normal(size=(3, 20))
        np.testing.assert_array_equal(tiny_regressor(7).forward(x), tiny_regressor(7).forward(x))
        assert not np.array_equal(tiny_regressor(7).forward(x), tiny_regressor(8).forward(x))

    def test_attention_rows_sum_to_one(self):
        m = tiny_regressor()
        x = np.random.default_rng(2).normal(size=(2, 3, 20))
        _, cache = m.forward(x, want_cache=True)
        attn = cache["layers"][0]["attn"]
        np.testing.assert_allclose(attn.sum(axis=-1), 1.0, atol=1e-10)

    def test_sensitive_to_token_order(self):
        # positional encoding must break permutation symmetry
        m = tiny_regressor()
        x = np.random.default_rng(3).normal(size=(3, 20))
        flipped = x[:, ::-1].copy()
        assert np.abs(m.forward(x) - m.forward(flipped)).max() > 1e-6

    def test_standardize_round_trip(self):
        m = tiny_regressor()
        m.set_standardization(np.array([1.0, -2.0]), np.array([3.0, 0.5]))
        y = np.random.default_rng(4).normal(size=(10, 2))
        np.testing.assert_allclose(m.destandardize(m.standardize(y)), y, atol=1e-9)

    def test_predict_non_negative(self):
        m = tiny_regressor()
        m.set_standardization(np.array([-5.0, -5.0]), np.array([1.0, 1.0]))
        x = np.random.default_rng(5).normal(size=(4, 3, 20))
        assert m.predict(x).min() >= 0.0

    def test_bad_input_shape_rejected(self):
        with pytest.raises(ValueError):
            tiny_regressor().forward(np.zeros((4, 20)))


class TestGradients:
    def test_regressor_gradcheck(self):
        for seed in range(3):
            assert grad_check("regressor", seed) <= 1e-4

    def test_classifier_gradcheck(self):
        for seed in range(3):
            assert grad_check("classifier", seed) <= 1e-4

    def test_detects_corrupted_gradient(self):
        # sanity check on the checker itself: a broken backward must be caught
        m = tiny_regressor(0)
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 3, 20))
        y = rng.normal(size=(2, 2))
        yhat, cache = m.forward(x, want_cache=True)
        grads = m.backward(cache, 2.0 * (yhat - y) / yhat.size)
        grads["head.W"] = grads["head.W"] * 1.5  # corrupt

        def loss(params):
            saved = {k: m.params[k].copy() for k in params}
            m.params.update(params)
            out = m.forward(x)
            m.params.update(saved)
            return float(np.mean((out - y) ** 2))

        w = m.params["head.W"]
        i = (0, 0)
        eps = 1e-5
        wp = w.copy(); wp[i] += eps
        wm = w.copy(); wm[i] -= eps
        numeric = (loss({"head.W": wp}) - loss({"head.W": wm})) / (2 * eps)
        rel = abs(grads["head.W"][i] - numeric) / max(1e-8, abs(numeric))
        assert rel > 1e-2


def make_window_set(n_trials=8, per_trial=30, n_ch=3, n_out=2, window=20, seed=0):
    rng = np.random.default_rng(seed)
    windows = []
    for t in range(n_trials):
        for _ in range(per_trial):
            x = rng.normal(size=(n_ch, window))
            y = rng.uniform(0.0, 1.0, size=n_out)
            windows.append(WindowPair(x=x, y=y, trial_id=t, trial_label="flex-low", t_end=0))
    return windows


class TestSplit:
    def test_disjoint_and_complete(self):
        windows = make_window_set(n_trials=10)
        train, val, test = split_by_trial(windows, (0.7, 0.15, 0.15), seed=0)
        ids = lambda ws: {w.trial_id for w in ws}
        assert ids(train) & ids(val) == set()
        assert ids(train) & ids(test) == set()
        assert ids(val) & ids(test) == set()
        assert len(train) + len(val) + len(test) == len(windows)

    def test_val_and_test_nonempty(self):
        train, val, test = split_by_trial(make_window_set(n_trials=10), (0.7, 0.15, 0.15), seed=1)
        assert val and test and len(train) > len(val)

    def test_seed_changes_assignment(self):
        windows = make_window_set(n_trials=12)
        a = split_by_trial(windows, (0.7, 0.15, 0.15), seed=0)
        b = split_by_trial(windows, (0.7, 0.15, 0.15), seed=1)
        assert {w.trial_id for w in a[2]} != {w.trial_id for w in b[2]}

    def test_deterministic(self):
        windows = make_window_set(n_trials=12)
        a = split_by_trial(windows, (0.7, 0.15, 0.15), seed=5)
        b = split_by_trial(windows, (0.7, 0.15, 0.15), seed=5)
        assert [w.trial_id for w in a[0]] == [w.trial_id for w in b[0]]


class TestTraining:
    def test_constant_target_converges(self):
        rng = np.random.default_rng(0)
        target = np.array([0.3, 0.7])
        windows = [
            WindowPair(
                x=rng.normal(size=(3, 20)), y=target + rng.normal(scale=0.01, size=2),
                trial_id=t, trial_label="flex-low", t_end=0,
            )
            for t in range(10)
            for _ in range(15)
        ]
        cfg = TrainConfig(epochs=20, batch_size=16, seed=0)
        model, history = train_regressor(windows, cfg, hp=TINY_REGRESSOR)
        x = rng.normal(size=(20, 3, 20))
        preds = model.predict(x)
        assert np.mean((preds - target) ** 2) <= 1e-3
        assert history[-1]["val_loss"] <= history[0]["val_loss"]

    def test_too_few_windows_rejected(self):
        with pytest.raises(InsufficientDataError):
            train_regressor(make_window_set(n_trials=2, per_trial=5), TrainConfig(epochs=1))

    def test_classifier_learns_separable_toy(self):
        rng = np.random.default_rng(1)
        xs, ys = [], []
        for _ in range(60):
            for label in range(3):
                base = np.zeros((2, 10))
                if label == 0:
                    base[0] += 1.0
                elif label == 1:
                    base[1] += 1.0
                xs.append(base + rng.normal(scale=0.1, size=(2, 10)))
                ys.append(CLASS_NAMES[label])
        x = np.array(xs)
        y = np.array([CLASS_NAMES.index(s) for s in ys])
        cfg = TrainConfig(epochs=30, batch_size=24, seed=0)
        model, history = train_classifier(x, ys, cfg, hp=TINY_CLASSIFIER)
        probs = model.probabilities(x)
        acc = float((probs.argmax(axis=1) == y).mean())
        assert acc >= 0.95

    def test_classifier_rejects_single_class(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(80, 2, 10))
        labels = ["flex"] * 80
        with pytest.raises(InsufficientDataError):
            train_classifier(x, labels, TrainConfig(epochs=1))

    def test_classifier_probabilities_sum_to_one(self):
        m = DirectionClassifier(TINY_CLASSIFIER, seed=0)
        x = np.random.default_rng(3).normal(size=(5, 2, 10))
        np.testing.assert_allclose(m.probabilities(x).sum(axis=1), 1.0, atol=1e-10)

    def test_predict_direction_returns_class_name(self):
        m = DirectionClassifier(TINY_CLASSIFIER, seed=0)
        x = np.random.default_rng(4).normal(size=(2, 10))
        assert m.predict_direction(x) in CLASS_NAMES


class TestModelIO:
    def test_regressor_round_trip(self, tmp_path):
        m = tiny_regressor(3)
        m.set_standardization(np.array([0.1, 0.2]), np.array([1.5, 2.5]))
        path = tmp_path / "model.json"
        save_model(m, path)
        back = load_model(path)
        x = np.random.default_rng(0).normal(size=(2, 3, 20))
        np.testing.assert_array_equal(back.predict(x), m.predict(x))

    def test_classifier_round_trip(self, tmp_path):
        m = DirectionClassifier(TINY_CLASSIFIER, seed=5)
        path = tmp_path / "cls.json"
        save_model(m, path)
        back = load_model(path)
        x = np.random.default_rng(1).normal(size=(4, 2, 10))
        np.testing.assert_array_equal(back.probabilities(x), m.probabilities(x))

    def test_rejects_truncated_file(self, tmp_path):
        m = tiny_regressor()
        path = tmp_path / "model.json"
        save_model(m, path)
        path.write_text(path.read_text()[: path.stat().st_size // 2])
        with pytest.raises(CorruptModelError):
            load_model(path)

    def test_rejects_wrong_format(self, tmp_path):
        m = tiny_regressor()
        path = tmp_path / "model.json"
        save_model(m, path)
        blob = json.loads(path.read_text())
        blob["format"] = "bmui-model/9"
        path.write_text(json.dumps(blob))
        with pytest.raises(CorruptModelError):
            load_model(path)

    def test_rejects_shape_mismatch(self, tmp_path):
        m = tiny_regressor()
        path = tmp_path / "model.json"
        save_model(m, path)
        blob = json.loads(path.read_text())
        blob["weights"]["head.b"] = [0.0, 0.0, 0.0]
        path.write_text(json.dumps(blob))
        with pytest.raises(CorruptModelError):
            load_model(path)

    def test_rejects_missing_weight(self, tmp_path):
        m = tiny_regressor()
        path = tmp_path / "model.json"
        save_model(m, path)
        blob = json.loads(path.read_text())
        del blob["weights"]["head.W"]
        path.write_text(json.dumps(blob))
        with pytest.raises(CorruptModelError):
            load_model(path)
