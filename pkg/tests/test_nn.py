import numpy as np
import pytest

from isdecode.errors import DataError, FormatError, ParameterError, TrainingError
from isdecode.nn import (AdamState, BaggingModel, MlpModel, NearestClassMean, TrainConfig,
                         adam_step, bagging_train, cross_entropy, load_model, mlp_backward,
                         mlp_forward, mlp_init, predict, predict_proba, save_model, train_mlp)
from isdecode.nn import _bootstrap


def loop_forward(model, x):
    """Scalar-loop oracle of the forward pass."""
    a = list(map(float, x))
    for l, W in enumerate(model.weights):
        z = []
        for i in range(W.shape[0]):
            s = model.biases[l][i] if model.use_bias else 0.0
            for j in range(W.shape[1]):
                s += W[i, j] * a[j]
            z.append(s)
        if l < len(model.weights) - 1:
            a = [max(0.0, v) for v in z]
        else:
            m = max(z)
            e = [np.exp(v - m) for v in z]
            a = [v / sum(e) for v in e]
    return np.array(a)


def mean_loss(model, X, y):
    return float(np.mean(cross_entropy(mlp_forward(model, X), y)))


def kink_free_model(rng, sizes, X, use_bias=True):
    for seed in range(1000):
        model = mlp_init(sizes, int(rng.integers(2**31)), use_bias)
        if use_bias:
            for b in model.biases:
                b[:] = rng.standard_normal(b.shape) * 0.1
        a = X
        ok = True
        for W, b in zip(model.weights[:-1], (model.biases or [0] * 9)):
            z = a @ W.T + b
            ok &= np.min(np.abs(z)) > 1e-4
            a = np.maximum(z, 0)
        if ok:
            return model
    raise RuntimeError("no kink-free model found")


def finite_difference_check(model, X, y, h=1e-6):
    g = mlp_backward(model, X, y)
    pairs = list(zip(model.weights, g.weights))
    if model.use_bias:
        pairs += list(zip(model.biases, g.biases))
    worst = 0.0
    for param, grad in pairs:
        num = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            old = param[idx]
            param[idx] = old + h
            up = mean_loss(model, X, y)
            param[idx] = old - h
            down = mean_loss(model, X, y)
            param[idx] = old
            num[idx] = (up - down) / (2 * h)
        worst = max(worst, np.linalg.norm(grad - num) / max(np.linalg.norm(num), 1e-300))
    return worst


class TestInit:
    def test_deterministic(self):
        a, b = mlp_init((5, 100, 3), seed=4), mlp_init((5, 100, 3), seed=4)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_shapes(self):
        m = mlp_init((1830, 100, 11))
        assert [w.shape for w in m.weights] == [(100, 1830), (11, 100)]
        assert all(np.all(b == 0) for b in m.biases)

    def test_variance(self):
        m = mlp_init((400, 300, 2), seed=1)
        assert np.var(m.weights[0]) == pytest.approx(2 / 400, rel=0.05)

    def test_zero_width(self):
        with pytest.raises(ParameterError):
            mlp_init((4, 0, 2))


class TestForward:
    def test_zero_model_uniform(self):
        m = mlp_init((3, 4, 5))
        m.weights = [np.zeros_like(w) for w in m.weights]
        np.testing.assert_allclose(mlp_forward(m, [1.0, 2.0, 3.0]), 0.2)

    def test_equal_logits(self):
        m = MlpModel((1, 2), [np.array([[1.5], [1.5]])], [np.zeros(2)])
        np.testing.assert_allclose(mlp_forward(m, [0.7]), [0.5, 0.5])

    def test_matches_loop_oracle(self, rng):
        for use_bias in (True, False):
            m = mlp_init((6, 9, 7, 4), seed=3, use_bias=use_bias)
            if use_bias:
                for b in m.biases:
                    b[:] = rng.standard_normal(b.size)
            for x in rng.standard_normal((5, 6)):
                np.testing.assert_allclose(mlp_forward(m, x), loop_forward(m, x), atol=1e-12)

    def test_rows_sum_to_one(self, rng):
        m = mlp_init((10, 20, 11), seed=0)
        P = mlp_forward(m, rng.standard_normal((200, 10)) * 30)
        assert np.all(P >= 0)
        assert np.max(np.abs(P.sum(axis=1) - 1)) <= 1e-12

    def test_non_finite(self):
        with pytest.raises(DataError):
            mlp_forward(mlp_init((2, 3, 2)), [np.nan, 1.0])

    def test_width_mismatch(self):
        with pytest.raises(ParameterError):
            mlp_forward(mlp_init((2, 3, 2)), [1.0, 2.0, 3.0])


class TestLoss:
    def test_certain(self):
        assert cross_entropy([0.0, 1.0], 1) == 0.0

    def test_uniform_11(self):
        assert cross_entropy(np.full(11, 1 / 11), 3) == pytest.approx(np.log(11))
        assert np.log(11) == pytest.approx(2.3979, abs=1e-4)

    def test_clip(self):
        assert cross_entropy([1.0, 0.0], 1) == pytest.approx(-np.log(1e-12))


class TestBackward:
    def test_output_layer_identity(self, rng):
        m = mlp_init((4, 6, 3), seed=2)
        x = rng.standard_normal(4)
        g = mlp_backward(m, x, 1)
        h = np.maximum(m.weights[0] @ x + m.biases[0], 0)
        p = mlp_forward(m, x)
        np.testing.assert_allclose(g.weights[1], np.outer(p - np.eye(3)[1], h), atol=1e-14)

    def test_finite_differences(self, rng):
        X = rng.standard_normal((5, 4))
        y = rng.integers(0, 3, 5)
        m = kink_free_model(rng, (4, 6, 3), X)
        assert finite_difference_check(m, X, y) <= 1e-5

    def test_finite_differences_deep_biasless(self, rng):
        X = rng.standard_normal((3, 3))
        y = np.array([0, 1, 1])
        m = kink_free_model(rng, (3, 5, 4, 2), X, use_bias=False)
        assert finite_difference_check(m, X, y) <= 1e-5

    def test_zero_input(self):
        m = mlp_init((3, 5, 2), seed=1)
        for b in m.biases:
            b[:] = 0.3
        g = mlp_backward(m, np.zeros(3), 0)
        np.testing.assert_array_equal(g.weights[0], 0.0)
        assert np.any(g.biases[0] != 0) and np.any(g.biases[1] != 0)


class TestAdam:
    def test_first_step(self, rng):
        g = rng.standard_normal(10)
        theta = rng.standard_normal(10)
        new, state = adam_step(theta, g, AdamState.zeros_like(theta), lr=0.001)
        np.testing.assert_allclose(new - theta, -0.001 * g / (np.abs(g) + 1e-8), rtol=1e-12)
        np.testing.assert_allclose(new - theta, -0.001 * np.sign(g), rtol=1e-6)
        assert state.t == 1

    def test_zero_gradient(self, rng):
        theta = rng.standard_normal(4)
        new, _ = adam_step(theta, np.zeros(4), AdamState.zeros_like(theta))
        np.testing.assert_array_equal(new, theta)

    def test_scalar_recurrence(self):
        lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
        grads = [0.5, -1.25, 2.0]
        theta, m, v = 1.0, 0.0, 0.0
        for t, g in enumerate(grads, start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            theta -= lr * (m / (1 - b1 ** t)) / ((v / (1 - b2 ** t)) ** 0.5 + eps)
        p, state = np.array([1.0]), AdamState.zeros_like(np.array([1.0]))
        for g in grads:
            p, state = adam_step(p, np.array([g]), state, lr, b1, b2, eps)
        assert p[0] == pytest.approx(theta, rel=1e-14)


def blobs(rng, n=200, sep=4.0):
    y = np.arange(n) % 2
    X = rng.standard_normal((n, 2)) + sep * np.c_[y, y] - sep / 2
    return X, y


class TestTraining:
    def test_separable_blobs(self, rng):
        X, y = blobs(rng)
        assert np.mean(NearestClassMean().fit(X, y).predict(X) == y) >= 0.99
        m = train_mlp(X, y, TrainConfig(hidden=16, epochs=200, seed=0))
        assert np.mean(predict(m, X) == y) >= 0.99

    def test_xor(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1, 1, 0])
        m = train_mlp(X, y, TrainConfig(hidden=8, epochs=2000, lr=0.01, seed=0))
        assert predict(m, X).tolist() == y.tolist()

    def test_loss_decreases(self, rng):
        X = rng.standard_normal((64, 5))
        y = (X[:, 0] + X[:, 1] > 0).astype(int)
        cfg = TrainConfig(hidden=20, epochs=50, batch_size=64, seed=3)
        from isdecode._rng import derive_seed
        init = mlp_init((5, 20, 2), derive_seed(3, "init"))
        trained = train_mlp(X, y, cfg)
        assert mean_loss(trained, X, y) < mean_loss(init, X, y)

    def test_deterministic(self, rng):
        X, y = blobs(rng, 60)
        cfg = TrainConfig(hidden=10, epochs=5, seed=9)
        a, b = train_mlp(X, y, cfg), train_mlp(X, y, cfg)
        assert np.array_equal(a.flat(), b.flat())
        c = train_mlp(X, y, TrainConfig(hidden=10, epochs=5, seed=10))
        assert not np.array_equal(a.flat(), c.flat())

    def test_single_class(self, rng):
        with pytest.raises(TrainingError):
            train_mlp(rng.standard_normal((5, 2)), np.zeros(5, int))

    def test_zero_epochs(self, rng):
        X, y = blobs(rng, 10)
        with pytest.raises(ParameterError):
            train_mlp(X, y, TrainConfig(epochs=0))

    def test_n_classes_wider_than_labels(self, rng):
        X, y = blobs(rng, 20)
        m = train_mlp(X, y, TrainConfig(hidden=4, epochs=2), n_classes=4)
        assert m.sizes[-1] == 4


class TestBagging:
    def test_bootstrap_stratified(self):
        y = np.repeat([0, 1, 2], [10, 20, 30])
        idx = _bootstrap(y, 1.0, np.random.default_rng(0))
        assert np.bincount(y[idx]).tolist() == [10, 20, 30]
        idx = _bootstrap(y, 0.5, np.random.default_rng(0))
        assert np.bincount(y[idx]).tolist() == [5, 10, 15]

    def test_single_estimator(self, rng):
        X, y = blobs(rng, 40)
        cfg = TrainConfig(hidden=5, epochs=3, seed=2)
        bag = bagging_train(X, y, 1, cfg)
        again = bagging_train(X, y, 1, cfg)
        np.testing.assert_array_equal(predict_proba(bag, X), predict_proba(bag.members[0], X))
        np.testing.assert_array_equal(bag.members[0].flat(), again.members[0].flat())

    def test_distinct_bootstraps(self, rng):
        X, y = blobs(rng, 40)
        bag = bagging_train(X, y, 3, TrainConfig(hidden=5, epochs=1, seed=2))
        draws = [_bootstrap(y, 1.0, np.random.default_rng(s)) for s in bag.seeds]
        assert len(set(bag.seeds)) == 3
        assert not np.array_equal(draws[0], draws[1])

    def test_threads_do_not_change_result(self, rng):
        X, y = blobs(rng, 40)
        cfg = TrainConfig(hidden=5, epochs=3, seed=2)
        a, b = bagging_train(X, y, 4, cfg), bagging_train(X, y, 4, cfg, n_jobs=3)
        np.testing.assert_array_equal(predict_proba(a, X), predict_proba(b, X))

    def test_identical_members(self, rng):
        m = mlp_init((2, 4, 2), seed=1)
        X = rng.standard_normal((6, 2))
        np.testing.assert_allclose(predict_proba(BaggingModel([m, m, m]), X),
                                   predict_proba(m, X), atol=1e-15)

    def test_averaging(self):
        big = 50.0
        a = MlpModel((1, 2), [np.array([[0.0], [0.0]])], [np.array([big, -big])])
        b = MlpModel((1, 2), [np.array([[0.0], [0.0]])], [np.array([-big, big])])
        np.testing.assert_allclose(predict_proba(BaggingModel([a, b]), [[1.0]]), [[0.5, 0.5]])

    def test_width_mismatch(self):
        with pytest.raises(ParameterError):
            predict_proba(BaggingModel([mlp_init((2, 3, 2))]), np.zeros((1, 3)))

    def test_empty(self):
        with pytest.raises(ParameterError):
            BaggingModel([])

    @pytest.mark.slow
    def test_variance_reduction(self):
        # small overlapping sample; only training randomness varies across seeds
        r = np.random.default_rng(5)
        Xtr, ytr = blobs(r, 40, sep=1.0)
        Xte, yte = blobs(r, 600, sep=1.0)
        cfg = dict(hidden=32, epochs=80, lr=0.01, batch_size=8)
        single, bagged = [], []
        for s in range(20):
            m = train_mlp(Xtr, ytr, TrainConfig(seed=s, **cfg))
            single.append(np.mean(predict(m, Xte) == yte))
            b = bagging_train(Xtr, ytr, 25, TrainConfig(seed=1000 + s, **cfg))
            bagged.append(np.mean(predict(b, Xte) == yte))
        assert np.std(bagged) <= np.std(single)


class TestNearestClassMean:
    def test_predicts_closest_mean(self):
        X = np.array([[0.0, 0.0], [0.0, 2.0], [10.0, 0.0], [10.0, 2.0]])
        m = NearestClassMean().fit(X, [3, 3, 7, 7])
        assert m.predict([[1.0, 1.0], [9.0, 5.0]]).tolist() == [3, 7]


class TestSerialization:
    def test_mlp_round_trip(self, tmp_path):
        m = mlp_init((4, 7, 3), seed=1)
        save_model(m, tmp_path / "m.ism")
        back = load_model(tmp_path / "m.ism")
        assert back.sizes == m.sizes
        np.testing.assert_array_equal(back.flat(), m.flat())
        assert (tmp_path / "m.ism").read_bytes()[:4] == b"ISM1"

    def test_bagging_round_trip(self, tmp_path, rng):
        X, y = blobs(rng, 30)
        bag = bagging_train(X, y, 3, TrainConfig(hidden=4, epochs=2, use_bias=False))
        save_model(bag, tmp_path / "b.ism")
        back = load_model(tmp_path / "b.ism")
        assert isinstance(back, BaggingModel) and back.seeds == bag.seeds
        np.testing.assert_array_equal(predict_proba(back, X), predict_proba(bag, X))

    def test_size_layout(self, tmp_path):
        m = mlp_init((3, 2, 2), seed=0)
        save_model(m, tmp_path / "m.ism")
        n_params = 3 * 2 + 2 + 2 * 2 + 2
        assert (tmp_path / "m.ism").stat().st_size == 16 + 3 * 4 + 8 + 8 * n_params

    def test_corrupt(self, tmp_path):
        save_model(mlp_init((3, 2, 2)), tmp_path / "m.ism")
        raw = (tmp_path / "m.ism").read_bytes()
        (tmp_path / "t.ism").write_bytes(raw[:-8])
        with pytest.raises(FormatError):
            load_model(tmp_path / "t.ism")
        (tmp_path / "x.ism").write_bytes(b"XXXX" + raw[4:])
        with pytest.raises(FormatError):
            load_model(tmp_path / "x.ism")
