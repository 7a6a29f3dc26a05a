"""MLP tests: forward values, loss, finite-difference gradient checks,
training behavior, and determinism."""

import numpy as np
import pytest

from nidb.errors import DimensionMismatch, LengthMismatch, NonFiniteLoss
from nidb.neural import (
    MlpArchitecture,
    MlpParams,
    TrainConfig,
    bce_loss,
    forward,
    gradients,
    init_mlp,
    predict,
    train,
)
from nidb.neural import _epoch_permutation
from nidb.preprocess import design_matrix_from_arrays


def _unit_chain_params(first_weight=1.0):
    """Six 1x1 layers so the whole network is an analytic scalar map."""
    weights = [np.array([[first_weight]])] + [np.array([[1.0]])] * 5
    biases = [np.zeros(1) for _ in range(6)]
    return MlpParams(weights, biases)


def _blobs(n_per_class=100, seed=0, spread=0.7):
    rng = np.random.default_rng(seed)
    a = rng.normal((-2.0, 0.0), spread, size=(n_per_class, 2))
    b = rng.normal((2.0, 0.0), spread, size=(n_per_class, 2))
    X = np.vstack([a, b])
    y = np.array([0] * n_per_class + [1] * n_per_class)
    perm = rng.permutation(len(y))
    return X[perm], y[perm]


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def logistic_regression_accuracy(X, y, steps=2000, lr=0.5):
    """Plain full-batch logistic regression, used as a separability oracle."""
    w = np.zeros(X.shape[1])
    b = 0.0
    n = len(y)
    for _ in range(steps):
        p = _sigmoid(X @ w + b)
        grad_w = X.T @ (p - y) / n
        grad_b = float(np.mean(p - y))
        w -= lr * grad_w
        b -= lr * grad_b
    return float(np.mean((_sigmoid(X @ w + b) >= 0.5) == y))


class TestInit:
    def test_shapes_chain(self):
        params = init_mlp(MlpArchitecture(3, (4, 4, 4, 4, 4)), seed=0)
        assert [w.shape for w in params.weights] == [
            (3, 4), (4, 4), (4, 4), (4, 4), (4, 4), (4, 1)]
        assert [b.shape for b in params.biases] == [(4,)] * 5 + [(1,)]

    def test_deterministic_under_seed(self):
        arch = MlpArchitecture(5, (3, 3, 3, 3, 3))
        a = init_mlp(arch, seed=7)
        b = init_mlp(arch, seed=7)
        assert all(np.array_equal(x, y)
                   for x, y in zip(a.weights, b.weights))
        c = init_mlp(arch, seed=8)
        assert not all(np.array_equal(x, y)
                       for x, y in zip(a.weights, c.weights))

    def test_biases_zero(self):
        params = init_mlp(MlpArchitecture(4, (6, 5, 4, 3, 2)), seed=1)
        assert all((b == 0).all() for b in params.biases)

    def test_he_scaling(self):
        params = init_mlp(MlpArchitecture(1000, (500, 4, 4, 4, 4)), seed=2)
        observed = params.weights[0].std()
        assert observed == pytest.approx(np.sqrt(2 / 1000), rel=0.05)

    def test_architecture_validation(self):
        with pytest.raises(ValueError):
            MlpArchitecture(3, (4, 4, 4))
        with pytest.raises(ValueError):
            MlpArchitecture(3, (4, 4, 4, 4, 0))


class TestForward:
    def test_zero_params_give_half(self):
        arch = MlpArchitecture(3, (4, 4, 4, 4, 4))
        params = init_mlp(arch, seed=0)
        params.weights = [np.zeros_like(w) for w in params.weights]
        p = forward(params, np.ones((5, 3)))
        assert np.array_equal(p, np.full(5, 0.5))

    def test_unit_chain_sigmoid_of_one(self):
        p = forward(_unit_chain_params(), np.array([[1.0]]))
        assert p[0] == pytest.approx(0.7310585786300049, abs=1e-9)

    def test_relu_kills_negative_path(self):
        # First pre-activation is -3, so every later layer sees zero.
        p = forward(_unit_chain_params(first_weight=-3.0), np.array([[1.0]]))
        assert p[0] == 0.5

    def test_outputs_strictly_inside_unit_interval(self):
        params = _unit_chain_params()
        params.weights[0] = np.array([[1000.0]])
        huge = forward(params, np.array([[1000.0], [0.0]]))
        assert (huge > 0).all() and (huge < 1).all()

    def test_dimension_mismatch(self):
        params = _unit_chain_params()
        with pytest.raises(DimensionMismatch):
            forward(params, np.zeros((2, 3)))


class TestBceLoss:
    def test_half_against_one_is_ln2(self):
        assert bce_loss([0.5], [1]) == pytest.approx(np.log(2), abs=1e-12)

    def test_perfect_prediction_near_zero(self):
        assert bce_loss([1.0, 0.0], [1, 0]) <= 1e-6

    def test_two_sample_value(self):
        expected = -(np.log(0.9) + np.log(0.9)) / 2
        assert bce_loss([0.9, 0.1], [1, 0]) == pytest.approx(expected,
                                                             abs=1e-12)
        assert expected == pytest.approx(0.105361, abs=1e-6)

    def test_clamp_keeps_loss_finite(self):
        assert np.isfinite(bce_loss([0.0, 1.0], [1, 0]))

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            bce_loss([0.5, 0.5], [1])


class TestGradients:
    def test_matches_finite_differences(self):
        from gradcheck import (
            finite_difference_gradients,
            max_relative_error,
            sample_smooth_case,
        )
        rng = np.random.default_rng(3)
        for trial in range(10):
            params, X, y = sample_smooth_case(rng)
            analytic = gradients(params, X, y)
            numeric = finite_difference_gradients(params, X, y)
            assert max_relative_error(analytic, numeric) < 1e-4

    def test_balanced_labels_zero_output_bias_gradient(self):
        arch = MlpArchitecture(2, (3, 3, 3, 3, 3))
        params = init_mlp(arch, seed=0)
        params.weights = [np.zeros_like(w) for w in params.weights]
        # All outputs are exactly 0.5; residuals on balanced labels cancel.
        _, grad_b = gradients(params, np.ones((4, 2)), [0, 1, 0, 1])
        assert grad_b[-1][0] == 0.0

    def test_dead_relu_path_blocks_gradient(self):
        params = _unit_chain_params()
        params.biases[0] = np.array([-5.0])  # pre-activation -4 < 0
        grad_w, grad_b = gradients(params, np.array([[1.0]]), [1])
        assert grad_w[0][0, 0] == 0.0
        assert grad_b[0][0] == 0.0


class TestTrain:
    def _matrices(self, seed=0):
        X, y = _blobs(seed=seed)
        m = design_matrix_from_arrays(X, y)
        return m

    def test_separable_blobs_reach_99(self):
        m = self._matrices()
        oracle = logistic_regression_accuracy(m.values, m.labels)
        assert oracle >= 0.99  # the data itself is separable
        cfg = TrainConfig(max_epochs=50, early_stop_patience=0, seed=1)
        params, history = train(
            m, m, MlpArchitecture(2, (8, 8, 8, 8, 8)), cfg)
        assert max(history.train_accuracy) >= 0.99

    def test_huge_learning_rate_diverges_or_stalls(self):
        m = self._matrices()
        cfg = TrainConfig(learning_rate=1e3, max_epochs=12,
                          early_stop_patience=0, seed=1)
        try:
            _, history = train(m, m, MlpArchitecture(2, (8, 8, 8, 8, 8)), cfg)
        except NonFiniteLoss:
            return
        assert history.train_accuracy[-1] < 0.99

    def test_bit_identical_reruns(self):
        m = self._matrices()
        cfg = TrainConfig(max_epochs=5, batch_size=32, seed=9)
        arch = MlpArchitecture(2, (6, 6, 6, 6, 6))
        params_a, hist_a = train(m, m, arch, cfg)
        params_b, hist_b = train(m, m, arch, cfg)
        assert hist_a.train_loss == hist_b.train_loss
        assert hist_a.val_accuracy == hist_b.val_accuracy
        assert all(np.array_equal(x, y)
                   for x, y in zip(params_a.weights, params_b.weights))
        assert all(np.array_equal(x, y)
                   for x, y in zip(params_a.biases, params_b.biases))

    def test_epoch_permutation_depends_only_on_seed_and_epoch(self):
        a = _epoch_permutation(5, 3, 100, True)
        b = _epoch_permutation(5, 3, 100, True)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, _epoch_permutation(5, 4, 100, True))
        assert np.array_equal(_epoch_permutation(5, 0, 10, False),
                              np.arange(10))

    def test_full_batch_descent_monotone_loss(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(12, 3))
        y = rng.integers(0, 2, size=12)
        params = init_mlp(MlpArchitecture(3, (4, 4, 4, 4, 4)), seed=0)
        losses = [bce_loss(forward(params, X), y)]
        for _ in range(100):
            grad_w, grad_b = gradients(params, X, y)
            for i in range(len(params.weights)):
                params.weights[i] -= 1e-3 * grad_w[i]
                params.biases[i] -= 1e-3 * grad_b[i]
            losses.append(bce_loss(forward(params, X), y))
        for prev, nxt in zip(losses, losses[1:]):
            assert nxt <= prev + 1e-9

    def test_early_stop_returns_best_validation_params(self):
        m = self._matrices()
        rng = np.random.default_rng(5)
        noise = design_matrix_from_arrays(
            rng.normal(size=(40, 2)), rng.integers(0, 2, size=40))
        cfg = TrainConfig(max_epochs=40, early_stop_patience=3,
                          batch_size=16, seed=2)
        params, history = train(
            m, noise, MlpArchitecture(2, (6, 6, 6, 6, 6)), cfg)
        returned_loss = bce_loss(forward(params, noise.values), noise.labels)
        assert returned_loss == pytest.approx(min(history.val_loss),
                                              abs=1e-12)
        assert len(history) <= 40

    def test_history_length_matches_epochs(self):
        m = self._matrices()
        cfg = TrainConfig(max_epochs=4, early_stop_patience=0, seed=3)
        _, history = train(m, m, MlpArchitecture(2, (4, 4, 4, 4, 4)), cfg)
        assert len(history) == 4
        assert len(history.val_loss) == 4


class TestPredict:
    def test_boundary_probability_is_attack(self):
        arch = MlpArchitecture(2, (3, 3, 3, 3, 3))
        params = init_mlp(arch, seed=0)
        params.weights = [np.zeros_like(w) for w in params.weights]
        out = predict(params, np.zeros((3, 2)))  # all probabilities 0.5
        assert out.tolist() == [1, 1, 1]

    def test_threshold_splits(self):
        params = _unit_chain_params()
        X = np.array([[-2.0], [2.0]])  # probabilities sigma(0), sigma(2)
        assert predict(params, X).tolist() == [1, 1]
        assert predict(params, X, threshold=0.6).tolist() == [0, 1]

    def test_zero_threshold_all_ones(self):
        params = _unit_chain_params()
        X = np.array([[-50.0], [0.0], [50.0]])
        assert predict(params, X, threshold=0.0).tolist() == [1, 1, 1]
