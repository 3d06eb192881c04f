import json
import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from confperf import _purepy, backend
from confperf.learners import LEARNER_IDS, LearnerError, predict, train
from confperf.learners.base import Encoder, default_hyperparams, encode, load_predictor
from confperf.learners.kernels import kernel_matrix
from confperf.learners.mr import Factor, MultipleRegression
from confperf.learners.trees import RegressionTree, fit_cart, fit_rf
from confperf.space import valid_matrix

from conftest import make_space

try:
    from confperf import _native
except ImportError:
    _native = None

SOLVERS = [_purepy] + ([_native] if _native is not None else [])


def mixed_space():
    return make_space("ab", [("n", range(9)), ("m", (1, 2, 4))])


def labelled(space, fn, rng=None, noise=0.0):
    X = valid_matrix(space)
    y = np.array([fn(dict(zip(space.option_names, r))) for r in X], dtype=float)
    if noise:
        y = y * (1 + noise * rng.standard_normal(len(y)))
    return X, y


# -- encoding and predictor contract --------------------------------------------------


def test_encode_examples():
    space = make_space("ab", [("n", range(9))])
    assert encode(space, {"a": 1, "b": 0, "n": 4}).tolist() == [1.0, 0.0, 0.5]
    assert encode(space, {"a": 0, "b": 1, "n": 0}).tolist()[2] == 0.0
    enc = Encoder.from_space(space)
    X = valid_matrix(space)
    assert np.array_equal(enc.transform(X)[:, :2], X[:, :2])


@pytest.mark.parametrize("learner", LEARNER_IDS)
def test_every_learner_trains_predicts_and_round_trips(learner, rng):
    space = mixed_space()
    X, y = labelled(space, lambda c: 10 + 3 * c["a"] + c["n"] * c["m"])
    idx = rng.choice(len(y), 40, replace=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = train(learner, space, X[idx], y[idx])
    pred = p.predict_rows(X)
    assert pred.shape == y.shape and np.all(np.isfinite(pred))
    again = load_predictor(p.to_json())
    assert np.array_equal(again.predict_rows(X), pred)
    assert json.loads(p.to_json())["learner"] == learner
    cfg = dict(zip(space.option_names, X[3]))
    assert predict(p, cfg) == pred[3]


@pytest.mark.parametrize("learner", LEARNER_IDS)
def test_training_is_deterministic(learner, rng):
    space = mixed_space()
    X, y = labelled(space, lambda c: 5 + c["b"] * c["n"] ** 2 + c["m"], rng, 0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = train(learner, space, X, y).predict_rows(X)
        b = train(learner, space, X, y).predict_rows(X)
    assert np.array_equal(a, b)


def test_predict_rejects_foreign_configuration():
    space = mixed_space()
    X, y = labelled(space, lambda c: 1 + c["n"])
    p = train("CART", space, X, y)
    with pytest.raises(ValueError, match="does not belong"):
        p.predict({"a": 1, "b": 0, "n": 2})
    with pytest.raises(ValueError):
        p.predict_rows(np.zeros((2, 3)))


def test_unknown_hyperparameter_and_learner():
    space = mixed_space()
    X, y = labelled(space, lambda c: 1 + c["n"])
    with pytest.raises(LearnerError):
        train("CART", space, X, y, {"depth": 3})
    with pytest.raises(LearnerError):
        train("GBM", space, X, y)
    with pytest.raises(LearnerError):
        train("kNN", space, X[:0], y[:0])


# -- MR ------------------------------------------------------------------------------


def test_mr_recovers_simple_binary_model():
    space = make_space("a")
    X = np.array([[0.0], [1.0], [0.0], [1.0], [1.0], [0.0]])
    y = 5 + 3 * X[:, 0]
    p = train("MR", space, X, y)
    model = p.model
    assert sorted(map(len, model.terms)) == [0, 1]
    coef = dict(zip(model.terms, model.coef))
    assert coef[()] == pytest.approx(5, abs=1e-9)
    assert coef[(Factor("pow", 0),)] == pytest.approx(3, abs=1e-9)
    assert p.predict({"a": 1}) == pytest.approx(8, abs=1e-9)


def test_mr_constant_labels():
    space = mixed_space()
    X, _ = labelled(space, lambda c: 0)
    p = train("MR", space, X, np.full(len(X), 7.0))
    assert p.model.terms == [()]
    assert np.allclose(p.predict_rows(X), 7.0)


def test_mr_binary_times_numeric_squared_is_representable():
    space = make_space("a", [("n", range(1, 6))])
    X, y = labelled(space, lambda c: 2 + 4 * c["a"] + 0.5 * c["a"] * c["n"] ** 2)
    p = train("MR", space, X, y, {"minImprovement": 0.0})
    assert np.max(np.abs(p.predict_rows(X) - y) / y) < 1e-6
    assert "a*n^2" in p.model.term_string() or "n^2*a" in p.model.term_string()


def test_mr_term_string():
    m = MultipleRegression([(), (Factor("pow", 0),), (Factor("pow", 0), Factor("pow", 1, 2))], [5.0, 3.0, 2.5],
                           ["a", "n1"])
    assert m.term_string() == "5.0 + 3.0*a + 2.5*a*n1^2"
    m = MultipleRegression([(), (Factor("pow", 0),)], [1.0, -2.0], ["a"])
    assert m.term_string() == "1.0 - 2.0*a"


def test_mr_complex_function_types():
    space = make_space(numeric=[("n", (1, 2, 3, 4)), ("m", (1, 2, 5))])
    X, y = labelled(space, lambda c: 3 + 2 * c["n"] / c["m"])
    p = train("MR", space, X, y, {"functionTypes": "complex", "minImprovement": 0.0})
    assert np.max(np.abs(p.predict_rows(X) - y) / y) < 1e-9
    with pytest.raises(LearnerError):
        train("MR", space, X, y, {"functionTypes": "fourier"})


def test_mr_absolute_loss_fits_too():
    space = mixed_space()
    X, y = labelled(space, lambda c: 4 + c["a"] + 2 * c["n"])
    p = train("MR", space, X, y, {"lossFunction": "absolute"})
    assert np.max(np.abs(p.predict_rows(X) - y)) < 1e-8


# -- CART / RF --------------------------------------------------------------------------


def test_example_tree_with_numeric_split():
    # root splits on the binary option; the enabled branch splits the numeric option at 20
    tree = RegressionTree(feature=[0, -1, 1, -1, -1], threshold=[0.5, 0, 20, 0, 0], left=[1, -1, 3, -1, -1],
                          right=[2, -1, 4, -1, -1], value=[0, 100, 0, 180, 250])
    X = np.array([[1, 30], [0, 30], [0, 5], [1, 10]], dtype=float)
    assert tree.predict(X).tolist() == [250.0, 100.0, 100.0, 180.0]


def test_cart_interpolates_duplicate_free_data(rng):
    space = mixed_space()
    X, y = labelled(space, lambda c: 1 + c["n"] * (1 + c["a"]) + c["m"], rng, 0.1)
    p = train("CART", space, X, y, {"min_samples_leaf": 1})
    assert np.array_equal(p.predict_rows(X), y)


def test_cart_min_samples_leaf_is_respected(rng):
    space = mixed_space()
    X, y = labelled(space, lambda c: 1 + c["n"], rng, 0.1)
    model = fit_cart(space, X, y, {**default_hyperparams("CART"), "min_samples_leaf": 7})
    leaves = model.tree.predict(X)
    _, counts = np.unique(leaves, return_counts=True)
    assert counts.min() >= 7


def test_cart_random_splitter_and_max_features(rng):
    space = mixed_space()
    X, y = labelled(space, lambda c: 1 + c["n"] + 3 * c["b"], rng, 0.1)
    for hp in ({"splitter": "random", "random_state": 3}, {"max_features": "sqrt", "random_state": 1},
               {"max_features": 0.5}, {"max_features": "log2"}):
        p = train("CART", space, X, y, hp)
        assert np.array_equal(p.predict_rows(X), y)


def test_rf_is_mean_of_trees(rng):
    space = mixed_space()
    X, y = labelled(space, lambda c: 2 + c["n"] * c["a"], rng, 0.1)
    p = train("RF", space, X, y, {"n_estimators": 7, "random_state": 4})
    probes = X[rng.choice(len(X), 30)]
    trees = np.vstack([t.predict(probes) for t in p.model.trees])
    exact = [float(sum(map(Fraction, col)) / len(col)) for col in trees.T.tolist()]
    assert np.array_equal(p.predict_rows(probes), exact)


def test_single_tree_forest_without_bootstrap_equals_cart(rng):
    space = mixed_space()
    X, y = labelled(space, lambda c: 2 + c["m"] * c["b"] + c["n"], rng, 0.1)
    hp = {"n_estimators": 1, "max_features": "all", "random_state": 0}
    forest = fit_rf(space, X, y, hp, bootstrap=False)
    cart = fit_cart(space, X, y, {**default_hyperparams("CART"), "random_state": 0})
    assert np.array_equal(forest.predict(X), cart.predict(X))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["CART", "RF"]))
def test_tree_predictions_stay_in_label_range(seed, learner):
    rng = np.random.default_rng(seed)
    space = mixed_space()
    X = valid_matrix(space)
    idx = rng.choice(len(X), 20, replace=False)
    y = rng.uniform(1, 100, 20)
    p = train(learner, space, X[idx], y, {"random_state": seed % 50})
    probes = np.column_stack([rng.integers(0, 2, 40), rng.integers(0, 2, 40), rng.uniform(-5, 15, 40),
                              rng.uniform(0, 6, 40)])
    pred = p.predict_rows(probes)
    assert pred.min() >= y.min() and pred.max() <= y.max()


# -- kNN --------------------------------------------------------------------------------


def test_knn_equidistant_mean():
    space = make_space(numeric=[("x", (0, 1, 2)), ("y", (0, 1, 2))])
    X = np.array([[0, 1], [2, 1], [1, 0]], dtype=float)
    p = train("kNN", space, X, np.array([1.0, 2.0, 3.0]), {"n_neighbors": 3})
    assert p.predict({"x": 1, "y": 1}) == pytest.approx(2.0)


def test_knn_k1_interpolates(rng):
    space = mixed_space()
    X, y = labelled(space, lambda c: 1 + c["n"] + c["a"], rng, 0.1)
    p = train("kNN", space, X, y, {"n_neighbors": 1})
    assert np.array_equal(p.predict_rows(X), y)


def test_knn_five_nearest_by_hand(rng):
    space = make_space(numeric=[("x", range(11)), ("y", range(11))])
    X = np.array([[5, 5], [4, 5], [6, 5], [5, 4], [5, 6], [7, 7], [3, 3], [0, 0], [10, 10], [2, 8], [8, 2],
                  [9, 5], [5, 0]], dtype=float)
    y = np.arange(1, 14, dtype=float)
    p = train("kNN", space, X, y, {"n_neighbors": 5, "p": 2})
    assert p.predict({"x": 5, "y": 5}) == pytest.approx(np.mean(y[:5]))


def test_knn_distance_weights_exact_hit():
    space = make_space(numeric=[("x", range(5))])
    X = np.array([[0.0], [2.0], [4.0]])
    p = train("kNN", space, X, np.array([1.0, 5.0, 9.0]), {"n_neighbors": 3, "weights": "distance"})
    assert p.predict({"x": 2}) == 5.0
    # at x = 1: distances 0.25, 0.25, 0.75 in encoded units
    w = np.array([4.0, 4.0, 4.0 / 3.0])
    assert p.predict({"x": 1}) == pytest.approx((w @ [1.0, 5.0, 9.0]) / w.sum())


def test_knn_validation():
    space = make_space(numeric=[("x", range(5))])
    X = np.array([[0.0], [2.0]])
    with pytest.raises(LearnerError):
        train("kNN", space, X, np.array([1.0, 2.0]), {"n_neighbors": 3})


# -- KRR --------------------------------------------------------------------------------


def test_krr_linear_matches_least_squares(rng):
    space = make_space("ab", [("n", range(9)), ("m", range(5))])
    X = valid_matrix(space)
    Z = Encoder.from_space(space).transform(X)
    y = Z @ np.array([2.0, -1.0, 4.0, 0.5]) + rng.normal(0, 0.3, len(X))
    ols = np.linalg.solve(Z.T @ Z, Z.T @ y)
    p = train("KRR", space, X, y, {"alpha": 0.0, "kernel": "linear"})
    pred = p.predict_rows(X)
    assert np.max(np.abs(pred - Z @ ols) / np.abs(Z @ ols).clip(1e-12)) < 1e-6


def test_krr_large_alpha_shrinks():
    space = make_space(numeric=[("x", range(10))])
    X = valid_matrix(space)
    y = X[:, 0] - X[:, 0].mean()
    p = train("KRR", space, X, y, {"alpha": 1e9, "kernel": "rbf"})
    assert np.max(np.abs(p.predict_rows(X))) < 1e-6


def test_krr_rbf_interpolates_with_zero_alpha():
    space = make_space(numeric=[("x", range(6))])
    X = valid_matrix(space)
    y = np.array([3.0, 1.0, 4.0, 1.0, 5.0, 9.0])
    p = train("KRR", space, X, y, {"alpha": 0.0, "kernel": "rbf", "gamma": 5.0})
    assert np.allclose(p.predict_rows(X), y, atol=1e-8)


def test_krr_singular_system_error():
    space = make_space("a")
    X = np.array([[0.0], [0.0], [1.0]])
    with pytest.raises(LearnerError, match="alpha > 0"):
        train("KRR", space, X, np.array([1.0, 2.0, 3.0]), {"alpha": 0.0, "kernel": "poly", "degree": 2})


def test_kernel_matrix_definitions(rng):
    A, B = rng.random((4, 3)), rng.random((5, 3))
    assert np.allclose(kernel_matrix(A, B, "linear"), A @ B.T)
    assert np.allclose(kernel_matrix(A, B, "poly", 3, 0.5, 1.0), (0.5 * A @ B.T + 1.0) ** 3)
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
    assert np.allclose(kernel_matrix(A, B, "rbf", gamma=2.0), np.exp(-2.0 * d2))


# -- SVR --------------------------------------------------------------------------------


def kkt_violation(K, y, C, eps, alpha, rho):
    """Largest violation of the epsilon-SVR optimality conditions, computed from scratch."""
    l = len(y)
    ap, am = alpha[:l], alpha[l:]
    beta = ap - am
    r = y - (K @ beta - rho)
    worst = abs(beta.sum())
    worst = max(worst, -min(alpha.min(), 0.0), max(alpha.max() - C, 0.0))
    for a, s in ((ap, 1.0), (am, -1.0)):
        g = s * r - eps  # > 0: outside the tube on this side
        at0 = a <= 0
        atC = a >= C
        free = ~at0 & ~atC
        if at0.any():
            worst = max(worst, np.max(g[at0], initial=0.0))
        if atC.any():
            worst = max(worst, np.max(-g[atC], initial=0.0))
        if free.any():
            worst = max(worst, np.max(np.abs(g[free])))
    return worst


@pytest.mark.parametrize("solver", SOLVERS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_svr_kkt_on_random_instances(solver):
    for inst in range(50):
        rng = np.random.default_rng(1000 + inst)
        n = int(rng.integers(5, 40))
        Z = rng.random((n, 3))
        kernel = ["rbf", "linear", "poly"][inst % 3]
        K = kernel_matrix(Z, Z, kernel, 2, 1.5, 1.0)
        y = rng.normal(0, 1, n) + Z.sum(1)
        C = float(rng.choice([0.1, 1.0, 10.0]))
        eps = float(rng.choice([0.0, 0.05, 0.3]))
        tol = 1e-3
        coef, rho, _, converged, alpha = solver.smo_solve(K, y, C, eps, tol, bool(inst % 2), 1_000_000)
        assert converged
        assert np.allclose(coef, alpha[:n] - alpha[n:])
        assert kkt_violation(K, y, C, eps, alpha, rho) <= tol + 1e-9


def test_svr_flat_labels():
    space = mixed_space()
    X = valid_matrix(space)[:30]
    p = train("SVR", space, X, np.full(30, 4.0), {"epsilon": 0.1})
    assert np.allclose(p.predict_rows(X), 4.0)
    assert len(p.model.coef) == 0


def test_svr_linear_data_inside_tube():
    space = make_space(numeric=[("x", range(20))])
    X = valid_matrix(space)
    y = 2 + 0.1 * X[:, 0]
    hp = {"kernel": "linear", "C": 100.0, "epsilon": 0.05, "tol": 1e-4}
    p = train("SVR", space, X, y, hp)
    assert np.max(np.abs(p.predict_rows(X) - y)) <= 0.05 + 1e-3


def test_svr_reports_non_convergence():
    space = mixed_space()
    X, y = labelled(space, lambda c: 1 + c["n"] ** 2 + 3 * c["a"])
    from confperf.learners.kernels import ConvergenceWarning, fit_svr
    hp = {**default_hyperparams("SVR"), "C": 1000.0, "epsilon": 0.001, "tol": 1e-5}
    with pytest.warns(ConvergenceWarning):
        m = fit_svr(space, X, y, hp, max_iter=5)
    assert m.info["converged"] is False and m.info["n_iter"] == 5


def test_svr_invalid_hyperparameters():
    space = mixed_space()
    X, y = labelled(space, lambda c: 1 + c["n"])
    for bad in ({"C": 0.0}, {"epsilon": -1.0}, {"tol": 0.0}):
        with pytest.raises(LearnerError):
            train("SVR", space, X, y, bad)


def test_backend_is_reported():
    assert backend.NAME in ("native", "python")
    assert math.isfinite(train("CART", mixed_space(), *labelled(mixed_space(), lambda c: 1.0)).predict_rows(
        valid_matrix(mixed_space()))[0])
