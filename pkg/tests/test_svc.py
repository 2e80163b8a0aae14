import math
from types import SimpleNamespace

import numpy as np
import numpy.testing as npt
import pytest
from scipy.optimize import minimize
from sklearn.base import clone
from sklearn.svm import SVC

from rilearn.errors import ConfigError, DimensionMismatch, SingleClass
from rilearn.learning import svc as svc_module
from rilearn.learning.svc import (
    BinarySvm,
    RbfKernelParams,
    RbfSvc,
    SvcModel,
    cross_validate,
    decision_function,
    fit_svc,
    grid_search,
    rbf_kernel,
    solve_binary,
)


@pytest.fixture
def overlapping():
    """Two noisy blobs in the plane that overlap a little."""
    rng = np.random.default_rng(7)
    points = np.vstack([rng.normal([-0.5, 0.0], 0.6, (20, 2)), rng.normal([0.5, 0.2], 0.6, (20, 2))])
    labels = np.repeat([1.0, -1.0], 20)
    return points, labels


@pytest.fixture
def four_clusters():
    rng = np.random.default_rng(11)
    centres = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]])
    points = np.vstack([c + rng.normal(0.0, 0.1, (10, 2)) for c in centres])
    return centres, points, np.repeat(np.arange(4), 10)


def _constant_machine(value: float) -> BinarySvm:
    kp = RbfKernelParams(gamma=1.0, C=1.0)
    return BinarySvm(np.zeros((1, 1)), np.zeros(1), value, kp)


def _oracle_dual(points, labels, kp):
    """Dual optimum from a general-purpose constrained optimizer, polished by an exact solve on its active set."""
    q = np.outer(labels, labels) * np.exp(-kp.gamma * ((points[:, None] - points[None]) ** 2).sum(axis=2))
    result = minimize(
        lambda a: 0.5 * a @ q @ a - a.sum(),
        np.zeros(len(labels)),
        jac=lambda a: q @ a - 1.0,
        bounds=[(0.0, kp.C)] * len(labels),
        constraints=[{"type": "eq", "fun": lambda a: labels @ a, "jac": lambda a: labels}],
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 1000},
    )
    alpha = np.clip(result.x, 0.0, kp.C)
    edge = 1e-6 * kp.C
    free = np.flatnonzero((alpha > edge) & (alpha < kp.C - edge))
    fixed = np.setdiff1d(np.arange(len(labels)), free)
    bound = np.where(alpha >= kp.C - edge, kp.C, 0.0)
    if len(free):
        kkt = np.zeros((len(free) + 1, len(free) + 1))
        kkt[:-1, :-1] = q[np.ix_(free, free)]
        kkt[:-1, -1] = kkt[-1, :-1] = labels[free]
        rhs = np.append(1.0 - q[np.ix_(free, fixed)] @ bound[fixed], -labels[fixed] @ bound[fixed])
        exact = bound.copy()
        exact[free] = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:-1]
        if np.all((exact >= 0.0) & (exact <= kp.C)) and abs(labels @ exact) < 1e-10:
            return float(exact.sum() - 0.5 * exact @ q @ exact)
    return -result.fun


def test_kernel_values():
    kp = RbfKernelParams(gamma=0.5, C=1.0)
    assert rbf_kernel(kp, [0.0, 0.0], [1.0, 1.0]) == pytest.approx(math.exp(-1.0))
    assert rbf_kernel(kp, [0.3, -0.2], [0.3, -0.2]) == 1.0
    assert rbf_kernel(kp, 2.0, 0.0) == pytest.approx(math.exp(-2.0))
    with pytest.raises(DimensionMismatch):
        rbf_kernel(kp, [0.0, 0.0], [0.0])


def test_kernel_params_must_be_positive():
    with pytest.raises(ConfigError):
        RbfKernelParams(gamma=0.0, C=1.0)
    with pytest.raises(ConfigError):
        RbfKernelParams(gamma=1.0, C=-1.0)


def test_separable_line():
    points = np.array([[-2.0], [-1.5], [-1.0], [1.0], [1.5], [2.0]])
    labels = np.array([-1.0, -1.0, -1.0, 1.0, 1.0, 1.0])
    kp = RbfKernelParams(gamma=0.5, C=10.0)
    machine = solve_binary(kp, points, labels, tol=1e-8)
    assert machine.converged
    assert abs(machine.dual_coefs.sum()) < 1e-8
    assert np.all((machine.alphas > 0) & (machine.alphas <= kp.C))
    npt.assert_array_equal(np.sign(machine.decision(points)), labels)
    assert decision_function(machine, [0.0]) == pytest.approx(machine.decision(np.zeros((1, 1)))[0])
    assert decision_function(machine, points).shape == (6,)


def test_dual_matches_constrained_optimizer(overlapping):
    points, labels = overlapping
    kp = RbfKernelParams(gamma=1.0, C=2.0)
    machine = solve_binary(kp, points, labels, tol=1e-6)
    assert machine.converged
    assert machine.kkt_gap < 1e-6
    assert machine.dual_objective() == pytest.approx(_oracle_dual(points, labels, kp), rel=1e-5)


@pytest.mark.parametrize("seed", range(50))
def test_dual_matches_an_exact_qp_on_small_problems(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 21))
    points = rng.normal(0.0, 1.0, (n, 2))
    labels = rng.choice([-1.0, 1.0], n)
    labels[:2] = (1.0, -1.0)
    kp = RbfKernelParams(gamma=float(rng.choice([0.5, 1.0, 5.0])), C=float(rng.choice([0.1, 1.0, 10.0])))
    machine = solve_binary(kp, points, labels, tol=1e-9)
    assert machine.converged
    assert np.all((machine.alphas > 0) & (machine.alphas <= kp.C))
    assert abs(machine.dual_coefs.sum()) < 1e-7
    assert machine.dual_objective() == pytest.approx(_oracle_dual(points, labels, kp), abs=1e-6)


def test_decisions_match_libsvm(overlapping):
    points, labels = overlapping
    kp = RbfKernelParams(gamma=1.0, C=2.0)
    machine = solve_binary(kp, points, labels, tol=1e-6)
    reference = SVC(C=kp.C, kernel="rbf", gamma=kp.gamma, tol=1e-6).fit(points, labels)
    grid = np.random.default_rng(0).uniform(-2.0, 2.0, (50, 2))
    npt.assert_allclose(machine.decision(grid), reference.decision_function(grid), atol=1e-3)
    assert machine.bias == pytest.approx(reference.intercept_[0], abs=1e-3)


def test_row_cache_gives_the_same_machine(overlapping, monkeypatch):
    points, labels = overlapping
    kp = RbfKernelParams(gamma=1.0, C=2.0)
    full = solve_binary(kp, points, labels, tol=1e-6)
    monkeypatch.setattr(svc_module, "GRAM_LIMIT", 5)
    cached = solve_binary(kp, points, labels, tol=1e-6)
    npt.assert_allclose(cached.decision(points), full.decision(points), atol=1e-4)


def test_iteration_cap_is_reported(overlapping):
    points, labels = overlapping
    machine = solve_binary(RbfKernelParams(gamma=1.0, C=2.0), points, labels, max_iter=2)
    assert not machine.converged
    assert machine.n_iter == 2


def test_binary_input_checks():
    kp = RbfKernelParams(gamma=1.0, C=1.0)
    with pytest.raises(SingleClass):
        solve_binary(kp, np.zeros((3, 2)), np.ones(3))
    with pytest.raises(DimensionMismatch):
        solve_binary(kp, np.zeros((3, 2)), np.array([1.0, -1.0]))
    with pytest.raises(ConfigError):
        solve_binary(kp, np.zeros((2, 2)), np.array([0.0, 1.0]))


def test_four_clusters(four_clusters):
    centres, points, labels = four_clusters
    model = fit_svc(RbfKernelParams(gamma=1.0, C=10.0), points, labels)
    assert model.classes == (0, 1, 2, 3)
    assert list(model.pairwise) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    npt.assert_array_equal(model.predict(points), labels)
    npt.assert_array_equal(model.predict(centres), [0, 1, 2, 3])
    assert model.converged
    assert 0 < model.n_support <= len(points)
    with pytest.raises(DimensionMismatch):
        model.predict(np.zeros((2, 3)))


def test_scaled_model_reports_support_in_input_units(four_clusters):
    _, points, labels = four_clusters
    model = fit_svc(RbfKernelParams(gamma=1.0, C=10.0), points * 100.0, labels, scale=True)
    npt.assert_array_equal(model.predict(points * 100.0), labels)
    assert np.abs(model.support_points).max() > 50.0


def test_single_class_is_rejected():
    with pytest.raises(SingleClass):
        fit_svc(RbfKernelParams(gamma=1.0, C=1.0), np.zeros((4, 2)), np.zeros(4, dtype=int))


@pytest.mark.parametrize(
    "d01, d02, d12, expected",
    [
        (1.0, -1.0, 1.0, 0),  # three-way tie, equal sums
        (0.5, -1.0, 2.0, 1),  # three-way tie, class 1 has the largest sum
        (1.0, 1.0, 1.0, 0),
        (-1.0, -1.0, -1.0, 2),
    ],
)
def test_vote_tie_breaks(d01, d02, d12, expected):
    kp = RbfKernelParams(gamma=1.0, C=1.0)
    pairwise = {(0, 1): _constant_machine(d01), (0, 2): _constant_machine(d02), (1, 2): _constant_machine(d12)}
    model = SvcModel((0, 1, 2), pairwise, kp, n_features=1)
    assert model.predict([[0.0]])[0] == expected


def test_zero_decision_votes_for_the_second_class():
    model = SvcModel((0, 1), {(0, 1): _constant_machine(0.0)}, RbfKernelParams(gamma=1.0, C=1.0), n_features=1)
    assert model.predict([[0.0]])[0] == 1


def test_estimator_clones():
    estimator = RbfSvc(C=5.0, gamma=2.0, scale=True)
    copy = clone(estimator)
    assert copy.get_params() == estimator.get_params()
    assert not hasattr(copy, "model_")


def test_cross_validation_and_grid_tie(four_clusters):
    _, points, labels = four_clusters
    dataset = SimpleNamespace(features=points, y=labels)
    kp = RbfKernelParams(gamma=1.0, C=10.0)
    folds = cross_validate(kp, dataset, n_folds=5, seed=0)
    assert folds.shape == (5,)
    npt.assert_allclose(folds, 1.0)

    report = grid_search(dataset, [10.0, 1.0], [2.0, 0.5], n_folds=5, seed=0)
    assert report.c_values == [1.0, 10.0]
    assert report.gamma_values == [0.5, 2.0]
    assert report.best == (1.0, 0.5)
    assert report.best_accuracy == 1.0
    npt.assert_allclose(report.accuracy_matrix(), 1.0)
    assert [(c.C, c.gamma) for c in report.grid] == [(1.0, 0.5), (1.0, 2.0), (10.0, 0.5), (10.0, 2.0)]
    assert all(len(c.fold_accuracies) == 5 for c in report.grid)


def test_grid_must_be_nonempty(four_clusters):
    _, points, labels = four_clusters
    with pytest.raises(ConfigError):
        grid_search(SimpleNamespace(features=points, y=labels), [], [1.0])
