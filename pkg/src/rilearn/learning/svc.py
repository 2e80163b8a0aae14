"""Soft-margin RBF support vector classification.

The binary dual is solved by sequential minimal optimization with
maximal-violating-pair working sets, the LIBSVM formulation:

    min ½αᵀQα − eᵀα,  Q_ij = l_i l_j K(P_i, P_j),  0 ≤ α ≤ C,  lᵀα = 0.

Multi-class problems are split one-vs-one. ``RbfSvc`` wraps the solver as a
scikit-learn estimator so folds, cross-validation and grid search come from
``sklearn.model_selection``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.metrics.pairwise import rbf_kernel as _pairwise_rbf
from sklearn.model_selection import GridSearchCV, StratifiedKFold, cross_val_score
from sklearn.preprocessing import StandardScaler

from rilearn.errors import ConfigError, DimensionMismatch, SingleClass

logger = logging.getLogger(__name__)

GRAM_LIMIT = 5000
ROW_CACHE_SIZE = 2048
PRUNE_TOL = 1e-8
_PREDICT_CHUNK = 4096


@dataclass(frozen=True)
class RbfKernelParams:
    gamma: float
    C: float

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not self.C > 0:
            raise ConfigError(f"C must be positive, got {self.C}")


def rbf_kernel(kp: RbfKernelParams, a, b) -> float:
    """exp(−γ‖a − b‖²)."""
    a, b = np.atleast_1d(np.asarray(a, dtype=float)), np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise DimensionMismatch(f"kernel arguments of shapes {a.shape} and {b.shape}")
    return float(_pairwise_rbf(a[None, :], b[None, :], gamma=kp.gamma)[0, 0])


@dataclass(frozen=True, eq=False)
class BinarySvm:
    support_points: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel: RbfKernelParams
    converged: bool = True
    n_iter: int = 0
    kkt_gap: float = 0.0

    @property
    def alphas(self) -> np.ndarray:
        return np.abs(self.dual_coefs)

    def decision(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.support_points.shape[1]:
            raise DimensionMismatch(f"expected {self.support_points.shape[1]} features, got {points.shape[1]}")
        out = np.empty(len(points))
        for start in range(0, len(points), _PREDICT_CHUNK):
            chunk = points[start:start + _PREDICT_CHUNK]
            out[start:start + _PREDICT_CHUNK] = (
                _pairwise_rbf(chunk, self.support_points, gamma=self.kernel.gamma) @ self.dual_coefs + self.bias
            )
        return out

    def dual_objective(self) -> float:
        """Σα − ½ΣΣ αᵢαⱼlᵢlⱼK(Pᵢ, Pⱼ) over the retained support vectors."""
        gram = _pairwise_rbf(self.support_points, self.support_points, gamma=self.kernel.gamma)
        return float(self.alphas.sum() - 0.5 * self.dual_coefs @ gram @ self.dual_coefs)


def decision_function(m: BinarySvm, p) -> float | np.ndarray:
    """Σ coefᵢ·K(Pᵢ, p) + bias for one point, or for each row of a 2-D array."""
    p = np.asarray(p, dtype=float)
    values = m.decision(p)
    return float(values[0]) if p.ndim == 1 else values


class _KernelRows:
    """Rows of the Gram matrix: precomputed up to GRAM_LIMIT points, LRU-cached above."""

    def __init__(self, points: np.ndarray, gamma: float) -> None:
        self._points = points
        self._gamma = gamma
        if len(points) <= GRAM_LIMIT:
            self._gram = _pairwise_rbf(points, points, gamma=gamma)
            self.row = self._gram.__getitem__
        else:
            self._gram = None
            self.row = lru_cache(maxsize=ROW_CACHE_SIZE)(self._compute_row)

    def _compute_row(self, i: int) -> np.ndarray:
        return _pairwise_rbf(self._points[i:i + 1], self._points, gamma=self._gamma)[0]


def _bias(alpha: np.ndarray, labels: np.ndarray, grad: np.ndarray, C: float) -> float:
    """−ρ, with ρ the mean of l·G over free vectors (midpoint of the bound interval if none)."""
    yg = labels * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return -float(yg[free].mean())
    at_upper = alpha >= C
    ub_mask = (at_upper & (labels < 0)) | (~at_upper & (labels > 0))
    lb_mask = ~ub_mask
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    return -float(0.5 * (ub + lb))


def solve_binary(
    kp: RbfKernelParams,
    points: np.ndarray,
    labels: np.ndarray,
    tol: float = 1e-3,
    max_iter: int = 100_000,
) -> BinarySvm:
    """SMO on the soft-margin dual. Hitting ``max_iter`` returns the iterate with converged=False."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    labels = np.asarray(labels, dtype=float)
    if len(points) != len(labels):
        raise DimensionMismatch(f"{len(points)} points but {len(labels)} labels")
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ConfigError("binary labels must be -1 or +1")
    if np.all(labels == labels[0]):
        raise SingleClass("both classes must be present")

    n, C = len(points), kp.C
    rows = _KernelRows(points, kp.gamma)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    gap = np.inf
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        neg_yg = -labels * grad
        up = ((labels > 0) & (alpha < C)) | ((labels < 0) & (alpha > 0))
        low = ((labels < 0) & (alpha < C)) | ((labels > 0) & (alpha > 0))
        i = int(np.argmax(np.where(up, neg_yg, -np.inf)))
        j = int(np.argmin(np.where(low, neg_yg, np.inf)))
        gap = float(neg_yg[i] - neg_yg[j])
        if gap < tol:
            converged = True
            break

        k_i, k_j = rows.row(i), rows.row(j)
        quad = max(k_i[i] + k_j[j] - 2.0 * k_i[j], 1e-12)
        old_i, old_j = alpha[i], alpha[j]
        if labels[i] != labels[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, C - diff
            elif alpha[j] > C:
                alpha[j], alpha[i] = C, C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, total - C
            elif alpha[j] < 0:
                alpha[j], alpha[i] = 0.0, total
            if total > C:
                if alpha[j] > C:
                    alpha[j], alpha[i] = C, total - C
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, total

        d_i, d_j = alpha[i] - old_i, alpha[j] - old_j
        grad += labels * (labels[i] * d_i * k_i + labels[j] * d_j * k_j)
    else:
        logger.warning("SMO stopped at the iteration cap (%d) with KKT gap %.3e", max_iter, gap)

    bias = _bias(alpha, labels, grad, C)
    keep = alpha > PRUNE_TOL
    logger.debug("SMO: n=%d iterations=%d gap=%.2e support=%d", n, iteration, gap, int(keep.sum()))
    return BinarySvm(
        support_points=points[keep].copy(),
        dual_coefs=(alpha * labels)[keep],
        bias=bias,
        kernel=kp,
        converged=converged,
        n_iter=iteration,
        kkt_gap=gap,
    )


@dataclass(frozen=True, eq=False)
class FeatureScaler:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> FeatureScaler:
        scaler = StandardScaler().fit(features)
        return cls(scaler.mean_.copy(), scaler.scale_.copy())

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.mean) / self.scale

    def inverse_transform(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=float) * self.scale + self.mean


@dataclass(frozen=True, eq=False)
class SvcModel:
    classes: tuple[int, ...]
    pairwise: dict[tuple[int, int], BinarySvm]
    kernel: RbfKernelParams
    n_features: int
    feature_scaler: FeatureScaler | None = None

    @property
    def converged(self) -> bool:
        return all(m.converged for m in self.pairwise.values())

    @property
    def support_points(self) -> np.ndarray:
        """Distinct support points over all pairs, in input (unscaled) coordinates."""
        stacked = np.vstack([m.support_points for m in self.pairwise.values()])
        unique = np.unique(stacked, axis=0)
        return self.feature_scaler.inverse_transform(unique) if self.feature_scaler else unique

    @property
    def n_support(self) -> int:
        return len(np.unique(np.vstack([m.support_points for m in self.pairwise.values()]), axis=0))

    def _prepare(self, features) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=float))
        if features.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {features.shape[1]}")
        return self.feature_scaler.transform(features) if self.feature_scaler else features

    def decision_values(self, features) -> np.ndarray:
        """(n, n_pairs) binary decisions, pairs in ``pairwise`` order."""
        scaled = self._prepare(features)
        return np.column_stack([m.decision(scaled) for m in self.pairwise.values()])

    def predict(self, features) -> np.ndarray:
        """Majority vote; ties go to the larger summed decision, then to the lower class."""
        decisions = self.decision_values(features)
        index = {c: k for k, c in enumerate(self.classes)}
        votes = np.zeros((len(decisions), len(self.classes)))
        sums = np.zeros_like(votes)
        for col, (a, b) in enumerate(self.pairwise):
            d = decisions[:, col]
            votes[:, index[a]] += d > 0
            votes[:, index[b]] += d <= 0
            sums[:, index[a]] += d
            sums[:, index[b]] -= d
        tied = votes == votes.max(axis=1, keepdims=True)
        winner = np.argmax(np.where(tied, sums, -np.inf), axis=1)
        return np.asarray(self.classes)[winner]


def fit_svc(
    kp: RbfKernelParams,
    features: np.ndarray,
    labels: np.ndarray,
    scale: bool = False,
    tol: float = 1e-3,
    max_iter: int = 100_000,
) -> SvcModel:
    features = np.atleast_2d(np.asarray(features, dtype=float))
    labels = np.asarray(labels).astype(int)
    classes = tuple(int(c) for c in np.unique(labels))
    if len(classes) < 2:
        raise SingleClass(f"need at least two classes, got {list(classes)}")
    scaler = FeatureScaler.fit(features) if scale else None
    scaled = scaler.transform(features) if scaler else features
    pairwise: dict[tuple[int, int], BinarySvm] = {}
    for a, b in combinations(classes, 2):
        mask = (labels == a) | (labels == b)
        binary = np.where(labels[mask] == a, 1.0, -1.0)
        pairwise[(a, b)] = solve_binary(kp, scaled[mask], binary, tol, max_iter)
    return SvcModel(classes, pairwise, kp, features.shape[1], scaler)


def train_multiclass(kp: RbfKernelParams, dataset, scale: bool = False,
                     tol: float = 1e-3, max_iter: int = 100_000) -> SvcModel:
    """One binary machine per class pair of a LabeledDataset."""
    model = fit_svc(kp, dataset.features, dataset.y, scale, tol, max_iter)
    logger.info(
        "trained C=%g gamma=%g on %d samples: %d classes, %d support vectors%s",
        kp.C, kp.gamma, len(dataset), len(model.classes), model.n_support,
        "" if model.converged else " (not converged)",
    )
    return model


class RbfSvc(ClassifierMixin, BaseEstimator):
    """scikit-learn estimator around ``fit_svc``."""

    def __init__(self, C: float = 1.0, gamma: float = 1.0, scale: bool = False,
                 tol: float = 1e-3, max_iter: int = 100_000) -> None:
        self.C = C
        self.gamma = gamma
        self.scale = scale
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y) -> RbfSvc:
        self.model_ = fit_svc(RbfKernelParams(gamma=self.gamma, C=self.C), X, y, self.scale, self.tol, self.max_iter)
        self.classes_ = np.asarray(self.model_.classes)
        return self

    def predict(self, X) -> np.ndarray:
        return self.model_.predict(X)


@dataclass(frozen=True)
class CvCell:
    C: float
    gamma: float
    mean_accuracy: float
    fold_accuracies: tuple[float, ...]


@dataclass(frozen=True)
class CvReport:
    grid: tuple[CvCell, ...]
    best: tuple[float, float]
    n_folds: int = 5

    @property
    def best_accuracy(self) -> float:
        return max(cell.mean_accuracy for cell in self.grid)

    @property
    def c_values(self) -> list[float]:
        return sorted({cell.C for cell in self.grid})

    @property
    def gamma_values(self) -> list[float]:
        return sorted({cell.gamma for cell in self.grid})

    def accuracy_matrix(self) -> np.ndarray:
        """Mean accuracy indexed [C, gamma], both ascending."""
        cs, gs = self.c_values, self.gamma_values
        out = np.full((len(cs), len(gs)), np.nan)
        for cell in self.grid:
            out[cs.index(cell.C), gs.index(cell.gamma)] = cell.mean_accuracy
        return out


def stratified_folds(labels: np.ndarray, n_folds: int = 5, seed: int = 0) -> StratifiedKFold:
    counts = np.unique(labels, return_counts=True)[1]
    if counts.min() < n_folds:
        logger.warning("smallest class has %d members, fewer than %d folds; stratifying best-effort",
                       counts.min(), n_folds)
    return StratifiedKFold(n_splits=n_folds, shuffle=True, random_state=seed)


def cross_validate(
    kp: RbfKernelParams,
    dataset,
    n_folds: int = 5,
    seed: int = 0,
    scale: bool = False,
    tol: float = 1e-3,
    max_iter: int = 100_000,
    threads: int | None = None,
) -> np.ndarray:
    """Held-out accuracy of each stratified fold."""
    labels = dataset.y
    folds = stratified_folds(labels, n_folds, seed)
    estimator = RbfSvc(C=kp.C, gamma=kp.gamma, scale=scale, tol=tol, max_iter=max_iter)
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="The least populated class")
        return cross_val_score(estimator, dataset.features, labels, cv=folds, scoring="accuracy",
                               n_jobs=threads, error_score="raise")


def grid_search(
    dataset,
    c_grid,
    gamma_grid,
    n_folds: int = 5,
    seed: int = 0,
    scale: bool = False,
    tol: float = 1e-3,
    max_iter: int = 100_000,
    threads: int | None = None,
) -> CvReport:
    """Cross-validate every (C, γ); ties prefer the smaller C, then the smaller γ."""
    c_grid, gamma_grid = sorted(float(c) for c in c_grid), sorted(float(g) for g in gamma_grid)
    if not c_grid or not gamma_grid:
        raise ConfigError("C and gamma grids must be nonempty")
    labels = dataset.y
    search = GridSearchCV(
        RbfSvc(scale=scale, tol=tol, max_iter=max_iter),
        {"C": c_grid, "gamma": gamma_grid},
        scoring="accuracy",
        cv=stratified_folds(labels, n_folds, seed),
        n_jobs=threads,
        refit=False,
        error_score="raise",
    )
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="The least populated class")
        search.fit(dataset.features, labels)
    results = search.cv_results_
    cells = tuple(
        CvCell(
            C=float(params["C"]),
            gamma=float(params["gamma"]),
            mean_accuracy=float(np.mean([results[f"split{k}_test_score"][idx] for k in range(n_folds)])),
            fold_accuracies=tuple(float(results[f"split{k}_test_score"][idx]) for k in range(n_folds)),
        )
        for idx, params in enumerate(results["params"])
    )
    ordered = sorted(cells, key=lambda c: (c.C, c.gamma))
    best = max(ordered, key=lambda c: c.mean_accuracy)
    logger.info("grid search best C=%g gamma=%g mean accuracy %.4f", best.C, best.gamma, best.mean_accuracy)
    return CvReport(tuple(ordered), (best.C, best.gamma), n_folds)
