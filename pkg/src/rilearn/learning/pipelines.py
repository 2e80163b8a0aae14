"""End-to-end experiments: fixed grid, active learning, LD features, and evaluation."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, replace
from functools import partial

import numpy as np
from sklearn.metrics import accuracy_score, confusion_matrix
from sklearn.model_selection import cross_val_predict

from rilearn.dynamics.integrator import IntegrationSettings
from rilearn.dynamics.manifolds import ReactiveIsland, SectionConfig, island_contains, section_extent
from rilearn.dynamics.system import EscapeChannel, SaddleId, SystemParams, saddle_energy
from rilearn.errors import ConfigError, EnergyBelowSaddle, ProposalExhausted
from rilearn.learning.boundary import boundary_from_predictions, island_fit, prediction_grid
from rilearn.learning.datasets import (
    EscapeLabel,
    LabeledDataset,
    SectionSample,
    assemble_dataset,
    build_dataset,
    inside_energy_boundary,
    label_samples,
    ld_samples,
    sample_grid,
    samples_from_points,
)
from rilearn.learning.svc import (
    CvReport,
    RbfKernelParams,
    RbfSvc,
    SvcModel,
    grid_search,
    stratified_folds,
    train_multiclass,
)

logger = logging.getLogger(__name__)

FIXED_C_GRID = (1e2, 1e3, 1e4, 1e5)
FIXED_GAMMA_GRID = (10.0, 1e2, 1e3, 1e4)
ACTIVE_C_GRID = (10.0, 1e2, 1e3)
ACTIVE_GAMMA_GRID = (1.0, 10.0, 1e2)
CLASSES = tuple(int(c) for c in EscapeChannel)

Labeler = Callable[[list[SectionSample]], list[EscapeLabel]]


@dataclass(frozen=True)
class ActiveLearnConfig:
    initial_grid: tuple[int, int] = (30, 30)
    n_sv_per_iter: int | None = 10
    pts_per_sv: int = 1
    proposal_sigma: float = 1.0
    target_accuracy: float = 0.99
    max_iters: int = 30
    seed: int = 0
    max_retries: int = 100

    def __post_init__(self) -> None:
        if not 0 < self.target_accuracy <= 1:
            raise ConfigError(f"target_accuracy must lie in (0, 1], got {self.target_accuracy}")
        if min(self.initial_grid) < 2:
            raise ConfigError(f"initial grid must be at least 2x2, got {self.initial_grid}")
        if self.n_sv_per_iter is not None and self.n_sv_per_iter < 1:
            raise ConfigError("n_sv_per_iter must be positive (or None for every support vector)")
        if self.pts_per_sv < 1 or self.max_iters < 0 or self.max_retries < 1:
            raise ConfigError("pts_per_sv and max_retries must be positive, max_iters non-negative")
        if not self.proposal_sigma > 0:
            raise ConfigError(f"proposal_sigma must be positive, got {self.proposal_sigma}")


@dataclass(frozen=True)
class EvaluationReport:
    test_accuracy: float
    per_class_accuracy: dict[int, float]
    confusion: list[list[int]]
    n_labeled_trajectories: int
    boundary_agreement: float | None = None
    boundary_fit: dict[int, float] | None = None
    cv_accuracy: float | None = None
    best_params: tuple[float, float] | None = None
    n_support: int | None = None
    iteration: int | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["best_params"] = list(self.best_params) if self.best_params else None
        return out


def score_predictions(y_true, y_pred, n_labeled: int, **extra) -> EvaluationReport:
    """Accuracy, recall per class and the 4x4 confusion matrix over channels 0..3."""
    y_true, y_pred = np.asarray(y_true, dtype=int), np.asarray(y_pred, dtype=int)
    confusion = confusion_matrix(y_true, y_pred, labels=list(CLASSES)) if len(y_true) else np.zeros((4, 4), int)
    totals = confusion.sum(axis=1)
    per_class = {c: float(confusion[k, k] / totals[k]) for k, c in enumerate(CLASSES) if totals[k] > 0}
    return EvaluationReport(
        test_accuracy=float(accuracy_score(y_true, y_pred)) if len(y_true) else 0.0,
        per_class_accuracy=per_class,
        confusion=confusion.astype(int).tolist(),
        n_labeled_trajectories=int(n_labeled),
        **extra,
    )


def _require_open_channels(params: SystemParams, section: SectionConfig) -> None:
    lowest = min(saddle_energy(params, s) for s in SaddleId)
    if section.energy <= lowest:
        raise EnergyBelowSaddle(f"E={section.energy} is not above the saddle energy {lowest:.12g}")


class LdFeatureModel:
    """Classifier over (x, p_x) that appends the forward LD of each point before predicting."""

    def __init__(self, model: SvcModel, params: SystemParams, section: SectionConfig, tau: float = 30.0,
                 p_exponent: float = 0.5, integration: IntegrationSettings | None = None,
                 threads: int | None = None) -> None:
        self.model = model
        self.params = params
        self.section = section
        self.tau = tau
        self.p_exponent = p_exponent
        self.integration = integration
        self.threads = threads

    def features(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        samples = samples_from_points(self.params, points, self.section)
        ld = [v.value for v in ld_samples(self.params, samples, self.tau, self.p_exponent,
                                          self.integration, self.threads)]
        return np.column_stack([points, ld])

    def predict(self, points) -> np.ndarray:
        return self.model.predict(self.features(points))


def load_predictor(path, params: SystemParams, integration: IntegrationSettings | None = None,
                   threads: int | None = None) -> tuple[SvcModel | LdFeatureModel, SectionConfig | None]:
    """Model file -> classifier over (x, p_x) and the section it was trained on.

    Models carrying an ``ld`` block come back wrapped in LdFeatureModel.
    """
    from rilearn.utils.serialization import read_model

    model, doc = read_model(path)
    section = None
    if "section" in doc:
        section = SectionConfig(energy=float(doc["section"]["energy"]), y_c=float(doc["section"]["y_c"]))
    ld = doc.get("ld")
    if ld:
        if section is None:
            raise ConfigError(f"{path}: an LD model needs its section")
        return LdFeatureModel(model, params, section, float(ld["tau"]), float(ld["ld_exponent"]),
                              integration, threads), section
    return model, section


def island_truth(points: np.ndarray, islands: Sequence[ReactiveIsland]) -> np.ndarray:
    """Channel k inside the first-order island of channel k, 0 elsewhere."""
    truth = np.zeros(len(points), dtype=int)
    for island in islands:
        truth[island_contains(island, points)] = int(island.channel)
    return truth


def holdout_points(params: SystemParams, section: SectionConfig, n: int, seed: int) -> np.ndarray:
    """``n`` uniform random section points inside the energy boundary."""
    rng = np.random.default_rng(seed)
    x_max, p_max = section_extent(params, section)
    kept: list[np.ndarray] = []
    while sum(len(k) for k in kept) < n:
        batch = rng.uniform((-x_max, -p_max), (x_max, p_max), size=(2 * n, 2))
        kept.append(batch[inside_energy_boundary(params, batch, section)])
    return np.vstack(kept)[:n] if kept else np.empty((0, 2))


def evaluate_against_islands(
    model,
    islands: Sequence[ReactiveIsland],
    params: SystemParams,
    section: SectionConfig,
    resolution: int = 200,
    n_holdout: int = 500,
    seed: int = 0,
    horizon: float = 30.0,
    n_labeled: int = 0,
    integration: IntegrationSettings | None = None,
    threads: int | None = None,
) -> EvaluationReport:
    """Grid agreement with island membership plus accuracy on fresh trajectory labels.

    With ``n_holdout`` = 0 the accuracy figures are taken against island membership.
    An empty island list makes every grid point non-reactive ground truth.
    ``boundary_fit`` is, per island, the share of learned boundary within two grid cells of its curve.
    """
    xs, ps, grid, inside = prediction_grid(params, section, resolution)
    predicted = model.predict(grid) if len(grid) else np.empty(0, dtype=int)
    agreement = float(np.mean(predicted == island_truth(grid, islands))) if len(grid) else 0.0
    fit = island_fit(boundary_from_predictions(xs, ps, inside, predicted), islands) if islands else None

    if n_holdout > 0:
        points = holdout_points(params, section, n_holdout, seed + 1)
        samples = samples_from_points(params, points, section)
        truth = [int(lab.value) for lab in label_samples(params, samples, horizon, integration, threads)]
        report = score_predictions(truth, model.predict(points), n_labeled, boundary_agreement=agreement,
                                   boundary_fit=fit)
    else:
        report = score_predictions(island_truth(grid, islands), predicted, n_labeled, boundary_agreement=agreement,
                                   boundary_fit=fit)
    logger.info("evaluation: held-out accuracy %.4f, island agreement %.4f", report.test_accuracy, agreement)
    return report


def mirror_agreement(model, points: np.ndarray) -> float:
    """Share of points where predict(−x, −p_x) is the 1↔2 image of predict(x, p_x)."""
    points = np.atleast_2d(points)
    direct = model.predict(points)
    mirrored = model.predict(-points)
    mapped = np.array([int(EscapeChannel(int(c)).mirror) for c in mirrored])
    return float(np.mean(direct == mapped))


def _fit_best(dataset: LabeledDataset, report: CvReport, scale: bool, tol: float, max_iter: int) -> SvcModel:
    c, gamma = report.best
    return train_multiclass(RbfKernelParams(gamma=gamma, C=c), dataset, scale, tol, max_iter)


def train_fixed(
    params: SystemParams,
    section: SectionConfig,
    c_grid: Sequence[float] = FIXED_C_GRID,
    gamma_grid: Sequence[float] = FIXED_GAMMA_GRID,
    seed: int = 0,
    nx: int = 100,
    npx: int = 100,
    horizon: float = 30.0,
    n_folds: int = 5,
    scale: bool = False,
    dataset: LabeledDataset | None = None,
    islands: Sequence[ReactiveIsland] = (),
    resolution: int = 200,
    n_holdout: int = 500,
    tol: float = 1e-3,
    max_iter: int = 100_000,
    integration: IntegrationSettings | None = None,
    threads: int | None = None,
) -> tuple[SvcModel, CvReport, EvaluationReport, LabeledDataset]:
    """Grid dataset -> grid search -> best model -> evaluation."""
    _require_open_channels(params, section)
    if dataset is None:
        dataset = build_dataset(params, section, nx, npx, horizon, False, seed, integration=integration,
                                threads=threads)
    cv = grid_search(dataset, c_grid, gamma_grid, n_folds, seed, scale, tol, max_iter, threads)
    model = _fit_best(dataset, cv, scale, tol, max_iter)
    evaluation = evaluate_against_islands(
        model, islands, params, section, resolution, n_holdout, seed, horizon, len(dataset), integration, threads
    )
    evaluation = _with_training_summary(evaluation, cv, model)
    return model, cv, evaluation, dataset


def _with_training_summary(report: EvaluationReport, cv: CvReport, model: SvcModel) -> EvaluationReport:
    return replace(report, cv_accuracy=cv.best_accuracy, best_params=cv.best, n_support=model.n_support)


def propose_near_support_vectors(
    params: SystemParams,
    section: SectionConfig,
    support_points: np.ndarray,
    cfg: ActiveLearnConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Normal proposals around randomly chosen support vectors, rejected outside the energy boundary."""
    support_points = np.atleast_2d(support_points)[:, :2]
    n_pick = len(support_points) if cfg.n_sv_per_iter is None else min(cfg.n_sv_per_iter, len(support_points))
    chosen = support_points[rng.choice(len(support_points), size=n_pick, replace=False)]
    proposals = []
    for centre in chosen:
        for _ in range(cfg.pts_per_sv):
            for _ in range(cfg.max_retries):
                candidate = rng.normal(centre, cfg.proposal_sigma)
                if inside_energy_boundary(params, candidate, section)[0]:
                    proposals.append(candidate)
                    break
            else:
                raise ProposalExhausted(
                    f"{cfg.max_retries} proposals around ({centre[0]:.4g}, {centre[1]:.4g}) fell outside the boundary"
                )
    return np.array(proposals).reshape(-1, 2)


def active_learning_loop(
    params: SystemParams,
    section: SectionConfig,
    cfg: ActiveLearnConfig | None = None,
    c_grid: Sequence[float] = ACTIVE_C_GRID,
    gamma_grid: Sequence[float] = ACTIVE_GAMMA_GRID,
    labeler: Labeler | None = None,
    horizon: float = 30.0,
    n_folds: int = 5,
    tol: float = 1e-3,
    max_iter: int = 100_000,
    integration: IntegrationSettings | None = None,
    threads: int | None = None,
) -> tuple[SvcModel, list[EvaluationReport], LabeledDataset]:
    """Coarse grid, then resample around support vectors until the CV target or ``max_iters``.

    Each history entry scores out-of-fold predictions of the accumulated data.
    """
    cfg = cfg or ActiveLearnConfig()
    _require_open_channels(params, section)
    labeler = labeler or partial(label_samples, params, horizon=horizon, integration=integration, threads=threads)
    rng = np.random.default_rng(cfg.seed)

    samples = sample_grid(params, section, *cfg.initial_grid)
    dataset = assemble_dataset(samples, labeler(samples), section, horizon, cfg.seed)
    history: list[EvaluationReport] = []
    for iteration in range(cfg.max_iters + 1):
        cv = grid_search(dataset, c_grid, gamma_grid, n_folds, cfg.seed, False, tol, max_iter, threads)
        model = _fit_best(dataset, cv, False, tol, max_iter)
        c, gamma = cv.best
        oof = cross_val_predict(
            RbfSvc(C=c, gamma=gamma, tol=tol, max_iter=max_iter), dataset.features, dataset.y,
            cv=stratified_folds(dataset.y, n_folds, cfg.seed), n_jobs=threads,
        )
        history.append(score_predictions(
            dataset.y, oof, len(dataset),
            cv_accuracy=cv.best_accuracy, best_params=cv.best, n_support=model.n_support, iteration=iteration,
        ))
        logger.info("active iteration %d: %d labeled, CV accuracy %.4f (C=%g, gamma=%g)",
                    iteration, len(dataset), cv.best_accuracy, c, gamma)
        if cv.best_accuracy >= cfg.target_accuracy or iteration == cfg.max_iters:
            break
        points = propose_near_support_vectors(params, section, model.support_points, cfg, rng)
        new_samples = samples_from_points(params, points, section)
        dataset = dataset.concat(assemble_dataset(new_samples, labeler(new_samples), section, horizon, cfg.seed))
    return model, history, dataset


def train_with_ld(
    params: SystemParams,
    section: SectionConfig,
    c_grid: Sequence[float] = FIXED_C_GRID,
    gamma_grid: Sequence[float] = FIXED_GAMMA_GRID,
    seed: int = 0,
    nx: int = 100,
    npx: int = 100,
    horizon: float = 30.0,
    tau: float = 30.0,
    p_exponent: float = 0.5,
    n_folds: int = 5,
    scale: bool = True,
    dataset: LabeledDataset | None = None,
    islands: Sequence[ReactiveIsland] = (),
    resolution: int = 200,
    n_holdout: int = 500,
    tol: float = 1e-3,
    max_iter: int = 100_000,
    integration: IntegrationSettings | None = None,
    threads: int | None = None,
) -> tuple[LdFeatureModel, CvReport, EvaluationReport, LabeledDataset]:
    """Three-feature (x, p_x, LD) training; new points get their LD computed before prediction."""
    _require_open_channels(params, section)
    if dataset is None:
        dataset = build_dataset(params, section, nx, npx, horizon, True, seed, tau, p_exponent, integration, threads)
    if not dataset.has_ld:
        raise ConfigError("the LD pipeline needs a dataset with an ld column")
    cv = grid_search(dataset, c_grid, gamma_grid, n_folds, seed, scale, tol, max_iter, threads)
    svc = _fit_best(dataset, cv, scale, tol, max_iter)
    model = LdFeatureModel(svc, params, section, tau, p_exponent, integration, threads)
    evaluation = evaluate_against_islands(
        model, islands, params, section, resolution, n_holdout, seed, horizon, len(dataset), integration, threads
    )
    return model, cv, _with_training_summary(evaluation, cv, svc), dataset
