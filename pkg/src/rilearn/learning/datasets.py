"""Section sampling, escape labels and forward Lagrangian descriptors.

Initial conditions live on the section y = y_c with p_y > 0 reconstructed from
the energy. Labels come from integrating forward until one of the escape
lines x = -1.25, x = +1.25, y = +1.25 is crossed (channels 1, 2, 3) or the
horizon runs out (0, non-reactive).
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import partial

import numpy as np
import polars as pl

from rilearn.dynamics.integrator import IntegrationSettings, escape_events, integrate, integrate_quadrature
from rilearn.dynamics.manifolds import SectionConfig, section_extent
from rilearn.dynamics.system import EscapeChannel, PhaseState, SystemParams, potential_energy
from rilearn.errors import DataError, OutsideEnergyBoundary
from rilearn.utils.workers import parallel_map

logger = logging.getLogger(__name__)

_CHANNEL_BY_EVENT = dict(
    zip((e.id for e in escape_events()), (EscapeChannel.LEFT, EscapeChannel.RIGHT, EscapeChannel.TOP))
)


@dataclass(frozen=True)
class SectionSample:
    x: float
    p_x: float
    p_y: float
    section: SectionConfig

    def state(self) -> PhaseState:
        return PhaseState(self.x, self.section.y_c, self.p_x, self.p_y)


@dataclass(frozen=True)
class EscapeLabel:
    value: EscapeChannel
    escape_time: float | None = None

    def __post_init__(self) -> None:
        if (self.value is EscapeChannel.NON_REACTIVE) != (self.escape_time is None):
            raise DataError(f"escape_time must be set exactly for reactive labels ({self})")


@dataclass(frozen=True)
class LdValue:
    value: float
    tau_used: float


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    samples: tuple[SectionSample, ...]
    labels: tuple[EscapeLabel, ...]
    features: np.ndarray
    feature_names: tuple[str, ...]
    horizon: float
    seed: int
    section: SectionConfig
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (len(self.samples) == len(self.labels) == len(self.features)):
            raise DataError("samples, labels and feature rows are not aligned")
        if self.features.ndim != 2 or self.features.shape[1] != len(self.feature_names):
            raise DataError(f"feature matrix {self.features.shape} does not match {self.feature_names}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def y(self) -> np.ndarray:
        return np.array([int(lab.value) for lab in self.labels], dtype=int)

    @property
    def points(self) -> np.ndarray:
        """(x, p_x) of every sample."""
        return self.features[:, :2]

    @property
    def has_ld(self) -> bool:
        return "ld" in self.feature_names

    def class_counts(self) -> dict[int, int]:
        return dict(sorted(Counter(self.y.tolist()).items()))

    def concat(self, other: LabeledDataset) -> LabeledDataset:
        if other.feature_names != self.feature_names or other.section != self.section:
            raise DataError("cannot join datasets with different features or sections")
        return LabeledDataset(
            samples=self.samples + other.samples,
            labels=self.labels + other.labels,
            features=np.vstack([self.features, other.features]),
            feature_names=self.feature_names,
            horizon=self.horizon,
            seed=self.seed,
            section=self.section,
            meta=dict(self.meta),
        )

    def to_frame(self) -> pl.DataFrame:
        columns: dict[str, pl.Series] = {
            name: pl.Series(name, self.features[:, i], dtype=pl.Float64)
            for i, name in enumerate(self.feature_names)
        }
        columns["label"] = pl.Series("label", self.y, dtype=pl.Int64)
        columns["escape_time"] = pl.Series("escape_time", [lab.escape_time for lab in self.labels], dtype=pl.Float64)
        return pl.DataFrame(list(columns.values()))

    @classmethod
    def from_frame(cls, params: SystemParams, frame: pl.DataFrame, section: SectionConfig,
                   horizon: float, seed: int = 0) -> LabeledDataset:
        names = tuple(c for c in frame.columns if c not in ("label", "escape_time"))
        features = frame.select(names).to_numpy().astype(float)
        samples = tuple(
            SectionSample(float(x), float(p), momentum_from_energy(params, x, p, section), section)
            for x, p in features[:, :2]
        )
        labels = tuple(
            EscapeLabel(EscapeChannel(int(v)), None if t is None else float(t))
            for v, t in zip(frame["label"].to_list(), frame["escape_time"].to_list())
        )
        return cls(samples, labels, features, names, horizon, seed, section)


def momentum_from_energy(params: SystemParams, x: float, p_x: float, section: SectionConfig) -> float:
    """p_y = +√(2m_y(E − V(x, y_c) − p_x²/(2m_x)))."""
    radicand = 2.0 * params.m_y * (
        section.energy - float(potential_energy(params, x, section.y_c)) - p_x * p_x / (2.0 * params.m_x)
    )
    if radicand < 0:
        raise OutsideEnergyBoundary(f"(x={x}, p_x={p_x}) lies outside the energy boundary on y={section.y_c}")
    return math.sqrt(radicand)


def inside_energy_boundary(params: SystemParams, points: np.ndarray, section: SectionConfig) -> np.ndarray:
    """Mask of (x, p_x) rows with p_y > 0 available."""
    points = np.atleast_2d(points)
    x, p_x = points[:, 0], points[:, 1]
    radicand = section.energy - potential_energy(params, x, section.y_c) - p_x * p_x / (2.0 * params.m_x)
    return radicand > 0


def grid_axes(params: SystemParams, section: SectionConfig, nx: int, npx: int) -> tuple[np.ndarray, np.ndarray]:
    """Axes of the bounding box of the energy boundary, padded by one cell on each side.

    With n >= 4 points the inner n - 2 span [-max, max] and the outer two sit one
    spacing beyond. Smaller axes have no inner spacing to copy: n = 3 is the
    centre plus two points at 3·max, n = 2 only the two outer points, so a 2x2
    grid samples nothing.
    """
    if nx < 2 or npx < 2:
        raise DataError(f"grid needs at least 2x2 points, got {nx}x{npx}")
    x_max, p_max = section_extent(params, section)
    return _padded_axis(x_max, nx), _padded_axis(p_max, npx)


def _padded_axis(half_width: float, n: int) -> np.ndarray:
    if n < 4:
        return np.linspace(-3.0 * half_width, 3.0 * half_width, n)
    h = 2.0 * half_width / (n - 3)
    return np.linspace(-half_width - h, half_width + h, n)


def sample_grid(params: SystemParams, section: SectionConfig, nx: int, npx: int) -> list[SectionSample]:
    """Regular grid over the section, x-major; points outside the energy boundary are dropped."""
    xs, ps = grid_axes(params, section, nx, npx)
    xx, pp = np.meshgrid(xs, ps, indexing="ij")
    points = np.column_stack([xx.ravel(), pp.ravel()])
    return samples_from_points(params, points[inside_energy_boundary(params, points, section)], section)


def samples_from_points(params: SystemParams, points: np.ndarray, section: SectionConfig) -> list[SectionSample]:
    return [
        SectionSample(float(x), float(p), momentum_from_energy(params, float(x), float(p), section), section)
        for x, p in np.atleast_2d(points)
    ]


def label_by_escape(
    params: SystemParams,
    sample: SectionSample,
    horizon: float = 30.0,
    integration: IntegrationSettings | None = None,
) -> EscapeLabel:
    """Channel of the first escape line crossed within ``horizon``, else non-reactive."""
    settings = (integration or IntegrationSettings()).with_(t_max=horizon)
    run = integrate(params, sample.state(), settings, escape_events(), dense_output=False)
    if run.terminated_by is None:
        return EscapeLabel(EscapeChannel.NON_REACTIVE)
    return EscapeLabel(_CHANNEL_BY_EVENT[run.terminated_by], float(run.times[-1]))


def _ld_integrand(exponent: float, rates: np.ndarray) -> float:
    return float(np.sum(np.abs(rates) ** exponent))


def compute_forward_ld(
    params: SystemParams,
    sample: SectionSample | PhaseState,
    tau: float = 30.0,
    p_exponent: float = 0.5,
    integration: IntegrationSettings | None = None,
) -> LdValue:
    """Σₖ∫|fₖ|^p dt along the forward trajectory, stopped at τ or at escape."""
    if not 0 < p_exponent <= 1:
        raise DataError(f"p_exponent must lie in (0, 1], got {p_exponent}")
    if tau < 0:
        raise DataError(f"tau must be non-negative, got {tau}")
    if tau == 0:
        return LdValue(0.0, 0.0)
    state = sample.state() if isinstance(sample, SectionSample) else sample
    settings = (integration or IntegrationSettings()).with_(t_max=tau)
    run, value = integrate_quadrature(params, state, partial(_ld_integrand, p_exponent), settings, escape_events())
    return LdValue(value, float(run.times[-1]))


def _label_job(job) -> EscapeLabel:
    params, sample, horizon, integration = job
    return label_by_escape(params, sample, horizon, integration)


def _ld_job(job) -> LdValue:
    params, sample, tau, exponent, integration = job
    return compute_forward_ld(params, sample, tau, exponent, integration)


def label_samples(params: SystemParams, samples: list[SectionSample], horizon: float = 30.0,
                  integration: IntegrationSettings | None = None, threads: int | None = None) -> list[EscapeLabel]:
    return parallel_map(_label_job, [(params, s, horizon, integration) for s in samples], threads)


def ld_samples(params: SystemParams, samples: list[SectionSample], tau: float = 30.0, p_exponent: float = 0.5,
               integration: IntegrationSettings | None = None, threads: int | None = None) -> list[LdValue]:
    return parallel_map(_ld_job, [(params, s, tau, p_exponent, integration) for s in samples], threads)


def dataset_from_samples(
    params: SystemParams,
    samples: list[SectionSample],
    section: SectionConfig,
    horizon: float = 30.0,
    with_ld: bool = False,
    seed: int = 0,
    tau: float = 30.0,
    p_exponent: float = 0.5,
    integration: IntegrationSettings | None = None,
    threads: int | None = None,
) -> LabeledDataset:
    labels = label_samples(params, samples, horizon, integration, threads)
    ld_values = None
    if with_ld:
        ld_values = [ld.value for ld in ld_samples(params, samples, tau, p_exponent, integration, threads)]
    dataset = assemble_dataset(samples, labels, section, horizon, seed, ld_values)
    if with_ld:
        dataset.meta.update(tau=tau, ld_exponent=p_exponent)
    return dataset


def assemble_dataset(
    samples: list[SectionSample],
    labels: list[EscapeLabel],
    section: SectionConfig,
    horizon: float = 30.0,
    seed: int = 0,
    ld_values: list[float] | None = None,
) -> LabeledDataset:
    columns = [[s.x for s in samples], [s.p_x for s in samples]]
    names: tuple[str, ...] = ("x", "p_x")
    if ld_values is not None:
        columns.append(list(ld_values))
        names += ("ld",)
    features = np.array(columns, dtype=float).T.reshape(len(samples), len(names))
    return LabeledDataset(tuple(samples), tuple(labels), features, names, horizon, seed, section)


def build_dataset(
    params: SystemParams,
    section: SectionConfig,
    nx: int,
    npx: int,
    horizon: float = 30.0,
    with_ld: bool = False,
    seed: int = 0,
    tau: float = 30.0,
    p_exponent: float = 0.5,
    integration: IntegrationSettings | None = None,
    threads: int | None = None,
) -> LabeledDataset:
    """Grid, label and (optionally) LD-featurize a section. Row order is grid order."""
    samples = sample_grid(params, section, nx, npx)
    dataset = dataset_from_samples(
        params, samples, section, horizon, with_ld, seed, tau, p_exponent, integration, threads
    )
    logger.info(
        "dataset %dx%d at E=%.6g y=%g: %d samples, classes %s",
        nx, npx, section.energy, section.y_c, len(dataset), dataset.class_counts(),
    )
    return dataset
