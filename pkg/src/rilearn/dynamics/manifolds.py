"""Tube manifolds of Lyapunov orbits and their reactive islands on a Poincaré section.

A section is the set {y = y_c, p_y > 0, H = E}. Stable fibers are integrated
backward from the orbit, so the first section crossing along a fiber is the
last crossing before escape in forward time: the first-order island.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from matplotlib.path import Path
from scipy.optimize import brentq

from rilearn.dynamics.integrator import (
    Direction,
    IntegrationSettings,
    Trajectory,
    escape_events,
    integrate,
    integrate_variational,
)
from rilearn.dynamics.periodic_orbits import MonodromyAnalysis, PeriodicOrbit
from rilearn.dynamics.system import (
    EscapeChannel,
    PhaseState,
    SystemParams,
    find_saddle,
    potential_energy,
)
from rilearn.errors import DataError, EmptySection, IncompleteIsland, NoCrossing
from rilearn.utils.workers import parallel_map

logger = logging.getLogger(__name__)

# |ẏ| below this at a crossing is reported as a near-tangential intersection.
TANGENCY_TOL = 1e-4
DUPLICATE_TOL = 1e-9
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class SectionConfig:
    """The surface y = y_c, p_y > 0 on the energy level ``energy``."""

    energy: float
    y_c: float = 0.0


class Stability(Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"

    @property
    def direction(self) -> Direction:
        return Direction.BACKWARD if self is Stability.STABLE else Direction.FORWARD


class Side(Enum):
    PLUS = 1
    MINUS = -1


@dataclass(frozen=True, eq=False)
class ManifoldBranch:
    orbit: PeriodicOrbit
    stability: Stability
    side: Side
    fibers: tuple[Trajectory, ...]
    seed_times: np.ndarray = field(repr=False)

    @property
    def energy(self) -> float:
        return self.orbit.energy


@dataclass(frozen=True)
class SectionCrossing:
    index: int
    t: float
    state: PhaseState

    @property
    def point(self) -> tuple[float, float]:
        return self.state.x, self.state.p_x


@dataclass(frozen=True, eq=False)
class ReactiveIsland:
    channel: EscapeChannel
    section: SectionConfig
    curve: np.ndarray
    order: int = 1

    @property
    def area(self) -> float:
        return polygon_area(self.curve)

    @property
    def centroid(self) -> np.ndarray:
        return polygon_centroid(self.curve)


def polygon_area(curve: np.ndarray) -> float:
    """Shoelace area of a closed (x, p_x) curve."""
    x, p = curve[:, 0], curve[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(p, -1)) - np.dot(p, np.roll(x, -1))))


def polygon_centroid(curve: np.ndarray) -> np.ndarray:
    pts = curve[:-1] if np.allclose(curve[0], curve[-1]) else curve
    x, p = pts[:, 0], pts[:, 1]
    cross = x * np.roll(p, -1) - np.roll(x, -1) * p
    signed = 0.5 * cross.sum()
    if abs(signed) < 1e-300:
        return pts.mean(axis=0)
    cx = ((x + np.roll(x, -1)) * cross).sum() / (6.0 * signed)
    cp = ((p + np.roll(p, -1)) * cross).sum() / (6.0 * signed)
    return np.array([cx, cp])


# --- energy boundary ---

def _section_quadratic(params: SystemParams, section: SectionConfig) -> tuple[float, float]:
    """V(x, y_c) = a·x² + c."""
    a = 0.5 * params.omega_x**2 + section.y_c
    c = float(potential_energy(params, 0.0, section.y_c))
    return a, c


def section_extent(params: SystemParams, section: SectionConfig) -> tuple[float, float]:
    """Half-widths (x_max, p_x max) of the energy boundary ellipse."""
    a, c = _section_quadratic(params, section)
    if a <= 0:
        raise DataError(f"section y_c={section.y_c} is not bounded in x")
    excess = section.energy - c
    if excess <= 0:
        raise EmptySection(f"no admissible points on y_c={section.y_c} at E={section.energy}")
    return math.sqrt(excess / a), math.sqrt(2.0 * params.m_x * excess)


def energy_boundary_on_section(params: SystemParams, section: SectionConfig, n_points: int = 721) -> np.ndarray:
    """Closed curve p_x²/(2m_x) + V(x, y_c) = E, counter-clockwise from (x_max, 0)."""
    x_max, p_max = section_extent(params, section)
    theta = np.linspace(0.0, 2.0 * np.pi, n_points)
    curve = np.column_stack([x_max * np.cos(theta), p_max * np.sin(theta)])
    curve[-1] = curve[0]
    return curve


# --- globalization ---

def well_side(params: SystemParams, orbit: PeriodicOrbit, analysis: MonodromyAnalysis,
              stability: Stability = Stability.STABLE) -> Side:
    """Branch whose initial displacement points from the saddle toward the well."""
    if orbit.saddle_id is None:
        raise DataError("orbit is not attached to a saddle")
    eq = find_saddle(params, orbit.saddle_id)
    vec = analysis.stable_eigvec if stability is Stability.STABLE else analysis.unstable_eigvec
    inward = -np.array([eq.state.x, eq.state.y])
    return Side.PLUS if float(np.dot(vec[:2], inward)) > 0 else Side.MINUS


def _fiber_job(job: tuple[SystemParams, np.ndarray, IntegrationSettings]) -> Trajectory:
    params, state, settings = job
    return integrate(params, PhaseState.from_array(state), settings, escape_events())


def globalize_manifold(
    params: SystemParams,
    analysis: MonodromyAnalysis,
    orbit: PeriodicOrbit,
    stability: Stability,
    side: Side,
    n_seeds: int = 400,
    t_span: float = 20.0,
    displacement: float = 1e-6,
    integration: IntegrationSettings | None = None,
    threads: int | None = None,
) -> ManifoldBranch:
    """Seed ``n_seeds`` points along the orbit and grow one fiber from each."""
    if n_seeds < 3:
        raise DataError(f"n_seeds must be at least 3, got {n_seeds}")
    integration = integration or IntegrationSettings()
    carrier = integrate_variational(params, orbit.initial_state, integration.with_(t_max=orbit.period))
    eigvec = analysis.stable_eigvec if stability is Stability.STABLE else analysis.unstable_eigvec

    seed_times = np.arange(n_seeds) * (orbit.period / n_seeds)
    jobs = []
    for t in seed_times:
        state = carrier.base.state_at(t) if t > 0 else orbit.initial_state.as_array()
        transported = carrier.stm_at(t) @ eigvec if t > 0 else eigvec.copy()
        transported /= np.linalg.norm(transported)
        position_norm = float(np.linalg.norm(transported[:2]))
        eps = displacement / position_norm if position_norm > 1e-12 else displacement
        jobs.append((params, state + side.value * eps * transported,
                     integration.with_(t_max=t_span, direction=stability.direction)))

    fibers = parallel_map(_fiber_job, jobs, threads)
    logger.info(
        "globalized %s %s branch of the %s orbit: %d fibers, %d escaped",
        stability.value, side.name.lower(), orbit.saddle_id.value if orbit.saddle_id else "?",
        len(fibers), sum(f.terminated_by is not None for f in fibers),
    )
    return ManifoldBranch(orbit, stability, side, tuple(fibers), seed_times)


# --- section crossings ---

def fiber_crossings(fiber: Trajectory, section: SectionConfig, fiber_index: int = 0) -> list[SectionCrossing]:
    """Crossings of y = y_c with p_y > 0, in the fiber's own time order."""
    g = fiber.states[:, 1] - section.y_c
    crossings: list[SectionCrossing] = []
    for i in range(len(g) - 1):
        if not (g[i] * g[i + 1] < 0 or (g[i + 1] == 0 and g[i] != 0)):
            continue
        t0, t1 = fiber.times[i], fiber.times[i + 1]
        if g[i + 1] == 0:
            t_root = float(t1)
        else:
            t_root = brentq(lambda t: fiber.state_at(t)[1] - section.y_c, t0, t1, xtol=1e-14, rtol=1e-15)
        state = fiber.state_at(t_root)
        if state[3] <= 0:
            continue
        if abs(state[3]) < TANGENCY_TOL:
            logger.warning("fiber %d meets y=%g almost tangentially (p_y=%.2e)", fiber_index, section.y_c, state[3])
        state[1] = section.y_c
        crossings.append(SectionCrossing(len(crossings) + 1, t_root, PhaseState.from_array(state)))
    return crossings


def section_crossings(branch: ManifoldBranch, section: SectionConfig, strict: bool = False) -> list[list[SectionCrossing]]:
    """Per-fiber crossing lists; ``strict`` turns a fiber without crossings into NoCrossing."""
    result = [fiber_crossings(f, section, i) for i, f in enumerate(branch.fibers)]
    if strict:
        missing = [i for i, c in enumerate(result) if not c]
        if missing:
            raise NoCrossing(f"{len(missing)} fibers never reach y={section.y_c} (first: {missing[0]})")
    return result


def _dedupe(points: np.ndarray) -> np.ndarray:
    keep = [0]
    for i in range(1, len(points)):
        if np.linalg.norm(points[i] - points[keep[-1]]) > DUPLICATE_TOL:
            keep.append(i)
    return points[keep]


def extract_reactive_island(
    branch: ManifoldBranch, section: SectionConfig, max_missing: float = 0.01
) -> ReactiveIsland:
    """First-order island: crossing 1 of each stable fiber, ordered by seed, closed."""
    if branch.stability is not Stability.STABLE:
        raise DataError("reactive islands are cut from stable branches")
    if branch.orbit.saddle_id is None:
        raise DataError("branch orbit is not attached to a saddle")
    crossings = section_crossings(branch, section)
    missing = sum(1 for c in crossings if not c)
    if missing > max_missing * len(crossings):
        raise IncompleteIsland(
            f"{missing}/{len(crossings)} fibers of the {branch.orbit.saddle_id.value} branch miss y={section.y_c}"
        )
    points = np.array([c[0].point for c in crossings if c])
    if len(points) < 3:
        raise IncompleteIsland("fewer than three crossing points")
    points = _dedupe(points)
    if np.linalg.norm(points[0] - points[-1]) <= DUPLICATE_TOL:
        points = points[:-1]
    curve = np.vstack([points, points[:1]])
    island = ReactiveIsland(branch.orbit.saddle_id.channel, section, curve)
    logger.info(
        "island for channel %d on y=%g at E=%.6g: %d points, area %.6g",
        island.channel, section.y_c, section.energy, len(curve) - 1, island.area,
    )
    return island


def _distance_to_curve(points: np.ndarray, curve: np.ndarray) -> np.ndarray:
    a, b = curve[:-1], curve[1:]
    ab = b - a
    length2 = np.maximum((ab**2).sum(axis=1), 1e-300)
    rel = points[:, None, :] - a[None, :, :]
    t = np.clip((rel * ab[None]).sum(axis=2) / length2[None], 0.0, 1.0)
    nearest = a[None] + t[..., None] * ab[None]
    return np.sqrt(((points[:, None, :] - nearest) ** 2).sum(axis=2)).min(axis=1)


def island_contains(island: ReactiveIsland, points) -> np.ndarray | bool:
    """Point-in-polygon on the island curve; points within 1e-9 of it count as inside.

    Accepts one (x, p_x) pair or an (n, 2) array.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    inside = Path(island.curve, closed=True).contains_points(pts)
    lo, hi = island.curve.min(axis=0) - BOUNDARY_TOL, island.curve.max(axis=0) + BOUNDARY_TOL
    candidates = np.flatnonzero(~inside & np.all((pts >= lo) & (pts <= hi), axis=1))
    for start in range(0, len(candidates), 2048):
        chunk = candidates[start:start + 2048]
        inside[chunk] = _distance_to_curve(pts[chunk], island.curve) <= BOUNDARY_TOL
    if np.ndim(points) == 1:
        return bool(inside[0])
    return inside
