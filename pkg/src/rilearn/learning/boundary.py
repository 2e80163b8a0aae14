"""Learned decision boundaries as contour polylines on the section."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.spatial import cKDTree
from skimage.measure import find_contours

from rilearn.dynamics.manifolds import ReactiveIsland, SectionConfig
from rilearn.dynamics.system import SystemParams
from rilearn.learning.datasets import grid_axes, inside_energy_boundary

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DecisionBoundary:
    polylines: dict[tuple[int, int], list[np.ndarray]] = field(default_factory=dict)
    cell_size: float = 0.0

    @property
    def is_empty(self) -> bool:
        return not any(self.polylines.values())

    def for_channel(self, channel: int) -> list[np.ndarray]:
        return [line for pair, lines in self.polylines.items() if channel in pair for line in lines]

    def all_polylines(self) -> list[tuple[tuple[int, int], np.ndarray]]:
        return [(pair, line) for pair, lines in self.polylines.items() for line in lines]


def prediction_grid(params: SystemParams, section: SectionConfig, resolution: int):
    """Axes, the (n, 2) points inside the energy boundary and their mask over the grid."""
    xs, ps = grid_axes(params, section, resolution, resolution)
    xx, pp = np.meshgrid(xs, ps, indexing="ij")
    points = np.column_stack([xx.ravel(), pp.ravel()])
    mask = inside_energy_boundary(params, points, section).reshape(xx.shape)
    return xs, ps, points[mask.ravel()], mask


def extract_decision_boundary(model, params: SystemParams, section: SectionConfig,
                              resolution: int = 200) -> DecisionBoundary:
    """Marching-squares contours between each pair of predicted classes.

    ``model`` is anything with ``predict`` over (x, p_x) rows.
    """
    xs, ps, points, inside = prediction_grid(params, section, resolution)
    predicted = model.predict(points) if len(points) else np.empty(0, dtype=int)
    return boundary_from_predictions(xs, ps, inside, predicted)


def boundary_from_predictions(xs: np.ndarray, ps: np.ndarray, inside: np.ndarray,
                              predicted: np.ndarray) -> DecisionBoundary:
    """Contours from labels already predicted at the ``inside`` cells of a prediction grid."""
    labels = np.full(inside.shape, -1, dtype=int)
    labels[inside] = predicted
    present = sorted(int(c) for c in np.unique(labels[inside]))
    dx, dp = xs[1] - xs[0], ps[1] - ps[0]

    polylines: dict[tuple[int, int], list[np.ndarray]] = {}
    for a, b in combinations(present, 2):
        pair_mask = inside & ((labels == a) | (labels == b))
        field_ = np.where(labels == a, 1.0, -1.0)
        contours = find_contours(field_, 0.0, mask=pair_mask)
        lines = [np.column_stack([xs[0] + c[:, 0] * dx, ps[0] + c[:, 1] * dp]) for c in contours if len(c) > 1]
        if lines:
            polylines[(a, b)] = lines
    logger.debug("boundary: %d polylines over classes %s", sum(len(v) for v in polylines.values()), present)
    return DecisionBoundary(polylines, float(max(dx, dp)))


def _resample(curve: np.ndarray, spacing: float) -> np.ndarray:
    pieces = [curve[:1]]
    for a, b in zip(curve[:-1], curve[1:]):
        n = max(1, int(np.ceil(np.linalg.norm(b - a) / spacing)))
        pieces.append(a + (b - a) * (np.arange(1, n + 1)[:, None] / n))
    return np.vstack(pieces)


def boundary_arclength_within(lines: list[np.ndarray], curve: np.ndarray, tolerance: float) -> float:
    """Fraction of the polylines' arclength lying within ``tolerance`` of ``curve``."""
    segments = [(line[:-1], line[1:]) for line in lines if len(line) > 1]
    if not segments:
        return 0.0
    starts = np.vstack([s for s, _ in segments])
    ends = np.vstack([e for _, e in segments])
    lengths = np.linalg.norm(ends - starts, axis=1)
    total = lengths.sum()
    if total == 0:
        return 0.0
    tree = cKDTree(_resample(curve, tolerance / 4.0))
    distances, _ = tree.query(0.5 * (starts + ends))
    return float(lengths[distances <= tolerance].sum() / total)


def island_fit(boundary: DecisionBoundary, islands: Sequence[ReactiveIsland], cells: float = 2.0) -> dict[int, float]:
    """Per island channel, the share of boundary arclength around that channel within ``cells`` grid cells
    of the island curve."""
    tolerance = cells * boundary.cell_size
    return {
        int(island.channel): boundary_arclength_within(boundary.for_channel(int(island.channel)), island.curve,
                                                       tolerance)
        for island in islands
    }
