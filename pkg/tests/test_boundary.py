import numpy as np
from conftest import circle_island

from rilearn.learning.boundary import (
    boundary_arclength_within,
    extract_decision_boundary,
    island_fit,
    prediction_grid,
)


class Rule:
    def __init__(self, rule):
        self.rule = rule

    def predict(self, points):
        return self.rule(np.atleast_2d(points))


def disk(points, centre=(0.0, 0.0), radius=0.3):
    return np.where(np.hypot(points[:, 0] - centre[0], points[:, 1] - centre[1]) < radius, 3, 0)


def test_prediction_grid_keeps_only_the_inside(params, section):
    xs, ps, points, inside = prediction_grid(params, section, 30)
    assert inside.shape == (30, 30)
    assert len(points) == inside.sum()
    assert not inside[0].any() and not inside[:, -1].any()


def test_contours_follow_a_disk(params, section):
    boundary = extract_decision_boundary(Rule(disk), params, section, resolution=80)
    assert list(boundary.polylines) == [(0, 3)]
    assert not boundary.is_empty
    lines = boundary.for_channel(3)
    assert lines and boundary.for_channel(1) == []
    radii = np.hypot(*np.vstack(lines).T)
    assert np.all(np.abs(radii - 0.3) < boundary.cell_size)
    assert boundary_arclength_within(lines, circle_island(section).curve, 2 * boundary.cell_size) == 1.0


def test_a_misplaced_boundary_scores_low(params, section):
    shifted = Rule(lambda p: disk(p, centre=(0.15, 0.0)))
    boundary = extract_decision_boundary(shifted, params, section, resolution=80)
    island = circle_island(section)
    fit = island_fit(boundary, [island])
    assert list(fit) == [3]
    assert fit[3] == boundary_arclength_within(boundary.for_channel(3), island.curve, 2 * boundary.cell_size)
    assert fit[3] < 0.5


def test_single_class_has_no_boundary(params, section):
    boundary = extract_decision_boundary(Rule(lambda p: np.zeros(len(p), dtype=int)), params, section, 40)
    assert boundary.is_empty
    assert boundary.all_polylines() == []
    assert boundary_arclength_within([], circle_island(section).curve, 0.1) == 0.0
