import numpy as np
import pytest

from rilearn.dynamics.manifolds import SectionConfig
from rilearn.dynamics.system import SystemParams


@pytest.fixture(scope="session")
def params():
    return SystemParams()


@pytest.fixture(scope="session")
def section():
    return SectionConfig(energy=0.17, y_c=0.0)


@pytest.fixture(scope="session")
def bounded_section():
    """Below the saddle energy: every trajectory stays in the well."""
    return SectionConfig(energy=0.12, y_c=0.0)


def disk_labels(points, radius=0.3, left_cut=-0.35):
    """Analytic ground truth on the section: 3 inside a disk, 1 left of a cut, 0 elsewhere."""
    points = np.atleast_2d(points)
    labels = np.zeros(len(points), dtype=int)
    labels[points[:, 0] < left_cut] = 1
    labels[np.hypot(points[:, 0], points[:, 1]) < radius] = 3
    return labels


@pytest.fixture
def disk_labeler():
    """Labeler with the signature of label_samples, backed by ``disk_labels``."""
    from rilearn.dynamics.system import EscapeChannel
    from rilearn.learning.datasets import EscapeLabel

    def label(samples):
        values = disk_labels(np.array([[s.x, s.p_x] for s in samples]).reshape(-1, 2))
        return [EscapeLabel(EscapeChannel(int(v)), None if v == 0 else 1.0) for v in values]

    return label


def circle_island(section, radius=0.3, n=400):
    from rilearn.dynamics.manifolds import ReactiveIsland
    from rilearn.dynamics.system import EscapeChannel

    theta = np.linspace(0.0, 2.0 * np.pi, n)
    curve = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    curve[-1] = curve[0]
    return ReactiveIsland(EscapeChannel.TOP, section, curve)


def section_islands(params, section, saddles=None, n_seeds=400, threads=4):
    """First-order islands of the given saddles (all three by default) on ``section``."""
    from rilearn.dynamics.manifolds import Stability, extract_reactive_island, globalize_manifold, well_side
    from rilearn.dynamics.periodic_orbits import monodromy, orbit_at_energy
    from rilearn.dynamics.system import SaddleId

    islands = []
    for saddle in saddles or tuple(SaddleId):
        orbit = orbit_at_energy(params, saddle, section.energy)
        analysis = monodromy(params, orbit)
        side = well_side(params, orbit, analysis, Stability.STABLE)
        branch = globalize_manifold(params, analysis, orbit, Stability.STABLE, side, n_seeds=n_seeds, threads=threads)
        islands.append(extract_reactive_island(branch, section))
    return islands


def island_masks(params, section, island, resolution):
    """Full grid points with the island's eroded interior and a thin ring just outside it."""
    from scipy.ndimage import binary_dilation, binary_erosion

    from rilearn.dynamics.manifolds import island_contains
    from rilearn.learning.boundary import prediction_grid

    xs, ps, _, inside = prediction_grid(params, section, resolution)
    xx, pp = np.meshgrid(xs, ps, indexing="ij")
    grid = np.column_stack([xx.ravel(), pp.ravel()])
    member = island_contains(island, grid).reshape(inside.shape) & inside
    interior = binary_erosion(member, iterations=2)
    ring = binary_dilation(member, iterations=4) & ~binary_dilation(member, iterations=1) & inside
    return grid, interior.ravel(), ring.ravel()
