"""Forward Lagrangian descriptor over the section samples."""

from __future__ import annotations

import polars as pl
from matplotlib.axes import Axes

from rilearn.dynamics.manifolds import energy_boundary_on_section
from rilearn.plots.base import ENERGY_BOUNDARY_COLOR, BasePlot, label_section_axes
from rilearn.utils.serialization import read_dataset


class LdFieldPlot(BasePlot):
    """Scatter of the dataset points colored by their LD value."""

    @staticmethod
    def kind() -> str:
        return "ld-field"

    def load(self) -> None:
        datasets = self.inputs_with_suffix(".csv")
        self.require(len(datasets) == 1, "expected exactly one dataset file")
        params = self.config.system_params()
        self.dataset = read_dataset(datasets[0], params)
        self.require(self.dataset.has_ld, f"{datasets[0]} has no ld column")
        self.boundary = energy_boundary_on_section(params, self.dataset.section)

    def draw(self, ax: Axes) -> None:
        ld = self.dataset.features[:, self.dataset.feature_names.index("ld")]
        points = self.dataset.points
        image = ax.scatter(points[:, 0], points[:, 1], c=ld, s=4, cmap="viridis", linewidths=0)
        ax.figure.colorbar(image, ax=ax, label="LD")
        ax.plot(self.boundary[:, 0], self.boundary[:, 1], color=ENERGY_BOUNDARY_COLOR, lw=1.0)
        label_section_axes(ax, self.dataset.section.energy, self.dataset.section.y_c)

    def sidecar(self) -> pl.DataFrame:
        return self.dataset.to_frame().select("x", "p_x", "ld", "label")
