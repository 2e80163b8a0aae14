"""Reactive islands on the section, inside the energy boundary."""

from __future__ import annotations

import polars as pl
from matplotlib.axes import Axes

from rilearn.dynamics.manifolds import energy_boundary_on_section
from rilearn.plots.base import (
    CHANNEL_COLORS,
    ENERGY_BOUNDARY_COLOR,
    BasePlot,
    curve_frame,
    label_section_axes,
)


class IslandsPlot(BasePlot):
    """Island curves as solid lines, one color per escape channel."""

    @staticmethod
    def kind() -> str:
        return "islands"

    def load(self) -> None:
        self.islands = self.island_inputs()
        self.require(bool(self.islands), "no island files among the inputs")
        sections = {i.section for i in self.islands}
        self.require(len(sections) == 1, "islands come from different sections")
        self.section = self.islands[0].section
        self.boundary = energy_boundary_on_section(self.config.system_params(), self.section)

    def draw_islands(self, ax: Axes) -> None:
        ax.plot(self.boundary[:, 0], self.boundary[:, 1], color=ENERGY_BOUNDARY_COLOR, lw=1.0, label="energy boundary")
        for island in self.islands:
            ax.plot(island.curve[:, 0], island.curve[:, 1], color=CHANNEL_COLORS[int(island.channel)],
                    lw=1.5, label=f"island {island.channel.name.lower()}")

    def draw(self, ax: Axes) -> None:
        self.draw_islands(ax)
        label_section_axes(ax, self.section.energy, self.section.y_c)
        ax.legend(loc="upper right", fontsize="small")

    def sidecar(self) -> pl.DataFrame:
        frames = [curve_frame("energy_boundary", self.boundary)]
        frames += [curve_frame(f"island_{int(i.channel)}", i.curve) for i in self.islands]
        return pl.concat(frames)
