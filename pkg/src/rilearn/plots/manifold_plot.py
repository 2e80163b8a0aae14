"""Manifold fibers projected onto configuration space."""

from __future__ import annotations

import numpy as np
import polars as pl
from matplotlib.axes import Axes

from rilearn.dynamics.system import SaddleId, find_saddle, potential_energy
from rilearn.plots.base import ENERGY_BOUNDARY_COLOR, BasePlot
from rilearn.utils.serialization import read_csv

_FIBER_COLUMNS = ("fiber", "x", "y")


class ManifoldPlot(BasePlot):
    """(x, y) projection of every fiber with the zero-velocity curve V(x, y) = E."""

    figsize = (6.0, 6.0)

    @staticmethod
    def kind() -> str:
        return "manifold-projection"

    def load(self) -> None:
        paths = self.inputs_with_suffix(".csv")
        self.require(bool(paths), "no fiber files among the inputs")
        frames, energies = [], set()
        for k, path in enumerate(paths):
            frame, header = read_csv(path)
            self.require(all(c in frame.columns for c in _FIBER_COLUMNS), f"{path} is not a fiber file")
            self.require("energy" in header, f"{path} has no energy header")
            energies.add(float(header["energy"]))
            frames.append(frame.select(pl.lit(k, dtype=pl.Int64).alias("branch"), *_FIBER_COLUMNS))
        self.require(len(energies) == 1, "fiber files come from different energies")
        self.energy = energies.pop()
        self.fibers = pl.concat(frames)

    def draw(self, ax: Axes) -> None:
        params = self.config.system_params()
        for _, fiber in self.fibers.group_by(["branch", "fiber"], maintain_order=True):
            ax.plot(fiber["x"].to_numpy(), fiber["y"].to_numpy(), color="tab:blue", lw=0.3, alpha=0.6)
        xs = np.linspace(-1.5, 1.5, 301)
        ys = np.linspace(-1.0, 1.5, 251)
        xx, yy = np.meshgrid(xs, ys)
        ax.contour(xx, yy, potential_energy(params, xx, yy), levels=[self.energy],
                   colors=ENERGY_BOUNDARY_COLOR, linewidths=1.0)
        for saddle in SaddleId:
            eq = find_saddle(params, saddle)
            ax.plot(eq.state.x, eq.state.y, "kx", ms=6)
        ax.set_xlim(xs[0], xs[-1])
        ax.set_ylim(ys[0], ys[-1])
        ax.set_aspect("equal")
        ax.set_xlabel("$x$")
        ax.set_ylabel("$y$")
        ax.set_title(f"$E = {self.energy:g}$")

    def sidecar(self) -> pl.DataFrame:
        return self.fibers
