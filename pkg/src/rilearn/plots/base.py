"""Abstract base plot."""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from pathlib import Path

import matplotlib
import numpy as np
import polars as pl
import yaml
from matplotlib.axes import Axes
from matplotlib.figure import Figure

from rilearn.errors import FormatError
from rilearn.utils.config import RunConfig
from rilearn.utils.serialization import read_csv, read_island, write_csv

logger = logging.getLogger(__name__)

# Colors per escape channel: non-reactive, left, right, top.
CHANNEL_COLORS = {0: "0.6", 1: "tab:red", 2: "tab:blue", 3: "tab:green"}
ENERGY_BOUNDARY_COLOR = "magenta"
SUPPORT_VECTOR_COLOR = "cyan"

_RC = {"svg.hashsalt": "rilearn", "svg.fonttype": "none", "figure.dpi": 100}


class BasePlot(ABC):
    """Base class for all plots: load inputs, draw on one axes, export SVG plus a CSV sidecar."""

    figsize: tuple[float, float] = (6.0, 5.0)

    def __init__(self, inputs: list[Path], config: RunConfig) -> None:
        self.inputs = [Path(p) for p in inputs]
        self.config = config

    @staticmethod
    @abstractmethod
    def kind() -> str:
        """Name used with ``plot --what``."""
        ...

    @abstractmethod
    def load(self) -> None:
        """Read and check the input files."""
        ...

    @abstractmethod
    def draw(self, ax: Axes) -> None:
        ...

    @abstractmethod
    def sidecar(self) -> pl.DataFrame:
        """The plotted numbers, long format."""
        ...

    # --- input helpers ---

    def inputs_with_suffix(self, *suffixes: str) -> list[Path]:
        return [p for p in self.inputs if p.suffix.lower() in suffixes]

    def island_inputs(self) -> list:
        """Island curves among the CSV inputs (files whose header names a channel)."""
        islands = []
        for path in self.inputs_with_suffix(".csv"):
            _, header = read_csv(path)
            if "channel" in header:
                islands.append(read_island(path))
        return islands

    def require(self, condition: bool, message: str) -> None:
        if not condition:
            raise FormatError(f"plot {self.kind()}: {message}")

    # --- rendering ---

    def render(self, out: Path) -> tuple[Path, Path]:
        """Write ``out`` (SVG) and its sidecar ``out.with_suffix('.csv')``."""
        out = Path(out)
        self.load()
        out.parent.mkdir(parents=True, exist_ok=True)
        with matplotlib.rc_context(_RC):
            fig = Figure(figsize=self.figsize)
            ax = fig.add_subplot()
            self.draw(ax)
            fig.tight_layout()
            fig.savefig(out, format="svg", metadata={
                "Date": None,
                "Title": f"rilearn {self.kind()}",
                "Description": yaml.safe_dump(self.config.sectioned(), sort_keys=False),
            })
        sidecar = write_csv(out.with_suffix(".csv"), self.sidecar(), {"plot": self.kind()}, self.config)
        logger.info("wrote %s and %s", out, sidecar)
        return out, sidecar


def curve_frame(series: str, curve: np.ndarray, names: tuple[str, str] = ("x", "p_x")) -> pl.DataFrame:
    """Long-format rows (series, index, a, b) for one polyline."""
    return pl.DataFrame({
        "series": [series] * len(curve),
        "index": np.arange(len(curve), dtype=np.int64),
        names[0]: np.asarray(curve[:, 0], dtype=float),
        names[1]: np.asarray(curve[:, 1], dtype=float),
    })


def label_section_axes(ax: Axes, energy: float, y_c: float) -> None:
    ax.set_xlabel("$x$")
    ax.set_ylabel("$p_x$")
    ax.set_title(f"$E = {energy:g}$, $y = {y_c:g}$")
