"""Cross-validated accuracy over the (C, gamma) grid."""

from __future__ import annotations

import numpy as np
import polars as pl
from matplotlib.axes import Axes

from rilearn.plots.base import BasePlot
from rilearn.utils.serialization import cv_report_from_dict, read_yaml


class HeatmapPlot(BasePlot):

    @staticmethod
    def kind() -> str:
        return "heatmap"

    def load(self) -> None:
        reports = self.inputs_with_suffix(".yaml", ".yml")
        self.require(len(reports) == 1, "expected exactly one report file")
        doc = read_yaml(reports[0])
        self.require("cv_report" in doc, f"{reports[0]} has no cv_report")
        self.report = cv_report_from_dict(doc["cv_report"])

    def draw(self, ax: Axes) -> None:
        matrix = self.report.accuracy_matrix()
        image = ax.imshow(matrix, origin="lower", cmap="viridis", aspect="auto")
        ax.figure.colorbar(image, ax=ax, label="CV accuracy")
        ax.set_xticks(range(len(self.report.gamma_values)), [f"{g:g}" for g in self.report.gamma_values])
        ax.set_yticks(range(len(self.report.c_values)), [f"{c:g}" for c in self.report.c_values])
        ax.set_xlabel(r"$\gamma$")
        ax.set_ylabel("$C$")
        best_c, best_gamma = self.report.best
        ax.plot(self.report.gamma_values.index(best_gamma), self.report.c_values.index(best_c), "r*", ms=12)
        for (i, j), value in np.ndenumerate(matrix):
            ax.text(j, i, f"{value:.3f}", ha="center", va="center", fontsize="x-small", color="w")
        ax.set_title(f"{self.report.n_folds}-fold CV accuracy")

    def sidecar(self) -> pl.DataFrame:
        return pl.DataFrame({
            "C": [c.C for c in self.report.grid],
            "gamma": [c.gamma for c in self.report.grid],
            "mean_accuracy": [c.mean_accuracy for c in self.report.grid],
        })
