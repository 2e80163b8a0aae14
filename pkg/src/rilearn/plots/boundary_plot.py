"""Learned decision boundary over the true islands."""

from __future__ import annotations

import logging

import polars as pl
from matplotlib.axes import Axes

from rilearn.dynamics.manifolds import energy_boundary_on_section
from rilearn.learning.boundary import extract_decision_boundary
from rilearn.learning.pipelines import LdFeatureModel, load_predictor
from rilearn.plots.base import SUPPORT_VECTOR_COLOR, curve_frame, label_section_axes
from rilearn.plots.islands_plot import IslandsPlot

logger = logging.getLogger(__name__)


class BoundaryPlot(IslandsPlot):
    """Islands solid, learned boundary dashed black, support vectors as cyan dots."""

    @staticmethod
    def kind() -> str:
        return "boundary"

    def load(self) -> None:
        models = self.inputs_with_suffix(".yaml", ".yml")
        self.require(len(models) == 1, "expected exactly one model file")
        params = self.config.system_params()
        self.predictor, section = load_predictor(models[0], params, self.config.integration(),
                                                 self.config.resolved_threads)
        self.islands = self.island_inputs()
        if section is None:
            section = self.islands[0].section if self.islands else self.config.section()
        self.section = section
        self.boundary = energy_boundary_on_section(params, section)
        self.decision = extract_decision_boundary(self.predictor, params, section, self.config.eval_resolution)
        if self.decision.is_empty:
            logger.warning("the model predicts a single class on this section; no boundary to draw")
        svc = self.predictor.model if isinstance(self.predictor, LdFeatureModel) else self.predictor
        self.support = svc.support_points[:, :2]

    def draw(self, ax: Axes) -> None:
        self.draw_islands(ax)
        for k, (_, line) in enumerate(self.decision.all_polylines()):
            ax.plot(line[:, 0], line[:, 1], "k--", lw=1.0, label="learned boundary" if k == 0 else None)
        ax.plot(self.support[:, 0], self.support[:, 1], ".", color=SUPPORT_VECTOR_COLOR, ms=3,
                label="support vectors")
        label_section_axes(ax, self.section.energy, self.section.y_c)
        ax.legend(loc="upper right", fontsize="small")

    def sidecar(self) -> pl.DataFrame:
        frames = [super().sidecar(), curve_frame("support_vectors", self.support)]
        frames += [
            curve_frame(f"boundary_{a}_{b}_{k}", line)
            for k, ((a, b), line) in enumerate(self.decision.all_polylines())
        ]
        return pl.concat(frames)
