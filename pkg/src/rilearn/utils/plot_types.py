"""Plot registry: maps `--what` names to plot classes."""

from __future__ import annotations

from typing import TYPE_CHECKING

from rilearn.errors import ConfigError

if TYPE_CHECKING:
    from rilearn.plots.base import BasePlot


class PlotRegistry:
    """Maps plot kinds to plot classes."""

    def __init__(self) -> None:
        self._plots: dict[str, type[BasePlot]] = {}

    def register(self, plot_cls: type[BasePlot]) -> type[BasePlot]:
        """Register a plot class under its kind."""
        self._plots[plot_cls.kind()] = plot_cls
        return plot_cls

    def kinds(self) -> list[str]:
        return sorted(self._plots)

    def get_plot(self, kind: str) -> type[BasePlot]:
        try:
            return self._plots[kind]
        except KeyError:
            raise ConfigError(f"unknown plot {kind!r}; choose from {', '.join(self.kinds())}") from None


# Singleton registry
registry = PlotRegistry()
