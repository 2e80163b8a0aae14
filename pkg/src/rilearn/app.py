"""Command implementations behind the `rilearn` CLI."""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path

from rich.console import Console
from rich.table import Table

from rilearn.dynamics.integrator import integrate
from rilearn.dynamics.manifolds import (
    Stability,
    extract_reactive_island,
    globalize_manifold,
    well_side,
)
from rilearn.dynamics.periodic_orbits import closure_error, monodromy, orbit_at_energy
from rilearn.errors import ConfigError
from rilearn.learning.datasets import build_dataset
from rilearn.learning.pipelines import (
    active_learning_loop,
    evaluate_against_islands,
    train_fixed,
    train_with_ld,
)
from rilearn.plots.boundary_plot import BoundaryPlot
from rilearn.plots.heatmap_plot import HeatmapPlot
from rilearn.plots.islands_plot import IslandsPlot
from rilearn.plots.ld_field_plot import LdFieldPlot
from rilearn.plots.manifold_plot import ManifoldPlot
from rilearn.utils.config import RunConfig
from rilearn.utils.history import HISTORY_NAME, write_history
from rilearn.utils.plot_types import registry
from rilearn.utils.serialization import (
    cv_report_to_dict,
    model_to_dict,
    read_dataset,
    read_island,
    write_dataset,
    write_fibers,
    write_island,
    write_orbit,
    write_yaml,
)

logger = logging.getLogger(__name__)

# Tables go to stdout; logs go to stderr.
stdout = Console()

# Register plots
registry.register(IslandsPlot)
registry.register(BoundaryPlot)
registry.register(HeatmapPlot)
registry.register(LdFieldPlot)
registry.register(ManifoldPlot)

MODES = ("fixed", "active", "ld")


def _summary(title: str, rows: list[tuple[str, object]]) -> Table:
    table = Table(title=title, show_header=False, title_justify="left")
    table.add_column("key", style="bold cyan")
    table.add_column("value")
    for key, value in rows:
        table.add_row(key, value if isinstance(value, str) else repr(value))
    return table


def _default_out(cfg: RunConfig, name: str) -> Path:
    return cfg.resolved_output_dir / name


def cmd_orbit(cfg: RunConfig, out: Path | None = None):
    """Lyapunov orbit at the configured energy; writes one period of it."""
    params = cfg.system_params()
    orbit = orbit_at_energy(params, cfg.saddle_id(), cfg.energy, cfg.orbit_settings())
    analysis = monodromy(params, orbit, cfg.integration())
    closure = closure_error(params, orbit, cfg.integration())
    trajectory = integrate(params, orbit.initial_state, cfg.integration().with_(t_max=orbit.period),
                           dense_output=False)
    out = write_orbit(out or _default_out(cfg, f"orbit_{cfg.saddle}_E{cfg.energy:g}.csv"), orbit, trajectory, cfg)

    stdout.print(_summary(f"{cfg.saddle} Lyapunov orbit", [
        ("energy", orbit.energy),
        ("period", orbit.period),
        ("x0, y0", f"{orbit.initial_state.x:.12g}, {orbit.initial_state.y:.12g}"),
        ("closure error", f"{closure:.3e}"),
        ("multipliers", ", ".join(f"{v:.6g}" for v in analysis.eigenvalues)),
        ("stability index", f"{analysis.stability_index:.6g}"),
        ("written", str(out)),
    ]))
    return orbit, analysis


def cmd_island(cfg: RunConfig, out: Path | None = None, fibers_out: Path | None = None):
    """Reactive island of the configured saddle on the configured section."""
    params, section = cfg.system_params(), cfg.section()
    integration = cfg.integration()
    orbit = orbit_at_energy(params, cfg.saddle_id(), section.energy, cfg.orbit_settings())
    analysis = monodromy(params, orbit, integration)
    side = well_side(params, orbit, analysis, Stability.STABLE)
    branch = globalize_manifold(
        params, analysis, orbit, Stability.STABLE, side, cfg.n_seeds, cfg.t_span,
        integration=integration, threads=cfg.resolved_threads,
    )
    island = extract_reactive_island(branch, section)
    out = write_island(out or _default_out(cfg, f"island_{cfg.saddle}_E{cfg.energy:g}_y{cfg.y_c:g}.csv"),
                       island, cfg)
    if fibers_out is not None:
        write_fibers(fibers_out, branch, cfg)

    stdout.print(_summary(f"{cfg.saddle} reactive island", [
        ("energy", section.energy),
        ("section y", section.y_c),
        ("channel", int(island.channel)),
        ("points", len(island.curve) - 1),
        ("area", f"{island.area:.6g}"),
        ("written", str(out)),
    ]))
    return island


def cmd_dataset(cfg: RunConfig, out: Path | None = None):
    dataset = build_dataset(
        cfg.system_params(), cfg.section(), cfg.nx, cfg.npx, cfg.horizon, cfg.ld, cfg.seed,
        cfg.tau, cfg.ld_exponent, cfg.integration(), cfg.resolved_threads,
    )
    out = write_dataset(out or _default_out(cfg, f"dataset_E{cfg.energy:g}_y{cfg.y_c:g}.csv"), dataset, cfg)

    table = Table(title=f"dataset {cfg.nx}x{cfg.npx} at E={cfg.energy:g}, y={cfg.y_c:g}", title_justify="left")
    table.add_column("label", justify="right")
    table.add_column("count", justify="right")
    for label, count in dataset.class_counts().items():
        table.add_row(str(label), str(count))
    stdout.print(table)
    stdout.print(f"written {out}")
    return dataset


def _evaluation_table(mode: str, evaluation) -> Table:
    rows: list[tuple[str, object]] = [
        ("held-out accuracy", f"{evaluation.test_accuracy:.4f}"),
        ("CV accuracy", "n/a" if evaluation.cv_accuracy is None else f"{evaluation.cv_accuracy:.4f}"),
        ("island agreement",
         "n/a" if evaluation.boundary_agreement is None else f"{evaluation.boundary_agreement:.4f}"),
    ]
    if evaluation.boundary_fit:
        fit = ", ".join(f"{c}: {v:.3f}" for c, v in sorted(evaluation.boundary_fit.items()))
        rows.append(("boundary fit", fit))
    if evaluation.best_params:
        rows.append(("best C, gamma", f"{evaluation.best_params[0]:g}, {evaluation.best_params[1]:g}"))
    rows += [("support vectors", evaluation.n_support), ("labeled trajectories", evaluation.n_labeled_trajectories)]
    return _summary(f"{mode} training", rows)


def cmd_train(
    cfg: RunConfig,
    mode: str = "fixed",
    dataset_path: Path | None = None,
    island_paths: list[Path] | None = None,
    model_out: Path | None = None,
    report_out: Path | None = None,
    history_out: Path | None = None,
):
    """Train one of the three pipelines and write the model and report documents."""
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {mode!r}")
    params, section = cfg.system_params(), cfg.section()
    integration, threads = cfg.integration(), cfg.resolved_threads
    dataset = read_dataset(dataset_path, params) if dataset_path else None
    if dataset is not None:
        section = dataset.section
    islands = [read_island(p) for p in island_paths or ()]
    if any(i.section != section for i in islands):
        raise ConfigError("island files were computed on a different section than the training data")

    common = dict(n_folds=cfg.n_folds, tol=cfg.svm_tol, max_iter=cfg.max_iter,
                  integration=integration, threads=threads)
    evaluation_args = dict(resolution=cfg.eval_resolution, n_holdout=cfg.n_holdout)
    report: dict = {"mode": mode}
    extra: dict = {}
    if mode == "fixed":
        model, cv, evaluation, dataset = train_fixed(
            params, section, cfg.c_grid, cfg.gamma_grid, cfg.seed, cfg.nx, cfg.npx, cfg.horizon,
            scale=bool(cfg.scale), dataset=dataset, islands=islands, **evaluation_args, **common,
        )
        report["cv_report"] = cv_report_to_dict(cv)
        svc = model
    elif mode == "ld":
        model, cv, evaluation, dataset = train_with_ld(
            params, section, cfg.c_grid, cfg.gamma_grid, cfg.seed, cfg.nx, cfg.npx, cfg.horizon,
            cfg.tau, cfg.ld_exponent, scale=cfg.scale is not False, dataset=dataset, islands=islands,
            **evaluation_args, **common,
        )
        report["cv_report"] = cv_report_to_dict(cv)
        svc = model.model
        extra["ld"] = {"tau": model.tau, "ld_exponent": model.p_exponent}
    else:
        if dataset is not None:
            raise ConfigError("active mode labels its own data; drop --dataset")
        svc, history, dataset = active_learning_loop(
            params, section, cfg.active_config(), cfg.al_c_grid, cfg.al_gamma_grid,
            horizon=cfg.horizon, **common,
        )
        history_out = history_out or (model_out.parent if model_out else cfg.resolved_output_dir) / HISTORY_NAME
        write_history(history_out, history)
        evaluation = evaluate_against_islands(
            svc, islands, params, section, seed=cfg.seed, horizon=cfg.horizon, n_labeled=len(dataset),
            integration=integration, threads=threads, **evaluation_args,
        )
        last = history[-1]
        evaluation = replace(evaluation, cv_accuracy=last.cv_accuracy, best_params=last.best_params,
                             n_support=last.n_support, iteration=last.iteration)
        report["history"] = str(history_out)
        model = svc

    if not svc.converged:
        logger.warning("at least one binary problem stopped at the iteration cap")
    report["evaluation"] = evaluation.to_dict()
    report["model_converged"] = svc.converged
    report["class_counts"] = dataset.class_counts()
    report["config"] = cfg.sectioned()

    tag = f"{mode}_E{section.energy:g}_y{section.y_c:g}"
    model_out = write_yaml(model_out or _default_out(cfg, f"model_{tag}.yaml"),
                           model_to_dict(svc, section, extra, cfg))
    report_out = write_yaml(report_out or _default_out(cfg, f"report_{tag}.yaml"), report)

    stdout.print(_evaluation_table(mode, evaluation))
    stdout.print(f"written {model_out} and {report_out}")
    return model, evaluation


def cmd_plot(cfg: RunConfig, what: str, inputs: list[Path], out: Path | None = None):
    plot = registry.get_plot(what)(inputs, cfg)
    svg, sidecar = plot.render(out or _default_out(cfg, f"{what}.svg"))
    stdout.print(f"written {svg} and {sidecar}")
    return svg, sidecar
