"""File formats: CSV with `#` header comments for data, YAML for models and reports.

CSV numbers are written by polars with shortest round-trip formatting, so a
reload reproduces every float bit for bit. Each file echoes the resolved run
configuration in its header for provenance.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Any

import numpy as np
import polars as pl
import yaml

from rilearn import __version__
from rilearn.errors import FormatError

MODEL_FORMAT = "rilearn-svc/1"


# --- CSV with header comments ---

def _header_value(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_header_value(v) for v in value) + "]"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def header_lines(header: dict[str, Any], config=None) -> list[str]:
    lines = [f"# rilearn {__version__}"]
    lines += [f"# {key} = {_header_value(value)}" for key, value in header.items()]
    if config is not None:
        for section, body in config.sectioned().items():
            lines += [f"# config.{section}.{key} = {_header_value(value)}" for key, value in body.items()]
    return lines


def write_csv(path: Path, frame: pl.DataFrame, header: dict[str, Any], config=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    frame.write_csv(buffer)
    path.write_text("\n".join(header_lines(header, config)) + "\n" + buffer.getvalue())
    return path


def read_csv(path: Path) -> tuple[pl.DataFrame, dict[str, str]]:
    """Frame plus the ``# key = value`` header entries (values as text)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    header: dict[str, str] = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        key, sep, value = line[1:].partition("=")
        if sep:
            header[key.strip()] = value.strip()
    try:
        frame = pl.read_csv(io.StringIO(text), comment_prefix="#")
    except (pl.exceptions.ComputeError, pl.exceptions.NoDataError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return frame, header


def _header_float(header: dict[str, str], key: str, path: Path) -> float:
    try:
        return float(header[key])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: missing or bad header entry {key!r}") from exc


def _require_columns(frame: pl.DataFrame, columns: tuple[str, ...], path: Path) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise FormatError(f"{path}: missing columns {missing}")


# --- islands, fibers, orbits ---

def write_island(path: Path, island, config=None) -> Path:
    frame = pl.DataFrame({"x": island.curve[:, 0], "p_x": island.curve[:, 1]})
    header = {"energy": island.section.energy, "y_c": island.section.y_c,
              "channel": int(island.channel), "order": island.order}
    return write_csv(path, frame, header, config)


def read_island(path: Path):
    from rilearn.dynamics.manifolds import ReactiveIsland, SectionConfig
    from rilearn.dynamics.system import EscapeChannel

    path = Path(path)
    frame, header = read_csv(path)
    _require_columns(frame, ("x", "p_x"), path)
    section = SectionConfig(energy=_header_float(header, "energy", path), y_c=_header_float(header, "y_c", path))
    try:
        channel = EscapeChannel(int(header["channel"]))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: missing or bad channel") from exc
    curve = frame.select("x", "p_x").to_numpy().astype(float)
    return ReactiveIsland(channel, section, curve, int(header.get("order", 1)))


def write_fibers(path: Path, branch, config=None) -> Path:
    parts = [
        pl.DataFrame({
            "fiber": np.full(len(f.times), k, dtype=np.int64),
            "t": f.times,
            "x": f.states[:, 0], "y": f.states[:, 1], "p_x": f.states[:, 2], "p_y": f.states[:, 3],
        })
        for k, f in enumerate(branch.fibers)
    ]
    header = {"energy": branch.energy, "saddle": branch.orbit.saddle_id.value,
              "stability": branch.stability.value, "side": branch.side.name.lower()}
    return write_csv(path, pl.concat(parts), header, config)


def write_orbit(path: Path, orbit, trajectory, config=None) -> Path:
    frame = pl.DataFrame({
        "t": trajectory.times,
        "x": trajectory.states[:, 0], "y": trajectory.states[:, 1],
        "p_x": trajectory.states[:, 2], "p_y": trajectory.states[:, 3],
    })
    header = {"energy": orbit.energy, "period": orbit.period, "saddle": orbit.saddle_id.value,
              "x0": orbit.initial_state.x, "y0": orbit.initial_state.y}
    return write_csv(path, frame, header, config)


# --- datasets ---

def write_dataset(path: Path, dataset, config=None) -> Path:
    header = {"energy": dataset.section.energy, "y_c": dataset.section.y_c,
              "horizon": dataset.horizon, "seed": dataset.seed, **dataset.meta}
    return write_csv(path, dataset.to_frame(), header, config)


def read_dataset(path: Path, params):
    from rilearn.dynamics.manifolds import SectionConfig
    from rilearn.learning.datasets import LabeledDataset

    path = Path(path)
    frame, header = read_csv(path)
    _require_columns(frame, ("x", "p_x", "label", "escape_time"), path)
    frame = frame.with_columns(pl.col("escape_time").cast(pl.Float64), pl.col("label").cast(pl.Int64))
    section = SectionConfig(energy=_header_float(header, "energy", path), y_c=_header_float(header, "y_c", path))
    dataset = LabeledDataset.from_frame(
        params, frame, section, _header_float(header, "horizon", path), int(header.get("seed", 0))
    )
    for key in ("tau", "ld_exponent"):
        if key in header:
            dataset.meta[key] = float(header[key])
    return dataset


# --- models and reports ---

def _binary_to_dict(pair: tuple[int, int], machine) -> dict[str, Any]:
    return {
        "classes": list(pair),
        "bias": float(machine.bias),
        "converged": bool(machine.converged),
        "n_iter": int(machine.n_iter),
        "support_points": machine.support_points.tolist(),
        "dual_coefs": machine.dual_coefs.tolist(),
    }


def model_to_dict(model, section=None, extra: dict[str, Any] | None = None, config=None) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "format": MODEL_FORMAT,
        "classes": list(model.classes),
        "n_features": int(model.n_features),
        "kernel": {"type": "rbf", "C": float(model.kernel.C), "gamma": float(model.kernel.gamma)},
        "scaler": None if model.feature_scaler is None else {
            "mean": model.feature_scaler.mean.tolist(),
            "scale": model.feature_scaler.scale.tolist(),
        },
        "pairwise": [_binary_to_dict(pair, m) for pair, m in model.pairwise.items()],
    }
    if section is not None:
        doc["section"] = {"energy": float(section.energy), "y_c": float(section.y_c)}
    if extra:
        doc.update(extra)
    if config is not None:
        doc["config"] = config.sectioned()
    return doc


def model_from_dict(doc: dict[str, Any]):
    from rilearn.learning.svc import BinarySvm, FeatureScaler, RbfKernelParams, SvcModel

    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"not a {MODEL_FORMAT} document")
    try:
        kernel = RbfKernelParams(gamma=float(doc["kernel"]["gamma"]), C=float(doc["kernel"]["C"]))
        n_features = int(doc["n_features"])
        pairwise = {}
        for entry in doc["pairwise"]:
            points = np.asarray(entry["support_points"], dtype=float).reshape(-1, n_features)
            pairwise[tuple(int(c) for c in entry["classes"])] = BinarySvm(
                support_points=points,
                dual_coefs=np.asarray(entry["dual_coefs"], dtype=float),
                bias=float(entry["bias"]),
                kernel=kernel,
                converged=bool(entry.get("converged", True)),
                n_iter=int(entry.get("n_iter", 0)),
            )
        scaler = doc.get("scaler")
        return SvcModel(
            classes=tuple(int(c) for c in doc["classes"]),
            pairwise=pairwise,
            kernel=kernel,
            n_features=n_features,
            feature_scaler=None if scaler is None else FeatureScaler(
                np.asarray(scaler["mean"], dtype=float), np.asarray(scaler["scale"], dtype=float)
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model document: {exc}") from exc


def write_yaml(path: Path, doc: dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(doc, sort_keys=False, default_flow_style=None))
    return path


def read_yaml(path: Path) -> dict[str, Any]:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a mapping at the top level")
    return doc


def read_model(path: Path):
    """SvcModel and the full document (section, LD settings, config)."""
    doc = read_yaml(path)
    return model_from_dict(doc), doc


def cv_report_to_dict(report) -> dict[str, Any]:
    return {
        "n_folds": int(report.n_folds),
        "best": {"C": float(report.best[0]), "gamma": float(report.best[1])},
        "grid": [
            {"C": float(c.C), "gamma": float(c.gamma), "mean_accuracy": float(c.mean_accuracy),
             "fold_accuracies": [float(a) for a in c.fold_accuracies]}
            for c in report.grid
        ],
    }


def cv_report_from_dict(doc: dict[str, Any]):
    from rilearn.learning.svc import CvCell, CvReport

    try:
        cells = tuple(
            CvCell(float(c["C"]), float(c["gamma"]), float(c["mean_accuracy"]),
                   tuple(float(a) for a in c["fold_accuracies"]))
            for c in doc["grid"]
        )
        return CvReport(cells, (float(doc["best"]["C"]), float(doc["best"]["gamma"])), int(doc["n_folds"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed CV report: {exc}") from exc
