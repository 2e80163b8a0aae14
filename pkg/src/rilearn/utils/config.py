"""Run configuration: directory resolution, TOML config files and the flat RunConfig record."""

from __future__ import annotations

import math
import os
import tomllib
from collections.abc import Mapping
from dataclasses import asdict, dataclass, fields, replace
from functools import lru_cache
from pathlib import Path
from typing import Any

from rilearn.errors import ConfigError


@dataclass(frozen=True)
class RunPaths:
    """Where the user config lives and where outputs go when no path is given."""

    config_dir: Path
    output_dir: Path

    @property
    def user_config(self) -> Path:
        return self.config_dir / "config.toml"

    @classmethod
    def from_environ(cls, environ: Mapping[str, str]) -> RunPaths:
        """$RILEARN_CONFIG_DIR, else $XDG_CONFIG_HOME/rilearn, else ~/.config/rilearn;
        $RILEARN_OUTPUT_DIR, else ./rilearn-out."""
        config = environ.get("RILEARN_CONFIG_DIR")
        if not config:
            config = Path(environ.get("XDG_CONFIG_HOME") or Path.home() / ".config") / "rilearn"
        return cls(Path(config), Path(environ.get("RILEARN_OUTPUT_DIR") or "rilearn-out"))


@lru_cache(maxsize=1)
def run_paths() -> RunPaths:
    return RunPaths.from_environ(os.environ)


@dataclass(frozen=True)
class RunConfig:
    # [system]
    m_x: float = 1.0
    m_y: float = 1.0
    omega_x: float = 1.0
    omega_y: float = 1.0
    delta: float = 1.0
    # [section]
    energy: float = 0.17
    y_c: float = 0.0
    # [integration]
    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    max_step: float = math.inf
    # [orbit]
    saddle: str = "top"
    amplitude: float = 1e-4
    correction_tol: float = 1e-10
    step_growth: float = 2.0
    continuation_max_step: float = 0.05
    # [manifold]
    n_seeds: int = 400
    t_span: float = 20.0
    # [dataset]
    nx: int = 100
    npx: int = 100
    horizon: float = 30.0
    ld: bool = False
    tau: float = 30.0
    ld_exponent: float = 0.5
    # [svc]
    c_grid: tuple[float, ...] = (1e2, 1e3, 1e4, 1e5)
    gamma_grid: tuple[float, ...] = (10.0, 1e2, 1e3, 1e4)
    n_folds: int = 5
    svm_tol: float = 1e-3
    max_iter: int = 100_000
    scale: bool | None = None
    # [active]
    al_nx: int = 30
    al_npx: int = 30
    al_c_grid: tuple[float, ...] = (10.0, 1e2, 1e3)
    al_gamma_grid: tuple[float, ...] = (1.0, 10.0, 1e2)
    n_sv_per_iter: int = 10
    pts_per_sv: int = 1
    proposal_sigma: float = 1.0
    target_accuracy: float = 0.99
    max_iters: int = 30
    # [evaluation]
    eval_resolution: int = 200
    n_holdout: int = 500
    # [run]
    seed: int = 0
    threads: int | None = None
    output_dir: str | None = None

    def __post_init__(self) -> None:
        if self.saddle not in ("top", "left", "right"):
            raise ConfigError(f"saddle must be top, left or right, got {self.saddle!r}")
        for name in ("n_seeds", "nx", "npx", "n_folds", "al_nx", "al_npx", "n_sv_per_iter", "pts_per_sv",
                     "max_iters", "eval_resolution", "max_iter"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.target_accuracy <= 1:
            raise ConfigError(f"target_accuracy must lie in (0, 1], got {self.target_accuracy}")
        if not 0 < self.ld_exponent <= 1:
            raise ConfigError(f"ld_exponent must lie in (0, 1], got {self.ld_exponent}")

    def with_(self, **changes) -> RunConfig:
        return replace(self, **changes)

    @property
    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir) if self.output_dir else run_paths().output_dir

    @property
    def resolved_threads(self) -> int:
        from rilearn.utils.workers import default_threads
        return self.threads if self.threads else default_threads()

    def sectioned(self) -> dict[str, dict[str, Any]]:
        """The config as TOML-style sections, for echoing into outputs."""
        flat = asdict(self)
        out: dict[str, dict[str, Any]] = {}
        for section, names in SECTIONS.items():
            out[section] = {
                name: list(flat[name]) if isinstance(flat[name], tuple) else flat[name]
                for name in names
            }
        return out

    # --- builders for the library settings types ---

    def system_params(self):
        from rilearn.dynamics.system import SystemParams
        return SystemParams(self.m_x, self.m_y, self.omega_x, self.omega_y, self.delta)

    def section(self):
        from rilearn.dynamics.manifolds import SectionConfig
        return SectionConfig(energy=self.energy, y_c=self.y_c)

    def integration(self):
        from rilearn.dynamics.integrator import IntegrationSettings
        return IntegrationSettings(rel_tol=self.rel_tol, abs_tol=self.abs_tol, max_step=self.max_step)

    def orbit_settings(self):
        from rilearn.dynamics.periodic_orbits import OrbitSettings
        return OrbitSettings(
            correction_tol=self.correction_tol,
            amplitude=self.amplitude,
            step_growth=self.step_growth,
            max_step=self.continuation_max_step,
            integration=self.integration(),
        )

    def saddle_id(self):
        from rilearn.dynamics.system import SaddleId
        return SaddleId(self.saddle)

    def active_config(self):
        from rilearn.learning.pipelines import ActiveLearnConfig
        return ActiveLearnConfig(
            initial_grid=(self.al_nx, self.al_npx),
            n_sv_per_iter=self.n_sv_per_iter,
            pts_per_sv=self.pts_per_sv,
            proposal_sigma=self.proposal_sigma,
            target_accuracy=self.target_accuracy,
            max_iters=self.max_iters,
            seed=self.seed,
        )


SECTIONS: dict[str, tuple[str, ...]] = {
    "system": ("m_x", "m_y", "omega_x", "omega_y", "delta"),
    "section": ("energy", "y_c"),
    "integration": ("rel_tol", "abs_tol", "max_step"),
    "orbit": ("saddle", "amplitude", "correction_tol", "step_growth", "continuation_max_step"),
    "manifold": ("n_seeds", "t_span"),
    "dataset": ("nx", "npx", "horizon", "ld", "tau", "ld_exponent"),
    "svc": ("c_grid", "gamma_grid", "n_folds", "svm_tol", "max_iter", "scale"),
    "active": ("al_nx", "al_npx", "al_c_grid", "al_gamma_grid", "n_sv_per_iter", "pts_per_sv",
               "proposal_sigma", "target_accuracy", "max_iters"),
    "evaluation": ("eval_resolution", "n_holdout"),
    "run": ("seed", "threads", "output_dir"),
}

_DEFAULTS = RunConfig()
_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _coerce(name: str, value: Any) -> Any:
    default = getattr(_DEFAULTS, name)
    try:
        if isinstance(default, tuple):
            return tuple(float(v) for v in value)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError("expected true or false")
            return value
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if name == "scale":
            return None if value is None else bool(value)
        if name == "threads":
            return None if value is None else int(value)
        return None if value is None else str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {value!r} ({exc})") from exc


def _flatten(document: dict[str, Any], source: str) -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for section, body in document.items():
        if section not in SECTIONS or not isinstance(body, dict):
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, value in body.items():
            if key not in SECTIONS[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            flat[key] = _coerce(key, value)
    return flat


def read_config_file(path: Path) -> dict[str, Any]:
    try:
        document = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return _flatten(document, str(path))


def load_config(path: Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Defaults < the user config file < ``path`` < non-None ``overrides``."""
    values: dict[str, Any] = {}
    user_file = run_paths().user_config
    if user_file.is_file():
        values.update(read_config_file(user_file))
    if path is not None:
        values.update(read_config_file(Path(path)))
    for key, value in (overrides or {}).items():
        if key not in _FIELD_NAMES:
            raise ConfigError(f"unknown setting {key!r}")
        if value is not None:
            values[key] = _coerce(key, value)
    return replace(_DEFAULTS, **values)
