"""Active-learning history file: one JSON record per iteration."""

from __future__ import annotations

import json
from pathlib import Path

HISTORY_NAME = "active_history.json"


def history_record(report) -> dict:
    """Flatten an EvaluationReport into the history schema."""
    c, gamma = report.best_params if report.best_params else (None, None)
    return {
        "iteration": report.iteration,
        "n_labeled": report.n_labeled_trajectories,
        "cv_accuracy": report.cv_accuracy,
        "oof_accuracy": report.test_accuracy,
        "best_C": c,
        "best_gamma": gamma,
        "n_support": report.n_support,
    }


def load_history(path: Path) -> list[dict]:
    """Records in iteration order; a missing or unreadable file is an empty history."""
    path = Path(path)
    if not path.exists():
        return []
    try:
        data = json.loads(path.read_text())
        if isinstance(data, list):
            return [r for r in data if isinstance(r, dict)]
    except (json.JSONDecodeError, OSError):
        pass
    return []


def write_history(path: Path, reports) -> Path:
    """Replace the file with the records of ``reports``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps([history_record(r) for r in reports], indent=2) + "\n")
    return path
