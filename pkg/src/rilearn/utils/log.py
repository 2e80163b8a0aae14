"""Logging setup for the command line."""

from __future__ import annotations

import logging

from rich.console import Console
from rich.logging import RichHandler

# Diagnostics go to stderr; stdout carries tables.
console = Console(stderr=True)


def configure_logging(verbosity: int = 0) -> None:
    """Install a rich handler on the ``rilearn`` logger.

    verbosity: -1 quiet (WARNING), 0 normal (INFO), 1+ verbose (DEBUG).
    """
    level = logging.WARNING if verbosity < 0 else logging.INFO if verbosity == 0 else logging.DEBUG
    logger = logging.getLogger("rilearn")
    logger.handlers.clear()
    handler = RichHandler(console=console, show_path=verbosity > 0, rich_tracebacks=True, markup=False)
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
