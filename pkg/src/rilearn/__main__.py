"""Entry point for `python -m rilearn`."""

import argparse
import sys
from pathlib import Path

PLOT_KINDS = ("islands", "boundary", "heatmap", "ld-field", "manifold-projection")


def _grid(text: str) -> tuple[int, int]:
    try:
        nx, npx = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NX,NPX, got {text!r}") from None
    return nx, npx


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected on or off, got {text!r}")
    return text == "on"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML config file (overrides the user config)")
    common.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    common.add_argument("--out-dir", dest="output_dir", help="default directory for outputs")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_const", const=1, dest="verbosity", default=0)
    verbosity.add_argument("-q", "--quiet", action="store_const", const=-1, dest="verbosity")

    section = argparse.ArgumentParser(add_help=False)
    section.add_argument("--energy", type=float, help="total energy E")
    section.add_argument("--section", dest="y_c", type=float, help="section height y = y_c")
    section.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(
        prog="rilearn",
        description="Reactive islands of the Hénon-Heiles system and support vector classifiers that learn them",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    orbit_p = sub.add_parser("orbit", parents=[common, section], help="Lyapunov orbit at an energy")
    orbit_p.add_argument("--saddle", choices=("top", "left", "right"))
    orbit_p.add_argument("--out", type=Path)

    island_p = sub.add_parser("island", parents=[common, section], help="reactive island on a section")
    island_p.add_argument("--saddle", choices=("top", "left", "right"))
    island_p.add_argument("--seeds", dest="n_seeds", type=int, help="fibers along the orbit")
    island_p.add_argument("--out", type=Path)
    island_p.add_argument("--fibers-out", type=Path, help="also write the manifold fibers")

    dataset_p = sub.add_parser("dataset", parents=[common, section], help="labeled grid of initial conditions")
    dataset_p.add_argument("--grid", type=_grid, metavar="NX,NPX")
    dataset_p.add_argument("--horizon", type=float)
    dataset_p.add_argument("--ld", type=_on_off, metavar="{on,off}")
    dataset_p.add_argument("--out", type=Path)

    train_p = sub.add_parser("train", parents=[common, section], help="fit a classifier pipeline")
    train_p.add_argument("--mode", choices=("fixed", "active", "ld"), default="fixed")
    train_p.add_argument("--dataset", type=Path, help="dataset file (default: build one from the config)")
    train_p.add_argument("--grid", type=_grid, metavar="NX,NPX")
    train_p.add_argument("--horizon", type=float)
    train_p.add_argument("--islands", type=Path, nargs="+", help="island files for boundary agreement")
    train_p.add_argument("--scale", type=_on_off, metavar="{on,off}")
    train_p.add_argument("--model-out", type=Path)
    train_p.add_argument("--report-out", type=Path)
    train_p.add_argument("--history-out", type=Path)

    plot_p = sub.add_parser("plot", parents=[common], help="SVG figure plus CSV sidecar")
    plot_p.add_argument("--what", choices=PLOT_KINDS, required=True)
    plot_p.add_argument("--in", dest="inputs", type=Path, nargs="+", required=True)
    plot_p.add_argument("--out", type=Path)

    sub.add_parser("info", help="show version and config directory")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("energy", "y_c", "seed", "saddle", "n_seeds", "horizon", "ld", "scale", "threads", "output_dir")
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    if getattr(args, "grid", None) is not None:
        overrides["nx"], overrides["npx"] = args.grid
    return overrides


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "info":
        from rilearn import __version__
        from rilearn.utils.config import run_paths
        paths = run_paths()
        print(f"rilearn {__version__}")
        print(f"config: {paths.config_dir}")
        print(f"output: {paths.output_dir}")
        return 0

    from rich.markup import escape

    from rilearn.errors import RilearnError
    from rilearn.utils.log import configure_logging, console

    configure_logging(args.verbosity)
    try:
        from rilearn import app
        from rilearn.utils.config import load_config

        cfg = load_config(args.config, _overrides(args))
        if args.command == "orbit":
            app.cmd_orbit(cfg, args.out)
        elif args.command == "island":
            app.cmd_island(cfg, args.out, args.fibers_out)
        elif args.command == "dataset":
            app.cmd_dataset(cfg, args.out)
        elif args.command == "train":
            app.cmd_train(cfg, args.mode, args.dataset, args.islands, args.model_out, args.report_out,
                          args.history_out)
        elif args.command == "plot":
            app.cmd_plot(cfg, args.what, args.inputs, args.out)
    except RilearnError as exc:
        console.print(f"[bold red]error:[/] {type(exc).__name__}: {escape(str(exc))}",
                      highlight=False, soft_wrap=True)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
