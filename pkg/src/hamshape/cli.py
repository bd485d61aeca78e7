"""Command line interface: ``hamshape run|trace|check``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from .config import ConfigError, load_config
from .export import read_coefficients

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
OUTPUT_ROOT_ENV = "HAMSHAPE_OUTPUT_ROOT"

log = logging.getLogger("hamshape")


def resolve_config_path(name: str) -> Path:
    """A file path, or the name of a bundled config (``testcase1.toml``)."""
    p = Path(name)
    if p.exists():
        return p
    bundled = resources.files("hamshape") / "configs" / p.name
    if bundled.is_file():
        return Path(str(bundled))
    return p


def output_dir(config, override: str | None = None) -> Path:
    """Output directory of a run: explicit override, else ``$HAMSHAPE_OUTPUT_ROOT/<name>``,
    else the directory from the config."""
    if override:
        return Path(override)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root:
        return Path(root) / config.name
    return Path(config.output.directory)


def _run_one(path: str, out: str | None, figures: bool | None) -> tuple[str, int, str]:
    from .runner import run_config

    try:
        cfg = load_config(resolve_config_path(path))
        outcome = run_config(cfg, output_dir(cfg, out), figures=figures)
    except ConfigError as exc:
        return path, EXIT_CONFIG, f"config error: {exc}"
    if outcome.failed:
        return path, EXIT_NUMERICAL, f"numerical failure: {outcome.message}"
    lines = [f"{cfg.name}: artifacts in {output_dir(cfg, out)}"]
    from .objectives import ShapeProblem

    problem = ShapeProblem.from_config(cfg)
    for tag, res in (("GD", outcome.gd), ("HF", outcome.hf)):
        if res is not None:
            v = problem.evaluate(res.q).value
            lines.append(
                f"  {tag}: {res.reason} after {res.n_iter} steps, J1={v.j1:.4f} J2={v.j2:.4f} "
                f"J3={v.j3:.4f} J_lambda={v.j_lambda:.4f}"
            )
    return path, EXIT_OK, "\n".join(lines)


def cmd_run(args) -> int:
    figures = False if args.no_figures else None
    if len(args.configs) > 1 and args.output:
        print("--output cannot be combined with several configs", file=sys.stderr)
        return EXIT_CONFIG
    if len(args.configs) == 1 or args.jobs == 1:
        results = [_run_one(c, args.output, figures) for c in args.configs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, args.configs, [None] * len(args.configs), [figures] * len(args.configs)))
    status = EXIT_OK
    for path, code, msg in results:
        print(msg, file=sys.stderr if code else sys.stdout)
        status = max(status, code)
    return status


def cmd_trace(args) -> int:
    from .runner import NUMERICAL_ERRORS, trace_config

    try:
        cfg = load_config(resolve_config_path(args.config))
        start = read_coefficients(args.start)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = output_dir(cfg, args.output)
    try:
        front = trace_config(cfg, start, out, figures=False if args.no_figures else None)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    n_ok = sum(p.converged for p in front)
    print(f"{cfg.name}: {len(front)} weights, {n_ok} converged; front in {out}")
    return EXIT_OK


def cmd_check(args) -> int:
    from .runner import check_config

    try:
        cfg = load_config(resolve_config_path(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    results = check_config(cfg)
    for name, ok, msg in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {msg}")
    if all(ok for _, ok, _ in results):
        return EXIT_OK
    return EXIT_CONFIG if not results[0][1] else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hamshape", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the optimizers of one or more configs")
    p.add_argument("configs", nargs="+", help="config file(s) or bundled names (testcase1.toml)")
    p.add_argument("-o", "--output", help="output directory (single config only)")
    p.add_argument("-j", "--jobs", type=int, default=os.cpu_count() or 1, help="parallel runs for a batch")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trace", help="trace a local (J1, J2) front from a coefficient file")
    p.add_argument("config")
    p.add_argument("--start", required=True, help="coefficient JSON written by `run`")
    p.add_argument("-o", "--output")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("check", help="check the invariants of a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
