"""``irs-secrecy`` command line: run, sweep, verify and quantile subcommands."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .bench import CSV_COLUMNS, Record, emit_csv, run_scenario, run_sweep
from .config import SWEEP_AXES, ConfigError, RunConfig, load_config
from .outage import quantiles
from .sdp import SolverFailure

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_ACCEPTANCE = 3

log = logging.getLogger("irs_secrecy")


def _sweep_arg(text: str) -> tuple[str, tuple[float, ...]]:
    axis, sep, values = text.partition("=")
    if not sep or axis not in SWEEP_AXES:
        raise argparse.ArgumentTypeError(f"expected <axis>=<v1,v2,...> with axis in {SWEEP_AXES}")
    try:
        return axis, tuple(float(v) for v in values.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad sweep value: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="first seed")
    common.add_argument("--seeds", type=int, help="number of consecutive seeds")
    common.add_argument("--out", help="CSV output path (stdout if omitted)")
    common.add_argument("--scheme", help="scheme tag or comma-separated list")
    common.add_argument("--sweep", type=_sweep_arg, help="<axis>=<v1,v2,...>")
    common.add_argument("--quantile-method", choices=("analytic", "mc"))
    common.add_argument("--grid-step", type=float, help="grid resolution in metres")
    common.add_argument("--workers", type=int, help="worker processes for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="irs-secrecy", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="single scenario, one row per scheme")
    sub.add_parser("sweep", parents=[common], help="seeded sweep written as CSV")
    verify = sub.add_parser("verify", parents=[common], help="acceptance suite")
    verify.add_argument("--only", help="comma-separated criterion numbers")
    sub.add_parser("quantile", parents=[common], help="print the alpha_E / alpha_B table")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.seeds is not None:
        overrides["n_seeds"] = args.seeds
    if args.out is not None:
        overrides["out"] = args.out
    if args.scheme is not None:
        overrides["schemes"] = tuple(s.strip() for s in args.scheme.split(",") if s.strip())
    if args.sweep is not None:
        overrides["sweep_axis"], overrides["sweep_values"] = args.sweep
    if args.quantile_method is not None:
        overrides["quantile_method"] = args.quantile_method
    if args.grid_step is not None:
        overrides["grid_step"] = args.grid_step
    if args.workers is not None:
        overrides["workers"] = args.workers
    try:
        return replace(cfg, **overrides)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"command line: {exc}") from exc


def _write(records: list[Record], out: str | None) -> None:
    if out:
        emit_csv(records, out)
        log.info("wrote %d rows to %s", len(records), out)
    else:
        print(",".join(CSV_COLUMNS))
        for r in records:
            print(",".join(r.row()))


def _cmd_run(cfg: RunConfig) -> int:
    records = []
    for scheme in cfg.schemes:
        res = run_scenario(cfg, scheme, cfg.seed)
        records.append(
            Record(
                float("nan"), scheme, cfg.seed, float(res.rate), float(res.omega_i.x), float(res.omega_i.y),
                float(res.eve_loc.x), float(res.eve_loc.y), float(res.empirical_outage.p_hat),
                len(res.stage2.trace) - 1, res.wall_s * 1e3 if cfg.record_timing else 0.0,
            )
        )
    _write(records, cfg.out)
    return EXIT_OK


def _cmd_sweep(cfg: RunConfig) -> int:
    table = run_sweep(cfg)
    _write(table.records, cfg.out)
    for (value, scheme), (mean, se, n) in sorted(table.summary.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        print(f"{scheme:>16s} {value:>8g}: mean {mean:.4f} bits  se {se:.4f}  n={n}", file=sys.stderr)
    failed = [r for r in table.records if r.error]
    if failed:
        log.error("%d of %d cells failed", len(failed), len(table.records))
        return EXIT_SOLVER if any(r.error.startswith("SolverFailure") for r in failed) else EXIT_CONFIG
    return EXIT_OK


def _cmd_quantile(cfg: RunConfig) -> int:
    cells = [cfg.at_sweep_value(v) for v in cfg.sweep_values] if cfg.sweep_axis != "none" else [cfg]
    header = f"{'value':>10s} {'alpha_E':>12s} {'alpha_B':>12s}  method"
    print(header)
    for v, c in zip(cfg.sweep_values or [float("nan")], cells):
        q = quantiles(c.system_params(), method=c.quantile_method_name, seed=c.seed)
        print(f"{v:>10g} {q.alpha_e:>12.6g} {q.alpha_b:>12.6g}  {q.method}")
    return EXIT_OK


def _cmd_verify(only: str | None) -> int:
    from .verify import CRITERIA, run_criteria

    try:
        numbers = [int(x) for x in only.split(",")] if only else None
    except ValueError as exc:
        raise ConfigError(f"--only: {exc}") from exc
    if numbers and any(k not in CRITERIA for k in numbers):
        raise ConfigError(f"--only: criteria are numbered 1..{len(CRITERIA)}")
    results = run_criteria(numbers)
    for r in results:
        print(r.line(), flush=True)
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which would read as a solver failure
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        print("# resolved configuration", file=sys.stderr)
        print(cfg.dump(), file=sys.stderr, end="")
        if args.command == "run":
            return _cmd_run(cfg)
        if args.command == "sweep":
            return _cmd_sweep(cfg)
        if args.command == "quantile":
            return _cmd_quantile(cfg)
        return _cmd_verify(args.only)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
