"""Seeded batch execution and CSV emission for figure reproduction."""
from __future__ import annotations

import csv
import logging
import math
import time
from collections import defaultdict
from collections.abc import Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .pipeline import ScenarioResult, run_benchmark, two_stage_suspicious_area

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "sweep_value",
    "scheme",
    "seed",
    "rate_bits",
    "omega_i_x",
    "omega_i_y",
    "eve_x",
    "eve_y",
    "outage_hat",
    "iters",
    "wall_ms",
)


@dataclass(frozen=True)
class Record:
    sweep_value: float
    scheme: str
    seed: int
    rate_bits: float
    omega_i_x: float
    omega_i_y: float
    eve_x: float
    eve_y: float
    outage_hat: float
    iters: int
    wall_ms: float
    error: str = ""

    def row(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]


def _fmt(v: object) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else "nan"
    return str(v)


@dataclass(frozen=True)
class Cell:
    sweep_value: float
    scheme: str
    seed: int
    config: RunConfig


@dataclass
class SweepTable:
    records: list[Record]
    summary: dict[tuple[float, str], tuple[float, float, int]] = field(default_factory=dict)

    def rates(self, value: float, scheme: str) -> list[float]:
        return [r.rate_bits for r in self.records if r.sweep_value == value and r.scheme == scheme and not r.error]


def run_scenario(cfg: RunConfig, scheme: str, seed: int) -> ScenarioResult:
    params = cfg.system_params()
    kwargs = {
        "quantile_method": cfg.quantile_method_name,
        "grid_step": cfg.grid_step,
        "eve_model_kind": cfg.eve_model,
        "verify_draws": cfg.verify_draws,
    }
    if params.eve_loc is None:
        return two_stage_suspicious_area(params, seed, **kwargs)
    return run_benchmark(params, scheme, seed, **kwargs)


def _run_cell(cell: Cell) -> Record:
    t0 = time.perf_counter()
    try:
        res = run_scenario(cell.config, cell.scheme, cell.seed)
    except Exception as exc:  # noqa: BLE001 - one failed cell must not abort the sweep
        log.error("cell %s/%s/seed %d failed: %s", cell.sweep_value, cell.scheme, cell.seed, exc)
        nan = float("nan")
        return Record(cell.sweep_value, cell.scheme, cell.seed, nan, nan, nan, nan, nan, nan, 0, nan, repr(exc))
    wall = (time.perf_counter() - t0) * 1e3 if cell.config.record_timing else 0.0
    return Record(
        sweep_value=cell.sweep_value,
        scheme=cell.scheme,
        seed=cell.seed,
        rate_bits=float(res.rate),
        omega_i_x=float(res.omega_i.x),
        omega_i_y=float(res.omega_i.y),
        eve_x=float(res.eve_loc.x),
        eve_y=float(res.eve_loc.y),
        outage_hat=float(res.empirical_outage.p_hat),
        iters=len(res.stage2.trace) - 1,
        wall_ms=float(wall),
    )


def sweep_cells(cfg: RunConfig) -> list[Cell]:
    values = list(cfg.sweep_values) if cfg.sweep_axis != "none" else [float("nan")]
    seeds = range(cfg.seed, cfg.seed + cfg.n_seeds)
    return [
        Cell(v, scheme, s, cfg.at_sweep_value(v) if cfg.sweep_axis != "none" else cfg)
        for v in values
        for scheme in cfg.schemes
        for s in seeds
    ]


def summarize(records: Iterable[Record]) -> dict[tuple[float, str], tuple[float, float, int]]:
    """Mean rate, standard error and count per (sweep value, scheme)."""
    groups: dict[tuple[float, str], list[float]] = defaultdict(list)
    for r in records:
        if not r.error:
            groups[(r.sweep_value, r.scheme)].append(r.rate_bits)
    out = {}
    for key, xs in groups.items():
        a = np.asarray(xs)
        se = float(a.std(ddof=1) / np.sqrt(len(a))) if len(a) > 1 else float("nan")
        out[key] = (float(a.mean()), se, len(a))
    return out


def run_sweep(cfg: RunConfig) -> SweepTable:
    """Run every (sweep value, scheme, seed) cell; rows keep cell order whatever
    the completion order of the workers."""
    cells = sweep_cells(cfg)
    if cfg.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_cell, cells))
    else:
        records = [_run_cell(c) for c in cells]
    return SweepTable(records, summarize(records))


def emit_csv(records: Iterable[Record], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(r.row())
    return path


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
