"""Run configuration for the benchmark CLI.

Configs are YAML mappings. Every key is optional; omitted keys take the
simulation defaults below. Powers are given in dBm here and converted to watts
once, when :meth:`RunConfig.system_params` builds the library-facing object.

Example::

    n_irs: 8
    power_dbm: 25
    eve: [95, 13]            # or null together with eve_area: [50, 98, 5, 13]
    schemes: [proposed, random_location]
    sweep: {axis: n_irs, values: [4, 6, 8]}
    n_seeds: 20
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .channel import EVE_MODELS, Rect, SystemParams, Vec2
from .pipeline import SCHEMES

SWEEP_AXES = ("none", "power_dbm", "n_irs", "rician_k", "eve_area_index")
QUANTILE_METHOD_ALIASES = {"analytic": "analytic", "mc": "monte_carlo", "monte_carlo": "monte_carlo"}

BASE_EVE_AREA = (50.0, 98.0, 5.0, 13.0)
# four suspicious areas, moving toward Bob in 20 m steps along x
DEFAULT_EVE_AREAS = tuple(
    (BASE_EVE_AREA[0] + dx, BASE_EVE_AREA[1] + dx, BASE_EVE_AREA[2], BASE_EVE_AREA[3]) for dx in (-40.0, -20.0, 0.0, 20.0)
)


class ConfigError(ValueError):
    """Invalid or unparsable configuration; the message names the offending field."""


def dbm_to_watts(dbm: float) -> float:
    return 10 ** ((dbm - 30) / 10)


@dataclass(frozen=True)
class RunConfig:
    n_tx: int = 4
    n_irs: int = 5
    rician_k: float = 2.0
    rho_ai: float = 2.2
    rho_iu: float = 3.0
    noise_dbm: float = -95.0
    power_dbm: float = 30.0
    p_out: float = 0.05
    carrier_hz: float = 2.4e9
    element_spacing_fraction: float = 0.5
    irs_area: tuple[float, float, float, float] = (0.0, 105.0, 20.0, 30.0)
    bob: tuple[float, float] = (100.0, 15.0)
    eve: tuple[float, float] | None = (95.0, 13.0)
    eve_area: tuple[float, float, float, float] | None = None
    eve_areas: tuple[tuple[float, float, float, float], ...] = DEFAULT_EVE_AREAS

    seed: int = 0
    n_seeds: int = 20
    sweep_axis: str = "none"
    sweep_values: tuple[float, ...] = ()
    schemes: tuple[str, ...] = ("proposed",)
    out: str | None = None
    quantile_method: str = "analytic"
    grid_step: float = 0.5
    eve_model: str = "structured"
    verify_draws: int = 10_000
    workers: int = 1
    record_timing: bool = True

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        def need(cond: bool, name: str, msg: str) -> None:
            if not cond:
                raise ConfigError(f"{name}: {msg}")

        need(self.n_tx >= 1, "n_tx", "must be >= 1")
        need(self.n_irs >= 1, "n_irs", "must be >= 1")
        need(self.rician_k > 0, "rician_k", "must be > 0")
        need(0 < self.p_out < 1, "p_out", "must lie in (0, 1)")
        need(self.carrier_hz > 0, "carrier_hz", "must be > 0")
        need(self.n_seeds >= 1, "n_seeds", "must be >= 1")
        need(self.seed >= 0, "seed", "must be >= 0")
        need(self.grid_step > 0, "grid_step", "must be > 0")
        need(self.verify_draws >= 1, "verify_draws", "must be >= 1")
        need(self.workers >= 1, "workers", "must be >= 1")
        need(self.sweep_axis in SWEEP_AXES, "sweep.axis", f"must be one of {SWEEP_AXES}")
        need(self.sweep_axis == "none" or len(self.sweep_values) > 0, "sweep.values", "must be nonempty")
        need(len(self.schemes) > 0, "schemes", "must be nonempty")
        for s in self.schemes:
            need(s in SCHEMES, "schemes", f"unknown scheme {s!r}; expected one of {SCHEMES}")
        need(self.quantile_method in QUANTILE_METHOD_ALIASES, "quantile_method", "must be analytic or mc")
        need(self.eve_model in EVE_MODELS, "eve_model", f"must be one of {EVE_MODELS}")
        need(self.eve is not None or self.eve_area is not None or self.sweep_axis == "eve_area_index",
             "eve", "either eve or eve_area must be given")
        for name, rect in (("irs_area", self.irs_area), ("eve_area", self.eve_area), *(
            (f"eve_areas[{i}]", r) for i, r in enumerate(self.eve_areas)
        )):
            if rect is not None:
                need(len(rect) == 4 and rect[0] <= rect[1] and rect[2] <= rect[3], name,
                     "must be [x_min, x_max, y_min, y_max] with min <= max")
        if self.sweep_axis == "eve_area_index":
            for v in self.sweep_values:
                need(float(v).is_integer() and 0 <= int(v) < len(self.eve_areas), "sweep.values",
                     f"eve_area_index {v} out of range")
        if self.sweep_axis == "n_irs":
            need(all(float(v).is_integer() and v >= 1 for v in self.sweep_values), "sweep.values",
                 "n_irs values must be positive integers")
        uses_area = self.sweep_axis == "eve_area_index" or (self.eve is None and self.eve_area is not None)
        if uses_area:
            need(set(self.schemes) == {"proposed"}, "schemes", "suspicious-area runs support only the proposed scheme")

    @property
    def quantile_method_name(self) -> str:
        return QUANTILE_METHOD_ALIASES[self.quantile_method]

    def system_params(self) -> SystemParams:
        try:
            return SystemParams(
                n_tx=self.n_tx,
                n_irs=self.n_irs,
                rician_k=self.rician_k,
                rho_ai=self.rho_ai,
                rho_iu=self.rho_iu,
                noise_power=dbm_to_watts(self.noise_dbm),
                tx_power=dbm_to_watts(self.power_dbm),
                p_out=self.p_out,
                carrier_hz=self.carrier_hz,
                irs_area=Rect(*self.irs_area),
                bob_loc=Vec2(*self.bob),
                eve_loc=None if self.eve is None else Vec2(*self.eve),
                eve_area=None if self.eve_area is None else Rect(*self.eve_area),
                element_spacing_fraction=self.element_spacing_fraction,
            )
        except ValueError as exc:
            raise ConfigError(f"system parameters: {exc}") from exc

    def at_sweep_value(self, value: float) -> RunConfig:
        """Config of one sweep cell."""
        axis = self.sweep_axis
        if axis == "none":
            return self
        if axis == "power_dbm":
            return replace(self, power_dbm=float(value))
        if axis == "n_irs":
            return replace(self, n_irs=int(value))
        if axis == "rician_k":
            return replace(self, rician_k=float(value))
        return replace(self, eve=None, eve_area=self.eve_areas[int(value)])

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["sweep"] = {"axis": d.pop("sweep_axis"), "values": list(d.pop("sweep_values"))}
        return {k: _plain(v) for k, v in d.items()}

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _plain(v: Any) -> Any:
    if isinstance(v, (tuple, list)):
        return [_plain(x) for x in v]
    return v


_TUPLE_FIELDS = {"irs_area", "bob", "eve", "eve_area"}


def config_from_dict(raw: dict[str, Any] | None) -> RunConfig:
    raw = dict(raw or {})
    known = {f.name for f in fields(RunConfig)}
    kwargs: dict[str, Any] = {}
    sweep = raw.pop("sweep", None)
    key = "sweep"
    try:
        if sweep is not None:
            if not isinstance(sweep, dict):
                raise ConfigError("sweep: must be a mapping with 'axis' and 'values'")
            kwargs["sweep_axis"] = str(sweep.get("axis", "none"))
            kwargs["sweep_values"] = tuple(float(v) for v in sweep.get("values", ()) or ())
        for key, value in raw.items():
            if key not in known:
                raise ConfigError(f"{key}: unknown configuration key")
            if key in _TUPLE_FIELDS and value is not None:
                value = tuple(float(x) for x in value)
            elif key == "eve_areas":
                value = tuple(tuple(float(x) for x in r) for r in value)
            elif key == "schemes":
                value = tuple(str(s) for s in ([value] if isinstance(value, str) else value))
            elif key == "sweep_values":
                value = tuple(float(v) for v in value)
            kwargs[key] = value
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{key}: {exc}") from exc
    try:
        return RunConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: {exc}") from exc


def load_config(path: str | Path | None) -> RunConfig:
    """Parse and validate a YAML config; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: parse error: {exc}") from exc
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    return config_from_dict(raw)
