"""Geometry-driven Rician channel synthesis for the Alice-IRS-{Bob, Eve} link.

Alice sits at the origin with a ULA along the x-axis; the IRS is a ULA of
``n_irs`` elements, also along x. All channel quantities are in SI units
(linear power gains, watts, meters).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

SPEED_OF_LIGHT = 299_792_458.0

CArray = NDArray[np.complex128]


class DegenerateGeometryError(ValueError):
    """Two nodes coincide (or a distance is non-positive)."""


@dataclass(frozen=True)
class Vec2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError(f"non-finite location ({self.x}, {self.y})")

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.x, self.y], dtype=float)

    def dist(self, other: Vec2) -> float:
        return float(np.hypot(self.x - other.x, self.y - other.y))


ALICE = Vec2(0.0, 0.0)


@dataclass(frozen=True)
class Rect:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"empty rectangle {self}")

    @property
    def centroid(self) -> Vec2:
        return Vec2(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    @property
    def corners(self) -> list[Vec2]:
        return [
            Vec2(self.x_min, self.y_min),
            Vec2(self.x_max, self.y_min),
            Vec2(self.x_min, self.y_max),
            Vec2(self.x_max, self.y_max),
        ]

    @property
    def is_point(self) -> bool:
        return self.x_min == self.x_max and self.y_min == self.y_max

    def contains(self, p: Vec2, tol: float = 1e-9) -> bool:
        return (
            self.x_min - tol <= p.x <= self.x_max + tol
            and self.y_min - tol <= p.y <= self.y_max + tol
        )

    def clamp(self, p: Vec2) -> Vec2:
        return Vec2(
            min(max(p.x, self.x_min), self.x_max),
            min(max(p.y, self.y_min), self.y_max),
        )

    def shifted(self, dx: float = 0.0, dy: float = 0.0) -> Rect:
        return Rect(self.x_min + dx, self.x_max + dx, self.y_min + dy, self.y_max + dy)


@dataclass(frozen=True)
class SystemParams:
    """Scenario constants. Defaults are the reference simulation setup."""

    n_tx: int = 4
    n_irs: int = 5
    rician_k: float = 2.0
    rho_ai: float = 2.2
    rho_iu: float = 3.0
    noise_power: float = 10 ** (-95 / 10) * 1e-3
    tx_power: float = 1.0
    p_out: float = 0.05
    carrier_hz: float = 2.4e9
    irs_area: Rect = field(default_factory=lambda: Rect(0.0, 105.0, 20.0, 30.0))
    bob_loc: Vec2 = field(default_factory=lambda: Vec2(100.0, 15.0))
    eve_loc: Vec2 | None = field(default_factory=lambda: Vec2(95.0, 13.0))
    eve_area: Rect | None = None
    element_spacing_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.n_tx < 1 or self.n_irs < 1:
            raise ValueError("n_tx and n_irs must be >= 1")
        if not self.rician_k > 0:
            raise ValueError("rician_k must be > 0")
        if not 0 < self.p_out < 1:
            raise ValueError("p_out must lie in (0, 1)")
        if not self.tx_power > 0:
            raise ValueError("tx_power must be > 0")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be > 0")
        if not self.carrier_hz > 0:
            raise ValueError("carrier_hz must be > 0")

    def with_eve(self, eve: Vec2) -> SystemParams:
        from dataclasses import replace

        return replace(self, eve_loc=eve)


def derived_constants(params: SystemParams) -> tuple[float, float]:
    """Return ``(wavelength, L0)`` with ``L0 = (wavelength / 4 pi)^2``."""
    if not params.carrier_hz > 0:
        raise ValueError("carrier_hz must be > 0")
    lam = SPEED_OF_LIGHT / params.carrier_hz
    return lam, (lam / (4 * np.pi)) ** 2


def path_gain(d: float, rho: float, l0: float) -> float:
    if not d > 0:
        raise DegenerateGeometryError(f"non-positive distance {d}")
    return l0 * d ** (-rho)


def steering(count: int, cos_angle: float, spacing_fraction: float = 0.5) -> CArray:
    """ULA response with entries ``exp(-j 2 pi s k c)``, k = 0..count-1."""
    if abs(cos_angle) > 1 + 1e-12:
        raise ValueError(f"|cos angle| > 1: {cos_angle}")
    k = np.arange(count)
    return np.exp(-1j * 2 * np.pi * spacing_fraction * k * cos_angle)


def _cos_to(src: Vec2, dst: Vec2) -> float:
    d = src.dist(dst)
    if d == 0:
        raise DegenerateGeometryError(f"coincident nodes at {src}")
    return float(np.clip((dst.x - src.x) / d, -1.0, 1.0))


def alice_irs_angles(omega_i: Vec2) -> tuple[float, float]:
    """``(cos phi_AI, cos theta_AI)``; theta = pi - phi so the second is the negation."""
    c = _cos_to(ALICE, omega_i)
    return c, -c


def alice_irs_los(params: SystemParams, omega_i: Vec2) -> CArray:
    """Unit-modulus rank-one LoS matrix ``a_I(theta_AI) a_A(phi_AI)^H`` (M x N_t)."""
    c_phi, c_theta = alice_irs_angles(omega_i)
    s = params.element_spacing_fraction
    a_i = steering(params.n_irs, c_theta, s)
    a_a = steering(params.n_tx, c_phi, s)
    return np.outer(a_i, a_a.conj())


def irs_user_los(params: SystemParams, omega_i: Vec2, omega_u: Vec2) -> CArray:
    return steering(params.n_irs, _cos_to(omega_i, omega_u), params.element_spacing_fraction)


def link_gains(params: SystemParams, omega_i: Vec2, omega_e: Vec2 | None = None) -> dict[str, float]:
    """Large-scale gains L_AI, L_IB and (if an Eve location is given) L_IE."""
    _, l0 = derived_constants(params)
    out = {
        "ai": path_gain(ALICE.dist(omega_i), params.rho_ai, l0),
        "ib": path_gain(omega_i.dist(params.bob_loc), params.rho_iu, l0),
    }
    if omega_e is not None:
        out["ie"] = path_gain(omega_i.dist(omega_e), params.rho_iu, l0)
    return out


def mrt_pair(params: SystemParams, omega_i: Vec2, power: float | None = None) -> tuple[CArray, CArray]:
    """Beamformer/phase pair matched to the LoS Alice-IRS-Bob cascade."""
    p = params.tx_power if power is None else power
    c_phi, c_theta = alice_irs_angles(omega_i)
    s = params.element_spacing_fraction
    f = np.sqrt(p / params.n_tx) * steering(params.n_tx, c_phi, s)
    phi = irs_user_los(params, omega_i, params.bob_loc) * steering(params.n_irs, c_theta, s)
    return f, phi


def standard_cn(rng: np.random.Generator, shape) -> CArray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass(frozen=True)
class ChannelSample:
    """One joint draw of all links. ``*_los``/``*_nlos`` are the scaled parts
    (path gain and Rician weights already applied)."""

    h_ai: CArray
    h_ib: CArray
    h_ie: CArray | None
    h_ai_los: CArray
    h_ai_nlos: CArray
    h_ib_los: CArray
    h_ib_nlos: CArray
    h_ie_los: CArray | None
    h_ie_nlos: CArray | None

    @property
    def g_ab(self) -> CArray:
        return cascade(self.h_ib, self.h_ai)

    @property
    def g_ae(self) -> CArray | None:
        return None if self.h_ie is None else cascade(self.h_ie, self.h_ai)


def _rician(rng: np.random.Generator, los: CArray, gain: float, k: float) -> tuple[CArray, CArray, CArray]:
    los_part = np.sqrt(k * gain / (k + 1)) * los
    total = los_part + np.sqrt(gain / (k + 1)) * standard_cn(rng, los.shape)
    # defined by subtraction so that total - los_part == nlos_part bitwise
    return total, los_part, total - los_part


def sample_channels(params: SystemParams, omega_i: Vec2, rng_seed: int, omega_e: Vec2 | None = None) -> ChannelSample:
    """Draw H_AI, h_IB and (when an Eve location is known) h_IE.

    ``omega_e`` defaults to ``params.eve_loc``.
    """
    eve = params.eve_loc if omega_e is None else omega_e
    rng = np.random.default_rng(rng_seed)
    gains = link_gains(params, omega_i, eve)
    k = params.rician_k
    h_ai, ai_los, ai_nlos = _rician(rng, alice_irs_los(params, omega_i), gains["ai"], k)
    h_ib, ib_los, ib_nlos = _rician(rng, irs_user_los(params, omega_i, params.bob_loc), gains["ib"], k)
    if eve is None:
        h_ie = ie_los = ie_nlos = None
    else:
        h_ie, ie_los, ie_nlos = _rician(rng, irs_user_los(params, omega_i, eve), gains["ie"], k)
    return ChannelSample(h_ai, h_ib, h_ie, ai_los, ai_nlos, ib_los, ib_nlos, ie_los, ie_nlos)


def cascade(h_iu: CArray, h_ai: CArray) -> CArray:
    """``diag(h_iu) @ h_ai`` without forming the diagonal."""
    h_iu = np.asarray(h_iu)
    h_ai = np.asarray(h_ai)
    if h_iu.ndim != 1 or h_ai.ndim != 2 or h_ai.shape[0] != h_iu.shape[0]:
        raise ValueError(f"dimension mismatch: {h_iu.shape} vs {h_ai.shape}")
    return h_iu[:, None] * h_ai


def received_power(g: CArray, f: CArray, phi: CArray) -> float:
    return float(abs(np.vdot(phi, g @ f)) ** 2)


def achievable_rate(g: CArray, f: CArray, phi: CArray, sigma_sq: float) -> float:
    """``log2(1 + |phi^H G f|^2 / sigma^2)`` in bits per channel use."""
    return float(np.log2(1.0 + received_power(g, f, phi) / sigma_sq))


EVE_MODELS = ("structured", "iid")


@dataclass(frozen=True)
class EveStatModel:
    """Known mean of the Alice-IRS-Eve cascade and the statistics of its unknown part.

    ``kind="iid"`` treats the unknown cascade as i.i.d. entries of variance
    ``delta_ae_sq``. ``kind="structured"`` keeps its true form
    ``diag(h_ie_nlos) @ h_ai``: only the M entries of the IRS-Eve NLoS vector are
    random (variance ``nlos_var`` each) while ``h_ai`` is the realized channel.
    """

    g_bar_ae: CArray
    delta_ae_sq: float
    h_ai: CArray | None = None
    h_ie_bar: CArray | None = None
    nlos_var: float | None = None
    kind: str = "iid"

    def __post_init__(self) -> None:
        if not self.delta_ae_sq > 0:
            raise ValueError("delta_ae_sq must be > 0")
        if self.kind not in EVE_MODELS:
            raise ValueError(f"unknown Eve model {self.kind!r}")
        if self.kind == "structured" and (self.h_ai is None or self.h_ie_bar is None or self.nlos_var is None):
            raise ValueError("structured Eve model needs h_ai, h_ie_bar and nlos_var")

    def as_kind(self, kind: str) -> EveStatModel:
        from dataclasses import replace

        return replace(self, kind=kind)


def eve_stat_model(
    params: SystemParams, omega_i: Vec2, omega_e: Vec2, h_ai: CArray, kind: str = "structured"
) -> EveStatModel:
    gains = link_gains(params, omega_i, omega_e)
    k = params.rician_k
    h_ie_bar = np.sqrt(k * gains["ie"] / (k + 1)) * irs_user_los(params, omega_i, omega_e)
    delta_sq = k * gains["ai"] * gains["ie"] / (k + 1) ** 2
    return EveStatModel(
        cascade(h_ie_bar, h_ai),
        float(delta_sq),
        h_ai=np.asarray(h_ai),
        h_ie_bar=h_ie_bar,
        nlos_var=float(gains["ie"] / (k + 1)),
        kind=kind,
    )
