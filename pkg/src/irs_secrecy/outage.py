"""Outage quantiles for the placement stage and a Monte-Carlo secrecy-outage estimator.

The placement stage replaces the unknown small-scale fading by a scalar model:
the cascaded gain seen through any beamformer/phase pair is ``(a +/- |g|)^2``
times the product of path gains, where ``a`` is the LoS amplitude and ``g`` a
circular complex normal of variance ``s_sq``. The two quantiles ``alpha_e``
(upper, Eve) and ``alpha_b`` (lower, Bob) turn the outage constraints into
deterministic path-loss constraints.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel import (
    CArray,
    ChannelSample,
    EveStatModel,
    SystemParams,
    Vec2,
    link_gains,
    received_power,
)

QUANTILE_METHODS = ("analytic", "monte_carlo")
MC_CHUNK = 4096
_REL_TOL = 1e-10


@dataclass(frozen=True)
class QuantilePair:
    alpha_e: float
    alpha_b: float
    method: str
    n_samples: int | None = None


def gamma_scale(params: SystemParams, power: float | None = None) -> tuple[float, float]:
    """LoS amplitude ``a`` and NLoS variance ``s_sq`` of the normalized cascade gain."""
    p = params.tx_power if power is None else power
    if p < 0:
        raise ValueError("power must be >= 0")
    k, m = params.rician_k, params.n_irs
    a = k * m * np.sqrt(params.n_tx * p) / (k + 1)
    s_sq = 2 * k * m * p / (k + 1) ** 2
    return float(a), float(s_sq)


def bob_cdf(t: float, a: float, s_sq: float) -> float:
    """``Pr{(a - |g|)^2 <= t}`` for ``0 <= sqrt(t) <= a``."""
    r = np.sqrt(t)
    return float(np.exp(-((a - r) ** 2) / s_sq) - np.exp(-((a + r) ** 2) / s_sq))


def quantiles_from_scale(a: float, s_sq: float, p_out: float) -> tuple[float, float]:
    """Analytic ``(alpha_e, alpha_b)`` for the given amplitude/variance."""
    if not 0 < p_out < 1:
        raise ValueError(f"p_out must lie in (0, 1), got {p_out}")
    if s_sq <= 0:
        return a * a, a * a
    alpha_e = (a + np.sqrt(-s_sq * np.log(p_out))) ** 2
    hi = a * a
    if hi == 0.0:
        return float(alpha_e), 0.0
    if p_out >= bob_cdf(hi, a, s_sq):
        warnings.warn("p_out exceeds F_B(a^2); alpha_b saturates at a^2", RuntimeWarning, stacklevel=2)
        return float(alpha_e), float(hi)
    lo = 0.0
    # F_B is increasing on [0, a^2]; F_B(0) = 0 < p_out
    while hi - lo > _REL_TOL * max(hi, 1e-300):
        mid = 0.5 * (lo + hi)
        if bob_cdf(mid, a, s_sq) < p_out:
            lo = mid
        else:
            hi = mid
    return float(alpha_e), float(0.5 * (lo + hi))


def mc_quantiles_from_scale(
    a: float, s_sq: float, p_out: float, n_samples: int = 1_000_000, seed: int = 0
) -> tuple[float, float]:
    """Empirical quantiles of ``(a + |g|)^2`` and ``(a - |g|)^2``."""
    if not 0 < p_out < 1:
        raise ValueError(f"p_out must lie in (0, 1), got {p_out}")
    rng = np.random.default_rng(seed)
    g = np.abs(np.sqrt(s_sq / 2) * (rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)))
    return float(np.quantile((a + g) ** 2, 1 - p_out)), float(np.quantile((a - g) ** 2, p_out))


def quantiles(
    params: SystemParams,
    p_out: float | None = None,
    method: str = "analytic",
    n_samples: int = 1_000_000,
    seed: int = 0,
) -> QuantilePair:
    p = params.p_out if p_out is None else p_out
    a, s_sq = gamma_scale(params)
    if method == "analytic":
        return QuantilePair(*quantiles_from_scale(a, s_sq, p), method="analytic")
    if method in ("monte_carlo", "mc"):
        return QuantilePair(*mc_quantiles_from_scale(a, s_sq, p, n_samples, seed), "monte_carlo", n_samples)
    raise ValueError(f"unknown quantile method {method!r}")


@dataclass(frozen=True)
class OutageEstimate:
    p_hat: float
    std_err: float
    n_draws: int

    def within(self, p_out: float, n_se: float = 3.0) -> bool:
        return self.p_hat <= p_out + n_se * self.std_err


def _chunk_normals(seed: int, index: int, size: int, m: int) -> CArray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    return (rng.standard_normal((size, m)) + 1j * rng.standard_normal((size, m))) / np.sqrt(2.0)


def eve_draws(eve_model: EveStatModel, n_draws: int, seed: int) -> CArray:
    """Fresh IRS-Eve channel realizations ``h_ie_bar + sqrt(nlos_var) u``.

    Draws come in fixed-size chunks, each seeded from ``(seed, chunk index)``, so
    the first ``n`` draws never depend on how a run is partitioned.
    """
    m = eve_model.h_ie_bar.shape[0]
    n_chunks = -(-n_draws // MC_CHUNK)
    u = np.concatenate([_chunk_normals(seed, i, MC_CHUNK, m) for i in range(n_chunks)])[:n_draws]
    return eve_model.h_ie_bar[None, :] + np.sqrt(eve_model.nlos_var) * u


def empirical_secrecy_outage(
    params: SystemParams,
    omega_i: Vec2,
    channel: ChannelSample,
    eve_model: EveStatModel,
    f: CArray,
    phi: CArray,
    target_r: float,
    n_draws: int = 10_000,
    seed: int = 0,
) -> OutageEstimate:
    """Fraction of Eve realizations with ``C_B - C_E < target_r``.

    Eve's channel is the full realized-H_AI cascade ``diag(h_ie) H_AI`` with
    fresh NLoS draws of ``h_ie``; no product-term approximation is made.
    """
    if n_draws <= 0:
        raise ValueError("n_draws must be positive")
    if eve_model.h_ie_bar is None or eve_model.nlos_var is None:
        raise ValueError("the Eve model lacks the IRS-Eve mean/variance needed for sampling")
    sigma_sq = params.noise_power
    c_b = np.log2(1.0 + received_power(channel.g_ab, f, phi) / sigma_sq)
    h_ie = eve_draws(eve_model, n_draws, seed)
    y = h_ie @ (phi.conj() * (channel.h_ai @ f))
    c_e = np.log2(1.0 + np.abs(y) ** 2 / sigma_sq)
    p_hat = float(np.mean(c_b - c_e < target_r))
    return OutageEstimate(p_hat, float(np.sqrt(p_hat * (1 - p_hat) / n_draws)), n_draws)


@dataclass(frozen=True)
class BoundCheck:
    holds_e: bool
    holds_b: bool


def stage1_outage_bound_check(
    params: SystemParams,
    omega_i: Vec2,
    r_b: float,
    r_e: float,
    q: QuantilePair,
    omega_e: Vec2 | None = None,
) -> BoundCheck:
    """Evaluate ``alpha_e <= (2^R_E - 1) sigma^2 / (L_AI L_IE)`` and
    ``alpha_b >= (2^R_B - 1) sigma^2 / (L_AI L_IB)`` at a geometry."""
    eve = params.eve_loc if omega_e is None else omega_e
    g = link_gains(params, omega_i, eve)
    s2 = params.noise_power
    with np.errstate(over="ignore"):
        rhs_e = np.expm1(r_e * np.log(2)) * s2 / (g["ai"] * g["ie"])
    rhs_b = np.expm1(r_b * np.log(2)) * s2 / (g["ai"] * g["ib"])
    tol = 1e-12
    return BoundCheck(bool(q.alpha_e <= rhs_e * (1 + tol)), bool(q.alpha_b * (1 + tol) >= rhs_b))
