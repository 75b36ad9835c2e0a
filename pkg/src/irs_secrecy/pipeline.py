"""Two-stage design: place the IRS from channel statistics, then (once the IRS
is deployed and its channels are known) alternate between the beamformer and
the phase shifts.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .channel import (
    CArray,
    ChannelSample,
    EveStatModel,
    SystemParams,
    Vec2,
    eve_stat_model,
    mrt_pair,
    sample_channels,
)
from .outage import OutageEstimate, QuantilePair, empirical_secrecy_outage, quantiles
from .placement import (
    PlacementResult,
    global_search_location,
    maxmin_location,
    ratio_objective,
    sca_location,
)
from .secrecy_sdp import (
    DegenerateBobChannel,
    StageTwoSolution,
    bisect_beamformer,
    bisect_phase,
    bti_summary,
    certified_rate,
    gaussian_randomization_f,
    gaussian_randomization_phi,
    phase_instance,
    rank_gap,
    rank_one_extract_f,
    srocr_rank_one,
)

log = logging.getLogger(__name__)

SCHEMES = ("proposed", "random_location", "global_search", "mrt", "gaussian_random")
AO_TOL = 1e-3
AO_MAX_ROUNDS = 30
VERIFY_DRAWS = 10_000

# independent random streams derived from one scenario seed
_STREAM_LOCATION = 1
_STREAM_VERIFY = 2
_STREAM_RECOVERY = 3


def _stream_seed(seed: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(stream,))


@dataclass
class ScenarioResult:
    placement: PlacementResult
    stage2: StageTwoSolution
    empirical_outage: OutageEstimate
    scheme_tag: str
    seed: int
    omega_i: Vec2
    eve_loc: Vec2
    # order in which the scenario touched its inputs; stage 1 must precede any channel draw
    events: list[str] = field(default_factory=list)
    wall_s: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.empirical_outage.p_hat <= 1.0:
            raise ValueError("empirical outage must lie in [0, 1]")
        if self.stage2.rate < 0:
            raise ValueError("stage-2 rate must be >= 0")

    @property
    def rate(self) -> float:
        return self.stage2.rate

    @property
    def regime_ok(self) -> bool:
        """Placement happened before any realized channel was drawn, and the
        stage-2 design kept the placed location."""
        ev = self.events
        return (
            "placement" in ev
            and "sample_channels" in ev
            and ev.index("placement") < ev.index("sample_channels")
            and self.omega_i == self.placement.omega_i
        )


# ---------------------------------------------------------------------------
# Stage 2: alternating optimization
# ---------------------------------------------------------------------------


def alternating_optimization(
    params: SystemParams,
    channel: ChannelSample,
    eve_model: EveStatModel,
    f0: CArray,
    phi0: CArray,
    recovery: str = "srocr",
    tol: float = AO_TOL,
    max_rounds: int = AO_MAX_ROUNDS,
    seed: int = 0,
) -> StageTwoSolution:
    """Alternate the beamformer and phase-shift bisections from ``(f0, phi0)``.

    Each block update is kept only if the BTI-certified rate of the rank-one
    pair does not drop, so the returned trace is non-decreasing. ``recovery``
    selects how rank-one vectors are recovered from the SDR solutions:
    ``"srocr"`` (extraction for f, SROCR for phi) or ``"gaussian"``
    (Gaussian randomization for both).
    """
    if recovery not in ("srocr", "gaussian"):
        raise ValueError(f"unknown recovery {recovery!r}")
    g_ab = channel.g_ab
    s2, p_out, power = params.noise_power, params.p_out, params.tx_power
    rng_seeds = np.random.default_rng(seed)

    def rate(f: CArray, phi: CArray) -> float:
        return certified_rate(f, phi, eve_model, g_ab, s2, p_out)

    f, phi = f0, phi0
    R = rate(f, phi)
    trace = [R]
    events: list[dict] = []
    gap_f = gap_q = 0.0
    for rnd in range(max_rounds):
        Q = np.outer(phi, phi.conj())
        bf = bisect_beamformer(Q, g_ab, eve_model, s2, p_out, power)
        f_new = None
        if bf.rate > 0:
            gap_f = rank_gap(bf.solution)
            if recovery == "srocr":
                try:
                    f_new = rank_one_extract_f(bf.solution, g_ab.conj().T @ phi)
                except DegenerateBobChannel:
                    f_new = None
            else:
                f_new, _ = gaussian_randomization_f(
                    bf.solution, lambda x, phi=phi: rate(x, phi), seed=int(rng_seeds.integers(2**31))
                )
        if f_new is not None and rate(f_new, phi) >= R:
            f = f_new
            R = rate(f, phi)

        F = np.outer(f, f.conj())
        inst = phase_instance(F, g_ab, eve_model, s2, p_out, power)
        bq = bisect_phase(F, g_ab, eve_model, s2, p_out, power, instance=inst)
        method = ""
        if bq.solution is not None:
            gap_q = rank_gap(bq.solution)
            sub_seed = int(rng_seeds.integers(2**31))
            if recovery == "srocr":
                rec = srocr_rank_one(bq.solution, bq.rate, inst, lambda x, f=f: rate(f, x), seed=sub_seed)
                cand, cand_rate, method = rec.phi, rec.rate, rec.method
            else:
                cand, cand_rate = gaussian_randomization_phi(bq.solution, lambda x, f=f: rate(f, x), seed=sub_seed)
                method = "gaussian"
            if cand_rate >= R:
                phi, R = cand, cand_rate
        trace.append(R)
        events.append({"round": rnd + 1, "r_beam": bf.rate, "r_phase": bq.rate, "rate": R, "phase_method": method})
        if trace[-1] - trace[-2] <= tol:
            break
    return silence_if_uncertifiable(StageTwoSolution(f, phi, R, gap_f, gap_q, trace, events), eve_model, g_ab, params)


def silence_if_uncertifiable(
    sol: StageTwoSolution, eve_model: EveStatModel, g_ab: CArray, params: SystemParams
) -> StageTwoSolution:
    """Switch Alice off when the pair cannot certify even a zero secrecy rate.

    With ``f = 0`` neither receiver hears anything, so the secrecy rate is 0
    with certainty and the outage constraint at ``R = 0`` holds trivially.
    """
    F = np.outer(sol.f_vec, sol.f_vec.conj())
    Q = np.outer(sol.phi_vec, sol.phi_vec.conj())
    if bti_summary(F, Q, eve_model, g_ab, params.p_out).margin(0.0, params.noise_power) <= 0:
        return sol
    return replace(sol, f_vec=np.zeros_like(sol.f_vec), rate=0.0, flag="silent")


def mrt_solution(
    params: SystemParams, omega_i: Vec2, channel: ChannelSample, eve_model: EveStatModel
) -> StageTwoSolution:
    f, phi = mrt_pair(params, omega_i)
    R = certified_rate(f, phi, eve_model, channel.g_ab, params.noise_power, params.p_out)
    return silence_if_uncertifiable(StageTwoSolution(f, phi, R, 0.0, 0.0, [R]), eve_model, channel.g_ab, params)


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def _quantiles_cached(params: SystemParams, method: str) -> QuantilePair:
    return quantiles(params, method=method)


@lru_cache(maxsize=256)
def _sca_cached(params: SystemParams, q: QuantilePair) -> PlacementResult:
    return sca_location(params, q)


@lru_cache(maxsize=256)
def _grid_cached(params: SystemParams, q: QuantilePair, step: float) -> PlacementResult:
    return global_search_location(params, q, step)


@lru_cache(maxsize=256)
def _maxmin_cached(params: SystemParams, q: QuantilePair, step: float) -> PlacementResult:
    return maxmin_location(params, q, step)


def _random_placement(params: SystemParams, q: QuantilePair, seed: int) -> PlacementResult:
    rng = np.random.default_rng(_stream_seed(seed, _STREAM_LOCATION))
    area = params.irs_area
    w = Vec2(float(rng.uniform(area.x_min, area.x_max)), float(rng.uniform(area.y_min, area.y_max)))
    val = ratio_objective(w, params.eve_loc, q, params)
    return PlacementResult(w, val, 0, [val])


def _stage_two(
    params: SystemParams,
    placement: PlacementResult,
    scheme: str,
    seed: int,
    events: list[str],
    eve_model_kind: str,
    verify_draws: int,
) -> ScenarioResult:
    t0 = time.perf_counter()
    omega_i = placement.omega_i
    eve = params.eve_loc
    events.append("sample_channels")
    channel = sample_channels(params, omega_i, seed)
    eve_model = eve_stat_model(params, omega_i, eve, channel.h_ai, kind=eve_model_kind)
    if scheme == "mrt":
        sol = mrt_solution(params, omega_i, channel, eve_model)
    else:
        f0, phi0 = mrt_pair(params, omega_i)
        recovery = "gaussian" if scheme == "gaussian_random" else "srocr"
        rec_seed = int(np.random.default_rng(_stream_seed(seed, _STREAM_RECOVERY)).integers(2**31))
        sol = alternating_optimization(params, channel, eve_model, f0, phi0, recovery=recovery, seed=rec_seed)
    events.append("stage2")
    verify_seed = int(np.random.default_rng(_stream_seed(seed, _STREAM_VERIFY)).integers(2**31))
    # verification always uses the exact realized-H_AI sampler, whatever model the design used
    out = empirical_secrecy_outage(
        params, omega_i, channel, eve_model, sol.f_vec, sol.phi_vec, sol.rate, verify_draws, verify_seed
    )
    return ScenarioResult(
        placement, sol, out, scheme, seed, omega_i, eve, events, wall_s=time.perf_counter() - t0
    )


def two_stage_known_eve(
    params: SystemParams,
    seed: int,
    quantile_method: str = "analytic",
    eve_model_kind: str = "structured",
    verify_draws: int = VERIFY_DRAWS,
) -> ScenarioResult:
    if params.eve_loc is None:
        raise ValueError("known-Eve scenario needs params.eve_loc")
    return run_benchmark(params, "proposed", seed, quantile_method, eve_model_kind=eve_model_kind, verify_draws=verify_draws)


def two_stage_suspicious_area(
    params: SystemParams,
    seed: int,
    quantile_method: str = "analytic",
    grid_step: float = 0.5,
    eve_model_kind: str = "structured",
    verify_draws: int = VERIFY_DRAWS,
) -> ScenarioResult:
    """Max-min placement against the worst Eve of ``params.eve_area``, then the
    known-Eve stage 2 with Eve at that worst location."""
    area = params.eve_area
    if area is None:
        raise ValueError("suspicious-area scenario needs params.eve_area")
    if area.is_point:
        # the inner minimization is trivial; this is exactly the known-Eve problem
        pt = Vec2(area.x_min, area.y_min)
        res = two_stage_known_eve(replace(params, eve_loc=pt), seed, quantile_method, eve_model_kind, verify_draws)
        res.placement = replace(res.placement, worst_eve=pt)
        return res
    events = ["placement"]
    q = _quantiles_cached(params, quantile_method)
    placement = _maxmin_cached(params, q, grid_step)
    worst_params = replace(params, eve_loc=placement.worst_eve)
    return _stage_two(worst_params, placement, "proposed", seed, events, eve_model_kind, verify_draws)


def run_benchmark(
    params: SystemParams,
    scheme_tag: str,
    seed: int,
    quantile_method: str = "analytic",
    grid_step: float = 0.5,
    eve_model_kind: str = "structured",
    verify_draws: int = VERIFY_DRAWS,
) -> ScenarioResult:
    """One known-Eve scenario under a named scheme.

    ``proposed``: SCA placement, AO with extraction/SROCR. ``random_location``:
    uniform location, AO. ``global_search``: grid placement, AO. ``mrt``: SCA
    placement, closed-form LoS-matched pair. ``gaussian_random``: grid placement,
    AO with Gaussian randomization.
    """
    if scheme_tag not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme_tag!r}; expected one of {SCHEMES}")
    if params.eve_loc is None:
        raise ValueError("benchmark schemes need params.eve_loc")
    events = ["placement"]
    q = _quantiles_cached(params, quantile_method)
    if scheme_tag in ("proposed", "mrt"):
        placement = _sca_cached(params, q)
    elif scheme_tag == "random_location":
        placement = _random_placement(params, q, seed)
    else:
        placement = _grid_cached(params, q, grid_step)
    return _stage_two(params, placement, scheme_tag, seed, events, eve_model_kind, verify_draws)
