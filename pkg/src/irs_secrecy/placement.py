"""IRS location optimization under the statistical (pre-deployment) channel model.

Three solvers share one objective, the ratio
``(sigma^2 + alpha_b L_AI L_IB) / (sigma^2 + alpha_e L_AI L_IE)``:

* :func:`sca_location` runs successive convex approximation on the surrogate
  that drops ``sigma^2`` from the numerator (minimizing its reciprocal),
* :func:`global_search_location` evaluates the exact ratio on a grid,
* :func:`maxmin_location` does the same against the worst Eve of a suspicious area.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from numpy.typing import NDArray

from .channel import (
    ALICE,
    DegenerateGeometryError,
    Rect,
    SystemParams,
    Vec2,
    derived_constants,
    link_gains,
)
from .outage import QuantilePair
from .sdp import SolverFailure, solve_quietly

log = logging.getLogger(__name__)

MIN_EVE_DISTANCE = 0.5
SCA_EPS = 1e-6
SCA_MAX_ITER = 100


@dataclass(frozen=True)
class AuxVars:
    """Reciprocal path gains and their products (all positive)."""

    a_ai: float
    a_ib: float
    a_ie: float
    a_ab: float
    a_be: float

    def __post_init__(self) -> None:
        if min(self.a_ai, self.a_ib, self.a_ie, self.a_ab, self.a_be) <= 0:
            raise ValueError("auxiliary variables must be positive")

    @classmethod
    def tight(cls, params: SystemParams, omega_i: Vec2, omega_e: Vec2) -> AuxVars:
        g = link_gains(params, omega_i, omega_e)
        return cls(1 / g["ai"], 1 / g["ib"], 1 / g["ie"], 1 / (g["ai"] * g["ib"]), g["ie"] / g["ib"])

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.a_ai, self.a_ib, self.a_ie, self.a_ab, self.a_be])


@dataclass
class PlacementResult:
    omega_i: Vec2
    objective: float
    iterations: int
    trace: list[float] = field(default_factory=list)
    worst_eve: Vec2 | None = None
    flag: str = ""


def _check_eve_distance(omega_i: Vec2, omega_e: Vec2) -> None:
    if omega_i.dist(omega_e) < MIN_EVE_DISTANCE:
        raise DegenerateGeometryError(f"IRS at {omega_i} is within {MIN_EVE_DISTANCE} m of Eve at {omega_e}")


def ratio_objective(omega_i: Vec2, omega_e: Vec2, q: QuantilePair, params: SystemParams) -> float:
    """Exact ratio whose log2 is the stage-1 secrecy-rate lower bound."""
    _check_eve_distance(omega_i, omega_e)
    g = link_gains(params, omega_i, omega_e)
    s2 = params.noise_power
    return float((s2 + q.alpha_b * g["ai"] * g["ib"]) / (s2 + q.alpha_e * g["ai"] * g["ie"]))


def surrogate_objective(omega_i: Vec2, omega_e: Vec2, q: QuantilePair, params: SystemParams) -> float:
    """Noise-free-numerator form minimized by SCA:
    ``sigma^2 / (alpha_b L_AI L_IB) + alpha_e L_IE / (alpha_b L_IB)``."""
    _check_eve_distance(omega_i, omega_e)
    g = link_gains(params, omega_i, omega_e)
    return float((params.noise_power + q.alpha_e * g["ai"] * g["ie"]) / (q.alpha_b * g["ai"] * g["ib"]))


def stage1_rates(params: SystemParams, omega_i: Vec2, q: QuantilePair, omega_e: Vec2 | None = None) -> tuple[float, float]:
    """Rates ``(R_B, R_E)`` at which both deterministic outage bounds are tight."""
    eve = params.eve_loc if omega_e is None else omega_e
    g = link_gains(params, omega_i, eve)
    s2 = params.noise_power
    return (
        float(np.log2(1 + q.alpha_b * g["ai"] * g["ib"] / s2)),
        float(np.log2(1 + q.alpha_e * g["ai"] * g["ie"] / s2)),
    )


def ratio_grid(
    xs: NDArray, ys: NDArray, ex: NDArray | float, ey: NDArray | float, q: QuantilePair, params: SystemParams
) -> NDArray:
    """Vectorized :func:`ratio_objective`; points closer than the guard distance to Eve give -inf."""
    _, l0 = derived_constants(params)
    d_ai = np.hypot(xs - ALICE.x, ys - ALICE.y)
    d_ib = np.hypot(xs - params.bob_loc.x, ys - params.bob_loc.y)
    d_ie = np.hypot(xs - ex, ys - ey)
    with np.errstate(divide="ignore"):
        l_ai = l0 * d_ai ** (-params.rho_ai)
        l_ib = l0 * d_ib ** (-params.rho_iu)
        l_ie = l0 * d_ie ** (-params.rho_iu)
    s2 = params.noise_power
    r = (s2 + q.alpha_b * l_ai * l_ib) / (s2 + q.alpha_e * l_ai * l_ie)
    bad = (d_ie < MIN_EVE_DISTANCE) | (d_ai == 0) | (d_ib == 0) | ~np.isfinite(r)
    return np.where(bad, -np.inf, r)


def _axis(lo: float, hi: float, step: float) -> NDArray:
    n = int(np.floor((hi - lo) / step + 1e-9))
    pts = lo + step * np.arange(n + 1)
    return pts if pts[-1] >= hi - 1e-12 else np.append(pts, hi)


def _grid(area: Rect, step: float) -> tuple[NDArray, NDArray]:
    if not step > 0:
        raise ValueError("grid_step must be > 0")
    return np.meshgrid(_axis(area.x_min, area.x_max, step), _axis(area.y_min, area.y_max, step), indexing="ij")


def global_search_location(
    params: SystemParams, q: QuantilePair, grid_step: float = 0.5, omega_e: Vec2 | None = None
) -> PlacementResult:
    eve = params.eve_loc if omega_e is None else omega_e
    gx, gy = _grid(params.irs_area, grid_step)
    r = ratio_grid(gx, gy, eve.x, eve.y, q, params)
    k = np.unravel_index(np.argmax(r), r.shape)
    if not np.isfinite(r[k]):
        raise DegenerateGeometryError("no admissible grid point in the IRS area")
    best = float(r[k])
    return PlacementResult(Vec2(float(gx[k]), float(gy[k])), best, 1, [best])


def worst_eve(omega_i: Vec2, eve_area: Rect) -> Vec2:
    """Point of the suspicious area closest to the IRS (maximizes L_IE)."""
    return eve_area.clamp(omega_i)


def maxmin_location(
    params: SystemParams, q: QuantilePair, irs_grid_step: float = 0.5, eve_area: Rect | None = None
) -> PlacementResult:
    area = params.eve_area if eve_area is None else eve_area
    if area is None:
        raise ValueError("maxmin placement needs an Eve suspicious area")
    gx, gy = _grid(params.irs_area, irs_grid_step)
    ex = np.clip(gx, area.x_min, area.x_max)
    ey = np.clip(gy, area.y_min, area.y_max)
    r = ratio_grid(gx, gy, ex, ey, q, params)
    k = np.unravel_index(np.argmax(r), r.shape)
    if not np.isfinite(r[k]):
        raise DegenerateGeometryError("every IRS grid point is within the guard distance of the Eve area")
    omega_i = Vec2(float(gx[k]), float(gy[k]))
    best = float(r[k])
    return PlacementResult(omega_i, best, 1, [best], worst_eve=worst_eve(omega_i, area))


# ---------------------------------------------------------------------------
# Successive convex approximation
# ---------------------------------------------------------------------------


class ScaProgram:
    """Convex surrogate around a linearization point, built once and re-solved.

    Auxiliaries are normalized by their values at the linearization point, so the
    solver sees O(1) numbers even though the reciprocal gains are ~1e8..1e12.
    Variable order of ``ah``: ai, ib, ie, ab, be.
    """

    def __init__(self, params: SystemParams, q: QuantilePair, omega_e: Vec2, solver: str = "CLARABEL"):
        self.params, self.q, self.omega_e, self.solver = params, q, omega_e, solver
        _, self.l0 = derived_constants(params)
        box = params.irs_area
        self.w = cp.Variable(2, name="omega_i")
        self.ah = cp.Variable(5, pos=True, name="aux")
        ai, ib, ie, ab, be = (self.ah[i] for i in range(5))
        self.p = {
            "inv_ai": cp.Parameter(nonneg=True),
            "inv_ib": cp.Parameter(nonneg=True),
            "ie_c0": cp.Parameter(),
            "ie_g": cp.Parameter(2),
            "d1": cp.Parameter(),
            "d1_sq": cp.Parameter(nonneg=True),
            "e2": cp.Parameter(nonneg=True),
            "e2_sq": cp.Parameter(nonneg=True),
            "c_ab": cp.Parameter(nonneg=True),
            "c_be": cp.Parameter(nonneg=True),
        }
        p = self.p
        bob = params.bob_loc.as_array()
        cons = [
            ai >= cp.power(cp.norm(self.w) * p["inv_ai"], params.rho_ai),
            ib >= cp.power(cp.norm(self.w - bob) * p["inv_ib"], params.rho_iu),
            ie <= p["ie_c0"] + p["ie_g"] @ self.w,
            # a_ai a_ib <= b1 (difference of squares, concave part linearized)
            ab >= 0.25 * (cp.square(ai + ib) + p["d1_sq"] - 2 * p["d1"] * (ai - ib)),
            # a_ie a_be >= b2 (convex part linearized)
            ib <= 0.25 * (2 * p["e2"] * (ie + be) - p["e2_sq"] - cp.square(ie - be)),
            self.w[0] >= box.x_min,
            self.w[0] <= box.x_max,
            self.w[1] >= box.y_min,
            self.w[1] <= box.y_max,
        ]
        self.problem = cp.Problem(cp.Minimize(p["c_ab"] * ab + p["c_be"] * be), cons)

    def set_point(self, omega_i: Vec2, aux: AuxVars) -> tuple[NDArray, NDArray]:
        params, p, l0 = self.params, self.p, self.l0
        scale = np.array([aux.a_ai, aux.a_ib, aux.a_ie, aux.a_ai * aux.a_ib, aux.a_ib / aux.a_ie])
        ah0 = aux.as_array() / scale
        p["inv_ai"].value = (scale[0] * l0) ** (-1 / params.rho_ai)
        p["inv_ib"].value = (scale[1] * l0) ** (-1 / params.rho_iu)
        w0 = omega_i.as_array()
        diff = w0 - self.omega_e.as_array()
        d0 = float(np.linalg.norm(diff))
        rho = params.rho_iu
        grad = rho * d0 ** (rho - 2) * diff
        p["ie_c0"].value = (d0**rho - grad @ w0) / (l0 * scale[2])
        p["ie_g"].value = grad / (l0 * scale[2])
        d1 = ah0[0] - ah0[1]
        p["d1"].value, p["d1_sq"].value = d1, d1 * d1
        e2 = ah0[2] + ah0[4]
        p["e2"].value, p["e2_sq"].value = e2, e2 * e2
        c = np.array([self.params.noise_power / self.q.alpha_b * scale[3], self.q.alpha_e / self.q.alpha_b * scale[4]])
        norm = c @ ah0[3:]
        p["c_ab"].value, p["c_be"].value = c / norm
        return scale, norm

    def solve(self, omega_i: Vec2, aux: AuxVars) -> tuple[Vec2, AuxVars, float]:
        """Minimize the surrogate; returns (omega_i, aux, surrogate objective)."""
        scale, norm = self.set_point(omega_i, aux)
        try:
            solve_quietly(self.problem, self.solver)
        except cp.error.SolverError as exc:
            raise SolverFailure(f"SCA subproblem failed: {exc}") from exc
        if self.problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            raise SolverFailure(f"SCA subproblem status {self.problem.status}")
        w = self.params.irs_area.clamp(Vec2(*map(float, self.w.value)))
        a = np.maximum(np.asarray(self.ah.value), 1e-300) * scale
        return w, AuxVars(*map(float, a)), float(self.problem.value) * norm


def sca_subproblem(
    point: tuple[Vec2, AuxVars],
    q: QuantilePair,
    params: SystemParams,
    omega_e: Vec2 | None = None,
    program: ScaProgram | None = None,
) -> tuple[Vec2, AuxVars]:
    eve = params.eve_loc if omega_e is None else omega_e
    prog = program or ScaProgram(params, q, eve)
    w, a, _ = prog.solve(*point)
    return w, a


def _sca_single(
    params: SystemParams, q: QuantilePair, omega_e: Vec2, init: Vec2, eps: float, max_iter: int, prog: ScaProgram
) -> PlacementResult:
    w = init
    aux = AuxVars.tight(params, w, omega_e)
    trace = [surrogate_objective(w, omega_e, q, params)]
    flag = "max-iter"
    it = 0
    while it < max_iter:
        it += 1
        w_new, _, _ = prog.solve(w, aux)
        val = surrogate_objective(w_new, omega_e, q, params)
        if val > trace[-1] * (1 + 1e-12):
            # solver round-off pushed the iterate uphill; keep the incumbent
            flag = "stalled"
            break
        step_sq = (w_new.x - w.x) ** 2 + (w_new.y - w.y) ** 2
        w = w_new
        # re-tighten at the new location: exact tangents keep the next subproblem feasible
        aux = AuxVars.tight(params, w, omega_e)
        trace.append(val)
        if step_sq <= eps:
            flag = ""
            break
    return PlacementResult(w, ratio_objective(w, omega_e, q, params), it, trace, flag=flag)


def sca_location(
    params: SystemParams,
    q: QuantilePair,
    omega_i_init: Vec2 | None = None,
    eps: float = SCA_EPS,
    max_iter: int = SCA_MAX_ITER,
    omega_e: Vec2 | None = None,
) -> PlacementResult:
    """SCA placement; ``omega_i_init=None`` runs from the four corners and the
    centroid of the IRS area and keeps the best exact ratio.

    The trace holds the surrogate (minimization) objective per iterate.
    """
    eve = params.eve_loc if omega_e is None else omega_e
    area = params.irs_area
    if area.is_point:
        w = Vec2(area.x_min, area.y_min)
        val = ratio_objective(w, eve, q, params)
        return PlacementResult(w, val, 1, [surrogate_objective(w, eve, q, params)])
    if omega_i_init is not None and not area.contains(omega_i_init):
        raise ValueError(f"initial point {omega_i_init} lies outside the IRS area")
    starts = [omega_i_init] if omega_i_init is not None else [area.centroid, *area.corners]
    prog = ScaProgram(params, q, eve)
    best: PlacementResult | None = None
    for s in starts:
        if s.dist(eve) < MIN_EVE_DISTANCE:
            continue
        res = _sca_single(params, q, eve, s, eps, max_iter, prog)
        log.debug("SCA from %s -> %s (ratio %.6g, %d iters)", s, res.omega_i, res.objective, res.iterations)
        if best is None or res.objective > best.objective:
            best = res
    if best is None:
        raise DegenerateGeometryError("all SCA starting points collide with Eve")
    return best
