"""Acceptance checks shared by the test suite and the ``verify`` CLI command.

Each ``criterion_*`` function runs one check at its pinned tolerance and
returns a :class:`CriterionResult`; none of them raise on a failed check.
"""
from __future__ import annotations

import time
from collections.abc import Callable
from dataclasses import dataclass, replace
from functools import cache
from itertools import pairwise

import numpy as np

from .channel import (
    EveStatModel,
    Rect,
    SystemParams,
    Vec2,
    alice_irs_los,
    irs_user_los,
    link_gains,
    standard_cn,
)
from .config import BASE_EVE_AREA, DEFAULT_EVE_AREAS, dbm_to_watts
from .outage import quantiles
from .pipeline import ScenarioResult, run_benchmark, two_stage_suspicious_area
from .placement import global_search_location, maxmin_location, sca_location, worst_eve
from .secrecy_sdp import build_bti, hadamard_lift, rank_one_extract_f, vec


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(
    number: int, name: str, fn: Callable[[], tuple[bool, str]], budget_s: float | None = None
) -> CriterionResult:
    t0 = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - t0
    if budget_s is not None and elapsed > budget_s:
        ok = False
        detail += f"; over the {budget_s:.0f}s budget"
    return CriterionResult(number, name, bool(ok), detail, elapsed)


DEFAULTS = SystemParams()
DEFAULT_IRS = Vec2(100.0, 20.0)
N_SEEDS = 20


@cache
def scenario(params: SystemParams, scheme: str, seed: int) -> ScenarioResult:
    """Memoized known-Eve/suspicious-area run, so criteria can share runs."""
    if params.eve_loc is None:
        return two_stage_suspicious_area(params, seed)
    return run_benchmark(params, scheme, seed)


def _mean_se(xs: list[float]) -> tuple[float, float]:
    a = np.asarray(xs, dtype=float)
    return float(a.mean()), float(a.std(ddof=1) / np.sqrt(len(a)))


# ---------------------------------------------------------------------------
# 1. quantiles
# ---------------------------------------------------------------------------


def random_quantile_cases(n: int = 10, seed: int = 2024) -> list[tuple[float, int, int, float, float]]:
    """(kappa, M, N_t, P, p_out) tuples with a LoS amplitude well above the spread."""
    rng = np.random.default_rng(seed)
    return [
        (
            float(rng.uniform(1.0, 10.0)),
            int(rng.integers(4, 17)),
            int(rng.integers(2, 9)),
            float(rng.uniform(0.1, 10.0)),
            float(rng.uniform(0.01, 0.1)),
        )
        for _ in range(n)
    ]


def criterion_1(n_samples: int = 1_000_000, rel_tol: float = 5e-3) -> CriterionResult:
    def run() -> tuple[bool, str]:
        worst = 0.0
        for i, (k, m, nt, p, po) in enumerate(random_quantile_cases()):
            params = SystemParams(n_tx=nt, n_irs=m, rician_k=k, tx_power=p, p_out=po)
            an = quantiles(params)
            mc = quantiles(params, method="monte_carlo", n_samples=n_samples, seed=i)
            for x, y in ((an.alpha_e, mc.alpha_e), (an.alpha_b, mc.alpha_b)):
                worst = max(worst, abs(x - y) / abs(x))
        return worst <= rel_tol, f"max relative gap {worst:.2e} (tol {rel_tol:.0e})"

    return _timed(1, "analytic vs Monte-Carlo quantiles", run, 10.0)


# ---------------------------------------------------------------------------
# 2. distribution suite
# ---------------------------------------------------------------------------


def _los_parts(params: SystemParams, omega_i: Vec2, omega_j: Vec2) -> tuple[np.ndarray, np.ndarray, float, float]:
    g = link_gains(params, omega_i, omega_j)
    k = params.rician_k
    h_bar = np.sqrt(k * g["ai"] / (k + 1)) * alice_irs_los(params, omega_i)
    hj_bar = np.sqrt(k * g["ie"] / (k + 1)) * irs_user_los(params, omega_i, omega_j)
    return h_bar, hj_bar, g["ai"], g["ie"]


def uncertainty_draws(
    params: SystemParams, omega_i: Vec2, omega_j: Vec2, n: int, seed: int
) -> tuple[np.ndarray, float]:
    """Draws of ``diag(h~_IJ) H_bar_AI + diag(h_bar_IJ) H~_AI`` (n x M x N_t) and
    the per-entry target variance ``2 kappa L_AI L_IJ / (kappa + 1)^2``."""
    rng = np.random.default_rng(seed)
    k = params.rician_k
    h_bar, hj_bar, l_ai, l_ij = _los_parts(params, omega_i, omega_j)
    m, nt = h_bar.shape
    hj_t = np.sqrt(l_ij / (k + 1)) * standard_cn(rng, (n, m))
    h_t = np.sqrt(l_ai / (k + 1)) * standard_cn(rng, (n, m, nt))
    g = hj_t[:, :, None] * h_bar[None] + hj_bar[None, :, None] * h_t
    return g, 2 * k * l_ai * l_ij / (k + 1) ** 2


def criterion_2(n: int = 100_000, n_pairs: int = 10, seed: int = 7) -> CriterionResult:
    def run() -> tuple[bool, str]:
        p = DEFAULTS
        g, target = uncertainty_draws(p, DEFAULT_IRS, p.eve_loc, n, seed)
        ent_var = np.mean(np.abs(g - g.mean(axis=0)) ** 2, axis=0)
        entry_ok = bool(np.all(np.abs(ent_var / target - 1) <= 0.03))
        se_mean = np.sqrt(ent_var / n)
        mean_ok = bool(np.all(np.abs(g.mean(axis=0)) < 3 * se_mean))

        rng = np.random.default_rng(seed + 1)
        m, nt = g.shape[1:]
        bil_target = target * m * p.tx_power
        ratios = []
        for _ in range(n_pairs):
            phi = np.exp(1j * rng.uniform(0, 2 * np.pi, m))
            f = standard_cn(rng, nt)
            f *= np.sqrt(p.tx_power) / np.linalg.norm(f)
            y = np.einsum("m,nmk,k->n", phi.conj(), g, f)
            ratios.append(np.var(y) / bil_target)
        ratios = np.array(ratios)

        # unit-modulus rotation of the IRS-side NLoS vector leaves its first two moments unchanged
        h = np.sqrt(link_gains(p, DEFAULT_IRS, p.eve_loc)["ie"] / (p.rician_k + 1)) * standard_cn(rng, (n, m))
        h_var = np.var(h, axis=0)
        rot_ok = True
        for _ in range(n_pairs):
            z = h.conj() * np.exp(1j * rng.uniform(0, 2 * np.pi, m))[None]
            se = np.sqrt(2 * h_var / n)
            rot_ok &= bool(np.all(np.abs(z.mean(axis=0) - h.conj().mean(axis=0)) < 3 * se))
            rot_ok &= bool(np.all(np.abs(np.var(z, axis=0) / h_var - 1) <= 0.03))
        bil_ok = bool(np.all(np.abs(ratios - 1) <= 0.03))
        inv_ok = bool(ratios.max() / ratios.min() - 1 <= 0.05)
        ok = entry_ok and mean_ok and rot_ok and bil_ok and inv_ok
        detail = (
            f"per-entry {'ok' if entry_ok else 'off'} (max dev {np.max(np.abs(ent_var / target - 1)):.2%}); "
            f"mean {'ok' if mean_ok else 'off'}; rotation {'ok' if rot_ok else 'off'}; "
            f"bilinear var/target in [{ratios.min():.3f}, {ratios.max():.3f}] (tol 3%); "
            f"spread across pairs {ratios.max() / ratios.min() - 1:.1%} (tol 5%)"
        )
        return ok, detail

    return _timed(2, "distribution suite", run, 30.0)


# ---------------------------------------------------------------------------
# 3. BTI conservativeness on default-geometry runs
# ---------------------------------------------------------------------------


def criterion_3(n_seeds: int = N_SEEDS) -> CriterionResult:
    def run() -> tuple[bool, str]:
        bad = []
        worst = 0.0
        for s in range(n_seeds):
            r = scenario(DEFAULTS, "proposed", s)
            o = r.empirical_outage
            worst = max(worst, o.p_hat)
            if not o.within(DEFAULTS.p_out, 3.0):
                bad.append((s, o.p_hat))
        return not bad, f"max empirical outage {worst:.4f} over {n_seeds} runs (limit 0.05 + 3 SE); violations {bad}"

    return _timed(3, "BTI conservativeness", run, 600.0)


# ---------------------------------------------------------------------------
# 4. Kronecker / transformation identities
# ---------------------------------------------------------------------------


def _rand_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    x = standard_cn(rng, (n, rank or n))
    return x @ x.conj().T


def criterion_4(n_instances: int = 100, tol: float = 1e-10, seed: int = 11) -> CriterionResult:
    def run() -> tuple[bool, str]:
        rng = np.random.default_rng(seed)
        worst = 0.0
        iff_ok = True
        for _ in range(n_instances):
            m, nt = int(rng.integers(1, 7)), int(rng.integers(1, 5))
            F, Q = _rand_psd(rng, nt), _rand_psd(rng, m)
            G = standard_cn(rng, (m, nt))
            lhs = np.trace(G @ F @ G.conj().T @ Q).real
            rhs = (vec(G).conj() @ np.kron(F.T, Q) @ vec(G)).real
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))

            # inequality chain for a rank-one pair and a realized Eve channel
            f = standard_cn(rng, nt)
            phi = np.exp(1j * rng.uniform(0, 2 * np.pi, m))
            g_ab = standard_cn(rng, (m, nt))
            g_bar = standard_cn(rng, (m, nt))
            d2 = float(rng.uniform(0.1, 2.0))
            eve = EveStatModel(g_bar, d2)
            u = standard_cn(rng, m * nt)
            g_ae = g_bar + np.sqrt(d2) * u.reshape((m, nt), order="F")
            s2 = float(rng.uniform(0.1, 2.0))
            R = float(rng.uniform(0.0, 2.0))
            t = build_bti(np.outer(f, f.conj()), np.outer(phi, phi.conj()), eve, g_ab, R, s2, 0.05)
            f1 = (u.conj() @ t.a_mat @ u).real
            f2 = u.conj() @ t.a_vec
            cb = np.log2(1 + abs(np.vdot(phi, g_ab @ f)) ** 2 / s2)
            ce = np.log2(1 + abs(np.vdot(phi, g_ae @ f)) ** 2 / s2)
            slack_rate = 2.0 ** (-R) * (s2 + abs(np.vdot(phi, g_ab @ f)) ** 2) - s2 - abs(np.vdot(phi, g_ae @ f)) ** 2
            slack_bti = t.c1 - f1 - 2 * f2.real
            scale = max(1.0, abs(t.c1), f1)
            worst = max(worst, abs(slack_rate - slack_bti) / scale)
            if abs(slack_bti) > 1e-9 * scale:
                iff_ok &= (cb - ce >= R) == (slack_bti >= 0)
            # structured lift: |phi^H diag(h) H f|^2 = h^H K h
            h = standard_cn(rng, m)
            K = hadamard_lift(g_ab, np.outer(f, f.conj()), np.outer(phi, phi.conj()))
            direct = abs(np.vdot(phi, h[:, None] * g_ab @ f)) ** 2
            worst = max(worst, abs(direct - (h.conj() @ K @ h).real) / max(1.0, direct))
            tr_id = np.trace(t.a_mat).real - d2 * np.trace(np.outer(f, f.conj())).real * m
            worst = max(worst, abs(tr_id) / max(1.0, abs(np.trace(t.a_mat).real)))
        return worst <= tol and iff_ok, f"max relative residual {worst:.2e} (tol {tol:.0e}); rate/BTI equivalence {'ok' if iff_ok else 'broken'}"

    return _timed(4, "Kronecker and transformation identities", run, 5.0)


# ---------------------------------------------------------------------------
# 5. rank-one extraction
# ---------------------------------------------------------------------------


def criterion_5(n_instances: int = 100, tol: float = 1e-10, seed: int = 13) -> CriterionResult:
    def run() -> tuple[bool, str]:
        rng = np.random.default_rng(seed)
        worst_bob = 0.0
        worst_eig = 0.0
        trace_ok = True
        for _ in range(n_instances):
            n = int(rng.integers(1, 7))
            F = _rand_psd(rng, n, int(rng.integers(1, n + 1)))
            F /= np.trace(F).real
            h = standard_cn(rng, n)
            f = rank_one_extract_f(F, h)
            Ft = np.outer(f, f.conj())
            bob, bob_t = (h.conj() @ F @ h).real, (h.conj() @ Ft @ h).real
            worst_bob = max(worst_bob, abs(bob - bob_t) / max(1.0, bob))
            trace_ok &= np.trace(Ft).real <= np.trace(F).real * (1 + 1e-12)
            worst_eig = min(worst_eig, float(np.linalg.eigvalsh(F - Ft)[0]))
        ok = worst_bob <= tol and trace_ok and worst_eig >= -tol
        return ok, f"Bob term residual {worst_bob:.2e}; trace non-increase {'ok' if trace_ok else 'broken'}; min eig(F - F~) {worst_eig:.2e}"

    return _timed(5, "rank-one extraction", run, 5.0)


# ---------------------------------------------------------------------------
# 6. SCA vs grid
# ---------------------------------------------------------------------------


def perturbed_geometries(
    n: int = 5, seed: int = 5, radius: float = 5.0, clearance: float = 2.0
) -> list[SystemParams]:
    """Default geometry with Bob and Eve each displaced uniformly within +/- radius metres.

    Users are kept ``clearance`` metres below the IRS strip: the far-field path
    loss is singular at the strip edge, where the ratio objective explodes.
    """
    rng = np.random.default_rng(seed)
    y_cap = DEFAULTS.irs_area.y_min - clearance
    out = []
    for _ in range(n):
        db, de = rng.uniform(-radius, radius, 2), rng.uniform(-radius, radius, 2)
        b, e = DEFAULTS.bob_loc, DEFAULTS.eve_loc
        bob = Vec2(b.x + db[0], min(b.y + db[1], y_cap))
        eve = Vec2(e.x + de[0], min(e.y + de[1], y_cap))
        out.append(replace(DEFAULTS, bob_loc=bob, eve_loc=eve))
    return out


def criterion_6(grid_step: float = 0.1, rel_tol: float = 0.01) -> CriterionResult:
    def run() -> tuple[bool, str]:
        q = quantiles(DEFAULTS)
        gaps = []
        for params in [DEFAULTS, *perturbed_geometries()]:
            s = sca_location(params, q)
            g = global_search_location(params, q, grid_step)
            gaps.append(1 - s.objective / g.objective)
        ok = all(x <= rel_tol for x in gaps)
        # a negative shortfall means SCA beat the grid between its nodes
        return ok, "objective shortfall vs grid: " + ", ".join(f"{x:.3%}" for x in gaps) + f" (tol {rel_tol:.0%})"

    return _timed(6, "SCA vs 0.1 m grid search", run, 120.0)


# ---------------------------------------------------------------------------
# 7/8. trends and AO convergence
# ---------------------------------------------------------------------------


M_VALUES = (4, 6, 8)
POWER_DBM = (20.0, 25.0, 30.0)


def _rates(params: SystemParams, scheme: str, n_seeds: int) -> list[float]:
    return [scenario(params, scheme, s).rate for s in range(n_seeds)]


def criterion_7(n_seeds: int = N_SEEDS) -> CriterionResult:
    def run() -> tuple[bool, str]:
        m_means = [_mean_se(_rates(replace(DEFAULTS, n_irs=m), "proposed", n_seeds))[0] for m in M_VALUES]
        p_means = [
            _mean_se(_rates(replace(DEFAULTS, tx_power=dbm_to_watts(d)), "proposed", n_seeds))[0] for d in POWER_DBM
        ]
        prop = _mean_se(_rates(DEFAULTS, "proposed", n_seeds))
        rand = _mean_se(_rates(DEFAULTS, "random_location", n_seeds))
        pooled = float(np.hypot(prop[1], rand[1]))
        base = Rect(*BASE_EVE_AREA)
        area_params = [replace(DEFAULTS, eve_loc=None, eve_area=a) for a in (base, base.shifted(dx=20.0))]
        a_means = [_mean_se(_rates(ap, "proposed", n_seeds))[0] for ap in area_params]

        m_ok = all(b > a for a, b in pairwise(m_means))
        p_ok = all(b > a for a, b in pairwise(p_means))
        r_ok = prop[0] - rand[0] > 2 * pooled
        a_ok = a_means[1] < a_means[0]
        detail = (
            f"M {M_VALUES}: {[round(x, 4) for x in m_means]} {'ok' if m_ok else 'not increasing'}; "
            f"P {POWER_DBM} dBm: {[round(x, 4) for x in p_means]} {'ok' if p_ok else 'not increasing'}; "
            f"proposed {prop[0]:.4f} vs random {rand[0]:.4f} (2 pooled SE {2 * pooled:.4f}) {'ok' if r_ok else 'margin too small'}; "
            f"area base/+20 m: {[round(x, 4) for x in a_means]} {'ok' if a_ok else 'not decreasing'}"
        )
        return m_ok and p_ok and r_ok and a_ok, detail

    return _timed(7, "monotonicity trends", run, 1800.0)


def criterion_8(n_seeds: int = N_SEEDS, tol: float = 1e-3, max_rounds: int = 30) -> CriterionResult:
    def run() -> tuple[bool, str]:
        bad = []
        longest = 0
        for m in M_VALUES:
            for s in range(n_seeds):
                tr = scenario(replace(DEFAULTS, n_irs=m), "proposed", s).stage2.trace
                rounds = len(tr) - 1
                longest = max(longest, rounds)
                mono = all(b >= a for a, b in pairwise(tr))
                if not mono or rounds > max_rounds or tr[-1] - tr[-2] > tol:
                    bad.append((m, s))
        return not bad, f"{len(M_VALUES) * n_seeds} traces, longest {longest} rounds; failures {bad}"

    return _timed(8, "AO convergence", run)


# ---------------------------------------------------------------------------
# 9. worst-Eve geometry
# ---------------------------------------------------------------------------


def _on_boundary_nearest(area: Rect, omega_i: Vec2, e: Vec2, n: int = 100) -> bool:
    xs = np.linspace(area.x_min, area.x_max, n)
    ys = np.linspace(area.y_min, area.y_max, n)
    gx, gy = np.meshgrid(xs, ys)
    d_grid = np.hypot(gx - omega_i.x, gy - omega_i.y).min()
    on_edge = e.x in (area.x_min, area.x_max) or e.y in (area.y_min, area.y_max)
    res = max((area.x_max - area.x_min), (area.y_max - area.y_min)) / (n - 1)
    return on_edge and omega_i.dist(e) <= d_grid + 1e-12 and omega_i.dist(e) >= d_grid - res


def criterion_9(grid_step: float = 0.5) -> CriterionResult:
    def run() -> tuple[bool, str]:
        q = quantiles(DEFAULTS)
        rows = []
        ok = True
        for a in DEFAULT_EVE_AREAS:
            area = Rect(*a)
            pr = maxmin_location(replace(DEFAULTS, eve_loc=None, eve_area=area), q, grid_step)
            clamp = Vec2(min(max(pr.omega_i.x, area.x_min), area.x_max), min(max(pr.omega_i.y, area.y_min), area.y_max))
            exact = pr.worst_eve == clamp == worst_eve(pr.omega_i, area)
            near = _on_boundary_nearest(area, pr.omega_i, pr.worst_eve)
            ok &= exact and near
            rows.append(f"{a[:2]}: IRS ({pr.omega_i.x:.1f},{pr.omega_i.y:.1f}) Eve ({pr.worst_eve.x:.1f},{pr.worst_eve.y:.1f})")
        return ok, "; ".join(rows)

    return _timed(9, "worst-Eve geometry", run)


# ---------------------------------------------------------------------------
# 10. deployment near Bob
# ---------------------------------------------------------------------------

PLACEMENT_EVES = (Vec2(95.0, 13.0), Vec2(80.0, 10.0), Vec2(60.0, 5.0), Vec2(30.0, 10.0))
PLACEMENT_BOBS = tuple(Vec2(x, 15.0) for x in (50.0, 60.0, 70.0, 80.0, 90.0, 100.0))


def criterion_10(max_dist: float = 10.0) -> CriterionResult:
    def run() -> tuple[bool, str]:
        q = quantiles(DEFAULTS)
        cases = [replace(DEFAULTS, eve_loc=e) for e in PLACEMENT_EVES] + [replace(DEFAULTS, bob_loc=b) for b in PLACEMENT_BOBS]
        dists = []
        for params in cases:
            w = sca_location(params, q).omega_i
            dists.append(w.dist(params.irs_area.clamp(params.bob_loc)))
        return max(dists) <= max_dist, f"max distance to the Bob-nearest IRS point {max(dists):.2f} m over {len(cases)} geometries (limit {max_dist} m)"

    return _timed(10, "deployment near Bob", run)


CRITERIA: dict[int, Callable[[], CriterionResult]] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_criteria(numbers: list[int] | None = None) -> list[CriterionResult]:
    return [CRITERIA[k]() for k in (numbers or sorted(CRITERIA))]
