"""Stage-2 machinery: Bernstein-type (BTI) outage constraint, the beamformer
power-minimization SDP, the phase-shift feasibility SDP, bisection drivers and
rank-one recovery.

Internally both SDPs are written in SNR units: channels are scaled by
``sqrt(P) / sigma`` and the beamformer covariance is normalized by ``P`` so that
the solver sees O(1) data.
"""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from numpy.typing import NDArray

from .channel import CArray, EveStatModel, standard_cn
from .sdp import SdpInstance, SdpResult, SolverFailure

log = logging.getLogger(__name__)

PSD_FLOOR = -1e-9
FEAS_TOL = 1e-8
BISECTION_EPS = 1e-3


def vec(m: NDArray) -> NDArray:
    """Column-stacking vectorization."""
    return np.asarray(m).reshape(-1, order="F")


def psd_sqrt(m: NDArray) -> NDArray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w.min() < PSD_FLOOR * max(1.0, abs(w).max()):
        raise ValueError(f"matrix is not PSD (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def psd_project(m: NDArray) -> NDArray:
    """Nearest PSD matrix (eigenvalue clipping); cleans solver round-off."""
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.clip(w, 0.0, None)) @ v.conj().T


def _lmax_plus(m: NDArray) -> float:
    return max(float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[-1]), 0.0)


def rho_bar(p_out: float) -> float:
    return -np.log(p_out)


@dataclass(frozen=True)
class BtiTerms:
    a_mat: CArray
    a_vec: CArray
    c1: float
    rho_bar: float


def hadamard_lift(H: CArray, F: CArray, Q: CArray) -> CArray:
    """``(H F H^H)^T * Q`` (elementwise): the M x M matrix K with
    ``|phi^H diag(h) H f|^2 = h^H K h`` when ``F = f f^H`` and ``Q = phi phi^H``."""
    return (H @ F @ H.conj().T).T * Q


def build_bti(
    F: CArray,
    Q: CArray,
    eve_model: EveStatModel,
    g_ab: CArray,
    R: float,
    sigma_sq: float,
    p_out: float,
) -> BtiTerms:
    """Lift the secrecy-rate inequality into ``u^H A u + 2 Re{u^H a} <= c1``
    with ``u ~ CN(0, I)``.

    For the i.i.d. model ``u`` is the vectorized unknown cascade (length M N_t);
    for the structured model it is the normalized IRS-Eve NLoS vector (length M).
    """
    g_bar = eve_model.g_bar_ae
    m, n = g_bar.shape
    if F.shape != (n, n) or Q.shape != (m, m) or g_ab.shape != (m, n):
        raise ValueError("dimension mismatch between F, Q and the cascaded channels")
    if eve_model.kind == "iid":
        d2 = eve_model.delta_ae_sq
        lift = np.kron(F.T, Q)
        a_mat = d2 * lift
        a_vec = np.sqrt(d2) * lift @ vec(g_bar)
    else:
        s2 = eve_model.nlos_var
        k = hadamard_lift(eve_model.h_ai, F, Q)
        a_mat = s2 * k
        a_vec = np.sqrt(s2) * k @ eve_model.h_ie_bar
    bob = np.trace(g_ab @ F @ g_ab.conj().T @ Q).real
    eve_mean = np.trace(g_bar @ F @ g_bar.conj().T @ Q).real
    c1 = 2.0 ** (-R) * (sigma_sq + bob) - sigma_sq - eve_mean
    return BtiTerms(a_mat, a_vec, float(c1), rho_bar(p_out))


def bti_margin(terms: BtiTerms) -> float:
    """Deterministic BTI left side minus ``c1``; the chance constraint holds if <= 0."""
    a = terms.a_mat
    r = terms.rho_bar
    spread = np.sqrt(np.linalg.norm(a, "fro") ** 2 + 2 * np.linalg.norm(terms.a_vec) ** 2)
    return float(np.trace(a).real + np.sqrt(2 * r) * spread + r * _lmax_plus(a) - terms.c1)


@dataclass(frozen=True)
class BtiSummary:
    """R-independent pieces of the BTI row. For the i.i.d. model these come
    from Kronecker identities, so no MN_t x MN_t matrix is formed."""

    bob: float
    eve_mean: float
    trace_a: float
    spread: float  # sqrt(||A||_F^2 + 2 ||a||^2)
    lam_a: float
    rho_bar: float

    def margin(self, R: float, sigma_sq: float) -> float:
        c1 = 2.0 ** (-R) * (sigma_sq + self.bob) - sigma_sq - self.eve_mean
        return self.trace_a + np.sqrt(2 * self.rho_bar) * self.spread + self.rho_bar * self.lam_a - c1

    def max_rate(self, sigma_sq: float) -> float:
        """Largest R with a non-positive margin (0 if none)."""
        denom = sigma_sq + self.eve_mean + self.trace_a + np.sqrt(2 * self.rho_bar) * self.spread + self.rho_bar * self.lam_a
        return max(0.0, float(np.log2((sigma_sq + self.bob) / denom)))


def bti_summary(F: CArray, Q: CArray, eve_model: EveStatModel, g_ab: CArray, p_out: float) -> BtiSummary:
    g_bar = eve_model.g_bar_ae
    bob = np.trace(g_ab @ F @ g_ab.conj().T @ Q).real
    eve_mean = np.trace(g_bar @ F @ g_bar.conj().T @ Q).real
    if eve_model.kind == "iid":
        d2 = eve_model.delta_ae_sq
        tr_a = d2 * np.trace(F).real * np.trace(Q).real
        fro_a = d2 * np.linalg.norm(F, "fro") * np.linalg.norm(Q, "fro")
        a_norm = np.sqrt(d2) * np.linalg.norm(Q @ g_bar @ F, "fro")
        lam = d2 * _lmax_plus(F) * _lmax_plus(Q)
    else:
        s2 = eve_model.nlos_var
        k = hadamard_lift(eve_model.h_ai, F, Q)
        tr_a = s2 * np.trace(k).real
        fro_a = s2 * np.linalg.norm(k, "fro")
        a_norm = np.sqrt(s2) * np.linalg.norm(k @ eve_model.h_ie_bar)
        lam = s2 * _lmax_plus(k)
    spread = np.sqrt(fro_a**2 + 2 * a_norm**2)
    return BtiSummary(float(bob), float(eve_mean), float(tr_a), float(spread), float(lam), rho_bar(p_out))


def certified_rate(
    f: CArray, phi: CArray, eve_model: EveStatModel, g_ab: CArray, sigma_sq: float, p_out: float
) -> float:
    """Largest secrecy-rate target the rank-one pair (f, phi) certifies via BTI."""
    return bti_summary(np.outer(f, f.conj()), np.outer(phi, phi.conj()), eve_model, g_ab, p_out).max_rate(sigma_sq)


def rate_envelope(g_ab: CArray, power: float, sigma_sq: float) -> float:
    """Upper bound on Bob's rate for any ||f||^2 <= P and unit-modulus phi:
    |phi^H G f| <= sum_m ||G[m, :]|| * ||f||."""
    amp = np.linalg.norm(g_ab, axis=1).sum()
    return float(np.log2(1.0 + power * amp**2 / sigma_sq))


# ---------------------------------------------------------------------------
# SDP builders
# ---------------------------------------------------------------------------


def _herm(m: NDArray) -> NDArray:
    return 0.5 * (m + m.conj().T)


def _structured_scaled(eve_model: EveStatModel, scale: float) -> tuple[CArray, CArray]:
    """SNR-unit Alice-IRS channel and normalized IRS-Eve mean for the structured model."""
    s2 = eve_model.nlos_var
    return np.sqrt(scale * s2) * eve_model.h_ai, eve_model.h_ie_bar / np.sqrt(s2)


def _bti_rows(k_expr, h_bar: CArray):
    """Trace term, SOC stack and LMI matrix for ``A = K``, ``a = K h_bar``."""
    k_h = 0.5 * (k_expr + k_expr.H)
    return (
        cp.real(cp.trace(k_h)),
        cp.hstack([cp.vec(k_h, order="F"), np.sqrt(2.0) * (k_h @ h_bar)]),
        k_h,
    )


def pm_instance(
    Q: CArray, g_ab: CArray, eve_model: EveStatModel, sigma_sq: float, p_out: float, power: float
) -> SdpInstance:
    """Power minimization over F for fixed Q; parameter ``t = 2^-R``.

    Decision variable is ``F / P``. For the i.i.d. Eve model the BTI slack rows
    use the exact identities ||F^T (x) Q||_F = ||F||_F ||Q||_F,
    (F^T (x) Q) vec(G) = vec(Q G F) and lambda_max(F^T (x) Q) =
    lambda_max(F) lambda_max(Q) for PSD factors.
    """
    m, n = g_ab.shape
    scale = power / sigma_sq
    g_bar = eve_model.g_bar_ae
    c_b = _herm(scale * g_ab.conj().T @ Q @ g_ab)
    c_e = _herm(scale * g_bar.conj().T @ Q @ g_bar)
    r = rho_bar(p_out)

    F = cp.Variable((n, n), hermitian=True, name="F")
    zeta = cp.Variable(nonneg=True, name="zeta")
    ups = cp.Variable(nonneg=True, name="upsilon")
    t = cp.Parameter(nonneg=True, name="t", value=1.0)

    if eve_model.kind == "iid":
        d2 = scale * eve_model.delta_ae_sq
        tr_a = d2 * np.trace(Q).real * cp.real(cp.trace(F))
        stacked = cp.hstack(
            [d2 * np.linalg.norm(Q, "fro") * cp.vec(F, order="F"), np.sqrt(2 * d2) * cp.vec(Q @ g_bar @ F, order="F")]
        )
        lmi = ups * np.eye(n) - d2 * _lmax_plus(Q) * F >> 0
    else:
        h_s, h_bar = _structured_scaled(eve_model, scale)
        k = cp.multiply((h_s @ F @ h_s.conj().T).T, Q)
        tr_a, stacked, k_h = _bti_rows(k, h_bar)
        lmi = ups * np.eye(m) - k_h >> 0

    row = (
        tr_a
        + np.sqrt(2 * r) * zeta
        + r * ups
        + 1.0
        + cp.real(cp.trace(F @ c_e))
        - t * (1.0 + cp.real(cp.trace(F @ c_b)))
    )
    cons = [row <= 0, cp.norm(stacked, 2) <= zeta, lmi, F >> 0]
    prob = cp.Problem(cp.Minimize(cp.real(cp.trace(F))), cons)
    return SdpInstance(prob, {"F": F, "zeta": zeta, "upsilon": ups}, {"t": t})


def pm_instance_kron(
    Q: CArray, g_ab: CArray, eve_model: EveStatModel, sigma_sq: float, p_out: float, power: float
) -> SdpInstance:
    """Same program with the literal MN_t x MN_t Kronecker lift. Slow; used to
    cross-check :func:`pm_instance` under the i.i.d. Eve model."""
    if eve_model.kind != "iid":
        raise ValueError("the Kronecker form only describes the i.i.d. Eve model")
    m, n = g_ab.shape
    scale = power / sigma_sq
    g_bar = eve_model.g_bar_ae
    d2 = scale * eve_model.delta_ae_sq
    c_b = _herm(scale * g_ab.conj().T @ Q @ g_ab)
    c_e = _herm(scale * g_bar.conj().T @ Q @ g_bar)
    r = rho_bar(p_out)

    F = cp.Variable((n, n), hermitian=True, name="F")
    zeta = cp.Variable(nonneg=True)
    ups = cp.Variable(nonneg=True)
    t = cp.Parameter(nonneg=True, value=1.0)
    A = d2 * cp.kron(F.T, Q)
    a = np.sqrt(d2) * (A / d2) @ vec(g_bar)
    row = (
        cp.real(cp.trace(A)) + np.sqrt(2 * r) * zeta + r * ups + 1.0
        + cp.real(cp.trace(F @ c_e)) - t * (1.0 + cp.real(cp.trace(F @ c_b)))
    )
    cons = [
        row <= 0,
        cp.norm(cp.hstack([cp.vec(A, order="F"), np.sqrt(2) * a]), 2) <= zeta,
        ups * np.eye(m * n) - A >> 0,
        F >> 0,
    ]
    prob = cp.Problem(cp.Minimize(cp.real(cp.trace(F))), cons)
    return SdpInstance(prob, {"F": F, "zeta": zeta, "upsilon": ups}, {"t": t})


def phase_instance(
    F: CArray, g_ab: CArray, eve_model: EveStatModel, sigma_sq: float, p_out: float, power: float
) -> SdpInstance:
    """Phase-shift SDR over Q for fixed F, written as minimization of the BTI
    row (feasible iff the optimum is <= 0). Parameters: ``t = 2^-R`` and the
    rank-one steering pair ``U = u u^H``, ``w`` for ``u^H Q u >= w Tr(Q)``."""
    m = g_ab.shape[0]
    scale = power / sigma_sq
    fh = F / power
    g_bar = eve_model.g_bar_ae
    d_b = _herm(scale * g_ab @ fh @ g_ab.conj().T)
    d_e = _herm(scale * g_bar @ fh @ g_bar.conj().T)
    r = rho_bar(p_out)

    Q = cp.Variable((m, m), hermitian=True, name="Q")
    alpha = cp.Variable(nonneg=True, name="alpha")
    beta = cp.Variable(nonneg=True, name="beta")
    t = cp.Parameter(nonneg=True, name="t", value=1.0)
    # U enters through its real and imaginary parts; complex parameters defeat
    # cvxpy's compiled-program cache and force a full recompile per solve
    u_re = cp.Parameter((m, m), name="U_re", value=np.zeros((m, m)))
    u_im = cp.Parameter((m, m), name="U_im", value=np.zeros((m, m)))
    w = cp.Parameter(nonneg=True, name="w", value=0.0)

    if eve_model.kind == "iid":
        d2 = scale * eve_model.delta_ae_sq
        tr_a = d2 * np.trace(fh).real * m
        stacked = cp.hstack(
            [d2 * np.linalg.norm(fh, "fro") * cp.vec(Q, order="F"), np.sqrt(2 * d2) * cp.vec(Q @ (g_bar @ fh), order="F")]
        )
        lmi = beta * np.eye(m) - d2 * _lmax_plus(fh) * Q >> 0
    else:
        h_s, h_bar = _structured_scaled(eve_model, scale)
        k = cp.multiply(_herm(h_s @ fh @ h_s.conj().T).T, Q)
        tr_a, stacked, k_h = _bti_rows(k, h_bar)
        lmi = beta * np.eye(m) - k_h >> 0

    row = (
        tr_a
        + np.sqrt(2 * r) * alpha
        + r * beta
        + 1.0
        + cp.real(cp.trace(Q @ d_e))
        - t * (1.0 + cp.real(cp.trace(Q @ d_b)))
    )
    cons = [
        cp.real(cp.diag(Q)) == 1.0,
        cp.norm(stacked, 2) <= alpha,
        lmi,
        Q >> 0,
        cp.sum(cp.multiply(u_re, cp.real(Q).T)) - cp.sum(cp.multiply(u_im, cp.imag(Q).T)) >= w * m,
    ]
    prob = cp.Problem(cp.Minimize(row), cons)
    return SdpInstance(prob, {"Q": Q, "alpha": alpha, "beta": beta}, {"t": t, "U_re": u_re, "U_im": u_im, "w": w})


# ---------------------------------------------------------------------------
# Single solves
# ---------------------------------------------------------------------------


@dataclass
class PmSolution:
    F: CArray
    zeta: float
    upsilon: float
    power: float


def solve_pm_sdp(
    Q: CArray,
    R: float,
    g_ab: CArray,
    eve_model: EveStatModel,
    sigma_sq: float,
    p_out: float,
    power: float = 1.0,
    instance: SdpInstance | None = None,
) -> PmSolution | None:
    """Minimum-trace F meeting the BTI row at rate R; ``None`` if infeasible.

    ``power`` only sets the internal normalization. Slacks are returned in
    physical units (scaled back from SNR units).
    """
    inst = instance or pm_instance(Q, g_ab, eve_model, sigma_sq, p_out, power)
    res = inst.solve(t=2.0 ** (-R))
    if res.status == "infeasible":
        return None
    if res.status == "failed":
        raise SolverFailure(f"PM SDP failed at R={R}")
    fh = psd_project(res.values["F"])
    return PmSolution(
        F=power * fh,
        zeta=float(res.values["zeta"]) * sigma_sq,
        upsilon=float(res.values["upsilon"]) * sigma_sq,
        power=power * float(np.trace(fh).real),
    )


def solve_phase_feasibility(
    F: CArray,
    R: float,
    g_ab: CArray,
    eve_model: EveStatModel,
    sigma_sq: float,
    p_out: float,
    power: float = 1.0,
    instance: SdpInstance | None = None,
) -> CArray | None:
    """A unit-diagonal PSD Q meeting the BTI row at rate R, or ``None``."""
    inst = instance or phase_instance(F, g_ab, eve_model, sigma_sq, p_out, power)
    res = _phase_solve(inst, R)
    return None if res is None else psd_project(res.values["Q"])


def _phase_solve(inst: SdpInstance, R: float, U: CArray | None = None, w: float = 0.0) -> SdpResult | None:
    m = inst.variables["Q"].shape[0]
    U = np.zeros((m, m)) if U is None else np.asarray(U)
    res = inst.solve(t=2.0 ** (-R), U_re=U.real.copy(), U_im=U.imag.copy(), w=w)
    if res.status == "infeasible":
        return None
    if res.status == "failed":
        raise SolverFailure(f"phase SDP failed at R={R}")
    return res if res.objective <= FEAS_TOL else None


# ---------------------------------------------------------------------------
# Bisection drivers
# ---------------------------------------------------------------------------


@dataclass
class BisectionResult:
    rate: float
    solution: CArray | None
    probes: int
    flag: str = ""  # "", "lower-infeasible", "saturated"
    solver_failures: int = 0


def _bisect(probe: Callable[[float], CArray | None], r_lo: float, r_hi: float, eps: float) -> BisectionResult:
    """Bisection on a monotone feasibility oracle. A probe whose solver fails is
    counted as infeasible: the bracket can only shrink toward certified rates."""
    if not r_lo < r_hi:
        raise ValueError("need r_lo < r_hi")
    failures = 0

    def check(R: float) -> CArray | None:
        nonlocal failures
        try:
            return probe(R)
        except SolverFailure as exc:
            failures += 1
            log.warning("treating failed probe as infeasible: %s", exc)
            return None

    probes = 1
    best = check(r_lo)
    if best is None:
        return BisectionResult(0.0, None, probes, "lower-infeasible", failures)
    probes += 1
    top = check(r_hi)
    if top is not None:
        return BisectionResult(r_hi, top, probes, "saturated", failures)
    while r_hi - r_lo > eps:
        mid = 0.5 * (r_lo + r_hi)
        sol = check(mid)
        probes += 1
        if sol is None:
            r_hi = mid
        else:
            r_lo, best = mid, sol
    return BisectionResult(r_lo, best, probes, "", failures)


def bisect_beamformer(
    Q: CArray,
    g_ab: CArray,
    eve_model: EveStatModel,
    sigma_sq: float,
    p_out: float,
    power: float,
    r_lo: float = 0.0,
    r_hi: float | None = None,
    eps: float = BISECTION_EPS,
) -> BisectionResult:
    """Largest R (within eps) whose PM optimum fits the power budget.

    On a lower-bound failure the returned solution is the zero beamformer.
    """
    if r_hi is None:
        r_hi = rate_envelope(g_ab, power, sigma_sq)
    inst = pm_instance(Q, g_ab, eve_model, sigma_sq, p_out, power)

    def probe(R: float) -> CArray | None:
        sol = solve_pm_sdp(Q, R, g_ab, eve_model, sigma_sq, p_out, power, instance=inst)
        if sol is None or sol.power > power * (1 + 1e-9):
            return None
        return sol.F

    res = _bisect(probe, r_lo, r_hi, eps)
    if res.solution is None:
        res.solution = np.zeros((g_ab.shape[1], g_ab.shape[1]), dtype=complex)
    return res


def bisect_phase(
    F: CArray,
    g_ab: CArray,
    eve_model: EveStatModel,
    sigma_sq: float,
    p_out: float,
    power: float,
    r_lo: float = 0.0,
    r_hi: float | None = None,
    eps: float = BISECTION_EPS,
    instance: SdpInstance | None = None,
) -> BisectionResult:
    if r_hi is None:
        r_hi = rate_envelope(g_ab, power, sigma_sq)
    inst = instance or phase_instance(F, g_ab, eve_model, sigma_sq, p_out, power)

    def probe(R: float) -> CArray | None:
        res = _phase_solve(inst, R)
        return None if res is None else psd_project(res.values["Q"])

    return _bisect(probe, r_lo, r_hi, eps)


# ---------------------------------------------------------------------------
# Rank-one recovery
# ---------------------------------------------------------------------------


class DegenerateBobChannel(ValueError):
    pass


def rank_one_extract_f(F: CArray, h_b: CArray) -> CArray:
    """Rank-one ``f`` with ``f f^H = F^(1/2) P F^(1/2)``, P the projector onto
    ``F^(1/2) h_b``. Closed form: ``f = F h_b / sqrt(h_b^H F h_b)``."""
    F = _herm(np.asarray(F))
    s = psd_sqrt(F)
    v = s @ h_b
    nv = np.linalg.norm(v)
    if nv <= 1e-300 or nv**2 <= 1e-14 * max(np.trace(F).real, 1e-300) * np.linalg.norm(h_b) ** 2:
        raise DegenerateBobChannel("F^(1/2) h_b vanishes")
    return (s @ v) / nv


def rank_one_projection(F: CArray, h_b: CArray) -> CArray:
    f = rank_one_extract_f(F, h_b)
    return np.outer(f, f.conj())


def unit_modulus(x: CArray) -> CArray:
    ang = np.angle(x)
    return np.exp(1j * ang)


def principal_eigvec(m: CArray) -> tuple[float, CArray]:
    w, v = np.linalg.eigh(_herm(m))
    return float(w[-1]), v[:, -1]


@dataclass
class PhaseRecovery:
    phi: CArray
    rate: float
    iterations: int
    method: str  # "eigen" | "srocr" | "gaussian"
    flag: str = ""


def gaussian_randomization_phi(
    Q: CArray,
    rate_of: Callable[[CArray], float],
    n_candidates: int = 1000,
    seed: int = 0,
) -> tuple[CArray, float]:
    rng = np.random.default_rng(seed)
    m = Q.shape[0]
    root = psd_sqrt(Q)
    best_phi, best_rate = None, -np.inf
    xi = standard_cn(rng, (n_candidates, m)) @ root.T
    for cand in xi:
        phi = unit_modulus(cand)
        r = rate_of(phi)
        if r > best_rate:
            best_phi, best_rate = phi, r
    return best_phi, best_rate


def gaussian_randomization_f(
    F: CArray,
    rate_of: Callable[[CArray], float],
    n_candidates: int = 1000,
    seed: int = 0,
) -> tuple[CArray, float]:
    rng = np.random.default_rng(seed)
    n = F.shape[0]
    root = psd_sqrt(F)
    budget = np.trace(F).real
    best_f, best_rate = np.zeros(n, dtype=complex), -np.inf
    xi = standard_cn(rng, (n_candidates, n)) @ root.T
    for cand in xi:
        nrm = np.linalg.norm(cand)
        if nrm == 0:
            continue
        f = cand * np.sqrt(budget) / nrm
        r = rate_of(f)
        if r > best_rate:
            best_f, best_rate = f, r
    return best_f, best_rate


def srocr_rank_one(
    Q_star: CArray,
    R_target: float,
    instance: SdpInstance,
    rate_of: Callable[[CArray], float],
    step: float = 0.1,
    max_iter: int = 30,
    rank_tol: float = 1e-6,
    n_random: int = 1000,
    seed: int = 0,
) -> PhaseRecovery:
    """Sequential rank-one constraint relaxation on the phase SDR.

    ``instance`` is the phase SDP for the current beamformer; ``rate_of`` maps a
    unit-modulus phi to its BTI-certified rate. Falls back to Gaussian
    randomization when the relaxation stalls or loses more than 0.05 bits.
    """
    m = Q_star.shape[0]
    lam, u = principal_eigvec(Q_star)
    if lam >= (1 - rank_tol) * m:
        phi = unit_modulus(u)
        return PhaseRecovery(phi, rate_of(phi), 0, "eigen")

    q_cur = Q_star
    w_cur = lam / m
    it = 0
    while it < max_iter and step >= 1e-3:
        it += 1
        w_try = min(1.0, w_cur + step)
        try:
            res = _phase_solve(instance, R_target, U=np.outer(u, u.conj()), w=w_try)
        except SolverFailure:
            res = None
        if res is None:
            step /= 2
            continue
        q_cur = psd_project(res.values["Q"])
        w_cur = w_try
        lam, u = principal_eigvec(q_cur)
        if lam >= (1 - rank_tol) * m:
            break

    phi = unit_modulus(u)
    rate = rate_of(phi)
    if rate >= R_target - 0.05:
        return PhaseRecovery(phi, rate, it, "srocr")
    g_phi, g_rate = gaussian_randomization_phi(Q_star, rate_of, n_random, seed)
    if g_rate > rate:
        return PhaseRecovery(g_phi, g_rate, it, "gaussian", "srocr-stalled")
    return PhaseRecovery(phi, rate, it, "srocr", "below-target")


@dataclass
class StageTwoSolution:
    f_vec: CArray
    phi_vec: CArray
    rate: float
    f_mat_rank_gap: float
    q_mat_rank_gap: float
    trace: list[float] = field(default_factory=list)
    log: list[dict] = field(default_factory=list)
    flag: str = ""

    def __post_init__(self) -> None:
        if not np.all(np.abs(np.abs(self.phi_vec) - 1) <= 1e-9):
            raise ValueError("phase shifts must be unit modulus")


def rank_gap(m: CArray) -> float:
    """Second-to-first eigenvalue ratio (0 for an exactly rank-one matrix)."""
    w = np.linalg.eigvalsh(_herm(m))
    return float(max(w[-2], 0.0) / w[-1]) if len(w) > 1 and w[-1] > 0 else 0.0
