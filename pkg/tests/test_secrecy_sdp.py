import math
from dataclasses import replace

import numpy as np
import pytest
from conftest import random_cn, random_psd
from hypothesis import given
from hypothesis import strategies as st

from irs_secrecy.channel import (
    EveStatModel,
    SystemParams,
    Vec2,
    eve_stat_model,
    mrt_pair,
    sample_channels,
)
from irs_secrecy.outage import empirical_secrecy_outage
from irs_secrecy.secrecy_sdp import (
    BtiTerms,
    DegenerateBobChannel,
    StageTwoSolution,
    bisect_beamformer,
    bisect_phase,
    bti_margin,
    bti_summary,
    build_bti,
    certified_rate,
    gaussian_randomization_phi,
    phase_instance,
    pm_instance,
    pm_instance_kron,
    rank_one_extract_f,
    rho_bar,
    solve_phase_feasibility,
    solve_pm_sdp,
    srocr_rank_one,
    vec,
)

W = Vec2(100.0, 20.0)
EPS = 1e-3


def _setup(params=None, seed=3, kind="structured"):
    p = params or SystemParams()
    ch = sample_channels(p, W, seed)
    return p, ch, eve_stat_model(p, W, p.eve_loc, ch.h_ai, kind=kind)


def _random_model(rng, m, n, kind):
    g_bar = random_cn(rng, (m, n))
    if kind == "iid":
        return EveStatModel(g_bar, float(rng.uniform(0.1, 2)))
    h_ai, h_bar = random_cn(rng, (m, n)), random_cn(rng, m)
    return EveStatModel(h_bar[:, None] * h_ai, 1.0, h_ai=h_ai, h_ie_bar=h_bar, nlos_var=float(rng.uniform(0.1, 2)), kind=kind)


@pytest.mark.parametrize("kind", ["iid", "structured"])
def test_zero_beamformer_terms(kind):
    rng = np.random.default_rng(0)
    model = _random_model(rng, 3, 2, kind)
    t = build_bti(np.zeros((2, 2)), random_psd(rng, 3), model, random_cn(rng, (3, 2)), 1.5, 0.7, 0.05)
    assert not np.any(t.a_mat) and not np.any(t.a_vec)
    assert t.c1 == pytest.approx(2**-1.5 * 0.7 - 0.7, rel=1e-14)
    assert t.rho_bar == pytest.approx(-math.log(0.05))


def test_kronecker_identity_small():
    rng = np.random.default_rng(1)
    for _ in range(20):
        F, Q, u = random_psd(rng, 2), random_psd(rng, 2), random_cn(rng, 4)
        U = u.reshape((2, 2), order="F")
        lhs = (u.conj() @ np.kron(F.T, Q) @ u).real
        rhs = np.trace(U @ F @ U.conj().T @ Q).real
        assert lhs == pytest.approx(rhs, rel=1e-10)
    np.testing.assert_array_equal(vec(np.array([[1, 2], [3, 4]])), [1, 3, 2, 4])


def test_iid_lift_trace_and_eigen_identities():
    rng = np.random.default_rng(2)
    for _ in range(20):
        model = _random_model(rng, 3, 2, "iid")
        F, Q = random_psd(rng, 2), random_psd(rng, 3)
        t = build_bti(F, Q, model, random_cn(rng, (3, 2)), 0.3, 1.0, 0.1)
        d2 = model.delta_ae_sq
        assert np.trace(t.a_mat).real == pytest.approx(d2 * np.trace(F).real * np.trace(Q).real, rel=1e-10)
        lmax = np.linalg.eigvalsh(t.a_mat)[-1]
        assert lmax == pytest.approx(d2 * np.linalg.eigvalsh(F)[-1] * np.linalg.eigvalsh(Q)[-1], rel=1e-10)
        np.testing.assert_allclose(t.a_mat, t.a_mat.conj().T, atol=1e-12)
        assert np.linalg.eigvalsh(t.a_mat)[0] >= -1e-10 * lmax


def test_margin_examples():
    assert bti_margin(BtiTerms(np.zeros((3, 3)), np.zeros(3), 1.0, 0.7)) == -1.0
    assert bti_margin(BtiTerms(np.eye(4), np.zeros(4), 0.0, 0.0)) == pytest.approx(4.0)


@given(st.sampled_from(["iid", "structured"]), st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**31))
def test_summary_agrees_with_explicit_terms(kind, m, n, seed):
    rng = np.random.default_rng(seed)
    model = _random_model(rng, m, n, kind)
    F, Q, g_ab = random_psd(rng, n), random_psd(rng, m), random_cn(rng, (m, n))
    R, s2 = float(rng.uniform(0, 2)), float(rng.uniform(0.1, 2))
    margin = bti_margin(build_bti(F, Q, model, g_ab, R, s2, 0.05))
    scale = 1 + abs(margin) + np.trace(F).real * np.trace(Q).real
    assert bti_summary(F, Q, model, g_ab, 0.05).margin(R, s2) == pytest.approx(margin, abs=1e-10 * scale)


@pytest.mark.parametrize("kind", ["iid", "structured"])
def test_bti_row_is_a_conservative_chance_constraint(kind):
    rng = np.random.default_rng(4)
    n_draws, p_out = 100_000, 0.05
    checked = 0
    while checked < 5:
        model = _random_model(rng, 3, 2, kind)
        f, phi = random_cn(rng, 2), np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
        g_ab = 10 * random_cn(rng, (3, 2))
        F, Q = np.outer(f, f.conj()), np.outer(phi, phi.conj())
        R = bti_summary(F, Q, model, g_ab, p_out).max_rate(0.5)
        if R == 0.0:
            continue
        checked += 1
        t = build_bti(F, Q, model, g_ab, R, 0.5, p_out)
        assert bti_margin(t) <= 1e-9 * (1 + abs(t.c1))
        u = random_cn(rng, (n_draws, t.a_vec.size))
        lhs = np.einsum("ni,ij,nj->n", u.conj(), t.a_mat, u).real + 2 * (u.conj() @ t.a_vec).real
        p_hat = np.mean(lhs > t.c1)
        assert p_hat <= p_out + 3 * math.sqrt(p_out * (1 - p_out) / n_draws)
    assert math.exp(-rho_bar(p_out)) == pytest.approx(p_out, rel=1e-15)


def test_certified_pair_meets_the_outage_target():
    p, ch, model = _setup()
    f, phi = mrt_pair(p, W)
    R = certified_rate(f, phi, model, ch.g_ab, p.noise_power, p.p_out)
    assert R > 0
    est = empirical_secrecy_outage(p, W, ch, model, f, phi, R, 10_000, 1)
    assert est.within(p.p_out)


def test_pm_unreachable_and_zero_rate():
    p, ch, model = _setup()
    _, phi = mrt_pair(p, W)
    Q = np.outer(phi, phi.conj())
    assert solve_pm_sdp(Q, 50.0, ch.g_ab, model, p.noise_power, p.p_out) is None
    sol = solve_pm_sdp(Q, 0.0, ch.g_ab, model, p.noise_power, p.p_out)
    assert sol is not None and sol.power <= 1e-7


def test_pm_slacks_match_eigen_margin():
    p, ch, model = _setup()
    _, phi = mrt_pair(p, W)
    Q = np.outer(phi, phi.conj())
    R = 0.5
    sol = solve_pm_sdp(Q, R, ch.g_ab, model, p.noise_power, p.p_out)
    terms = build_bti(sol.F, Q, model, ch.g_ab, R, p.noise_power, p.p_out)
    r = terms.rho_bar
    slack_row = np.trace(terms.a_mat).real + math.sqrt(2 * r) * sol.zeta + r * sol.upsilon - terms.c1
    assert bti_margin(terms) / p.noise_power == pytest.approx(slack_row / p.noise_power, abs=1e-6)


def test_compact_and_kronecker_programs_agree():
    p, ch, model = _setup(kind="iid")
    p = replace(p, n_irs=p.n_irs)
    _, phi = mrt_pair(p, W)
    Q = np.outer(phi, phi.conj())
    args = (Q, ch.g_ab, model, p.noise_power, p.p_out, p.tx_power)
    a, b = pm_instance(*args).solve(t=2.0**-0.05), pm_instance_kron(*args).solve(t=2.0**-0.05)
    assert a.status == b.status
    if a.status == "optimal":
        assert a.objective == pytest.approx(b.objective, rel=1e-5, abs=1e-8)


def test_kronecker_program_rejects_structured_model():
    p, ch, model = _setup()
    with pytest.raises(ValueError):
        pm_instance_kron(np.eye(p.n_irs), ch.g_ab, model, p.noise_power, p.p_out, p.tx_power)


def test_beamformer_bisection_contract():
    p, ch, model = _setup()
    _, phi = mrt_pair(p, W)
    Q = np.outer(phi, phi.conj())
    args = (Q, ch.g_ab, model, p.noise_power, p.p_out, p.tx_power)
    res = bisect_beamformer(*args)
    assert res.rate > 0 and np.trace(res.solution).real <= p.tx_power * (1 + 1e-9)
    above = solve_pm_sdp(Q, res.rate + 2 * EPS, ch.g_ab, model, p.noise_power, p.p_out)
    assert above is None or above.power > p.tx_power
    capped = bisect_beamformer(*args, r_hi=res.rate / 2)
    assert capped.rate == pytest.approx(res.rate / 2) and capped.flag == "saturated"


def test_beamformer_rate_grows_with_power():
    p, ch, model = _setup()
    _, phi = mrt_pair(p, W)
    Q = np.outer(phi, phi.conj())
    hi = bisect_beamformer(Q, ch.g_ab, model, p.noise_power, p.p_out, 1.0)
    lo = bisect_beamformer(Q, ch.g_ab, model, p.noise_power, p.p_out, 0.1)
    assert hi.rate > lo.rate


def test_rank_one_extraction_cases():
    rng = np.random.default_rng(6)
    f = random_cn(rng, 3)
    g = rank_one_extract_f(np.outer(f, f.conj()), random_cn(rng, 3))
    ratio = g / f
    np.testing.assert_allclose(np.abs(ratio), 1.0, rtol=1e-10)
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-10)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        F, h = random_psd(rng, n, int(rng.integers(1, n + 1))), random_cn(rng, n)
        ft = rank_one_extract_f(F, h)
        Ft = np.outer(ft, ft.conj())
        assert np.trace(Ft).real <= np.trace(F).real * (1 + 1e-12)
        assert abs((h.conj() @ Ft @ h).real - (h.conj() @ F @ h).real) <= 1e-10 * max(1, (h.conj() @ F @ h).real)
        assert np.linalg.eigvalsh(F - Ft)[0] >= -1e-10
    with pytest.raises(DegenerateBobChannel):
        rank_one_extract_f(np.diag([1.0, 0.0]), np.array([0.0, 1.0]))


def test_phase_feasibility_cases():
    p, ch, model = _setup()
    m, n = p.n_irs, p.n_tx
    Q = solve_phase_feasibility(np.zeros((n, n)), 0.0, ch.g_ab, model, p.noise_power, p.p_out)
    assert Q is not None
    f, _ = mrt_pair(p, W)
    F = np.outer(f, f.conj())
    assert solve_phase_feasibility(F, 50.0, ch.g_ab, model, p.noise_power, p.p_out) is None
    Q = solve_phase_feasibility(F, 0.1, ch.g_ab, model, p.noise_power, p.p_out)
    np.testing.assert_allclose(np.diag(Q).real, np.ones(m), atol=1e-8)


def test_phase_bisection_single_element():
    p, ch, model = _setup(SystemParams(n_irs=1))
    f, _ = mrt_pair(p, W)
    res = bisect_phase(np.outer(f, f.conj()), ch.g_ab, model, p.noise_power, p.p_out, p.tx_power)
    np.testing.assert_allclose(res.solution, [[1.0]], atol=1e-6)
    exact = certified_rate(f, np.ones(1, dtype=complex), model, ch.g_ab, p.noise_power, p.p_out)
    assert res.rate <= exact + 1e-6 and res.rate >= exact - EPS


def test_phase_bisection_contract_and_monotonicity():
    p, ch, model = _setup()
    f, phi = mrt_pair(p, W)
    F = np.outer(f, f.conj())
    incoming = certified_rate(f, phi, model, ch.g_ab, p.noise_power, p.p_out)
    inst = phase_instance(F, ch.g_ab, model, p.noise_power, p.p_out, p.tx_power)
    res = bisect_phase(F, ch.g_ab, model, p.noise_power, p.p_out, p.tx_power, instance=inst)
    assert res.rate >= incoming - EPS
    assert solve_phase_feasibility(F, res.rate + 2 * EPS, ch.g_ab, model, p.noise_power, p.p_out, instance=inst) is None


def test_recovery_from_rank_one_optimum_is_immediate():
    p, ch, model = _setup()
    f, phi = mrt_pair(p, W)
    F = np.outer(f, f.conj())
    inst = phase_instance(F, ch.g_ab, model, p.noise_power, p.p_out, p.tx_power)
    rec = srocr_rank_one(np.outer(phi, phi.conj()), 0.1, inst, lambda x: 0.0)
    assert rec.iterations == 0 and rec.method == "eigen"
    ratio = rec.phi / phi
    np.testing.assert_allclose(ratio, ratio[0], atol=1e-10)


def test_srocr_is_not_dominated_by_randomization():
    p, ch, model = _setup(SystemParams(n_irs=4), seed=8)
    f, _ = mrt_pair(p, W)
    F = np.outer(f, f.conj())
    inst = phase_instance(F, ch.g_ab, model, p.noise_power, p.p_out, p.tx_power)
    res = bisect_phase(F, ch.g_ab, model, p.noise_power, p.p_out, p.tx_power, instance=inst)
    assert res.solution is not None

    def rate_of(x):
        return certified_rate(f, x, model, ch.g_ab, p.noise_power, p.p_out)

    rec = srocr_rank_one(res.solution, res.rate, inst, rate_of)
    assert np.all(np.abs(rec.phi) == pytest.approx(1.0, abs=1e-15))
    _, g_rate = gaussian_randomization_phi(res.solution, rate_of, 1000, seed=0)
    assert rec.rate >= g_rate - 0.05


def test_stage_two_solution_rejects_non_unit_phases():
    with pytest.raises(ValueError):
        StageTwoSolution(np.zeros(2), np.array([1.0, 0.5]), 0.0, 0.0, 0.0)
