import math

import numpy as np
import pytest

from conftest import random_block_graph, random_connected_graph
from dsrnet.dynamics import DsrParams
from dsrnet.graph import Spectrum, build_graph, pinned_system, spectrum
from dsrnet.simulator import SimConfig, integrate
from dsrnet.stability import (
    ModalPair,
    beta_lower_bound,
    brayton_check,
    corollary1_check,
    corollary2_check,
    eps_lambda,
    filter_delay_sup,
    hayes_V,
    hayes_check,
    lambert_root_survey,
    modal_pairs,
    survey_check,
    theorem1_check,
    theorem2_check,
)

P53 = DsrParams(alpha=0.53, beta=2.0, tau=0.075)
P_SECOND = DsrParams(alpha=1.195, beta=2.0, tau=0.075, omega=0.1195, r=2)


def rightmost(lam, lam_d, tau, k_max=10):
    p = DsrParams(1.0, 1.0, tau)
    return lambert_root_survey([ModalPair(lam, lam_d, 0j)], p, k_max).rightmost_real


class TestModalPairs:
    def test_substitution(self):
        (pair,) = modal_pairs([1.0], P53)
        assert pair.lambda_i.real == pytest.approx(-1.06 + (1 - 2) / 0.075)
        assert pair.lambda_di.real == pytest.approx(1 / 0.075)

    def test_degenerate_delay(self):
        (pair,) = modal_pairs([0.5], P53)
        assert pair.lambda_di == 0
        res = lambert_root_survey([pair], P53)
        assert np.all(res.roots[0] == pair.lambda_i)
        assert res.rightmost == pair.lambda_i

    @pytest.mark.parametrize("seed", range(10))
    def test_sum_identity(self, seed):
        rng = np.random.default_rng(seed)
        lam = rng.uniform(0.1, 5, 4) + 1j * rng.uniform(-2, 2, 4)
        p = DsrParams(rng.uniform(0.1, 3), rng.uniform(0.1, 5), rng.uniform(0.01, 1))
        for lk, pair in zip(lam, modal_pairs(lam, p)):
            assert abs(pair.lambda_i + pair.lambda_di + p.alpha * p.beta * lk) < 1e-12 * (1 + abs(lk) / p.tau)


class TestRootSurvey:
    def test_fig3_preset_left_half_plane(self, fig3_spec):
        pairs = modal_pairs(fig3_spec, P53)
        res = lambert_root_survey(pairs, P53)
        assert res.rightmost_real < 0
        assert not res.failed
        for pair, row in zip(pairs, res.roots):
            for s in row:
                assert abs(s - pair.lambda_i - pair.lambda_di * np.exp(-s * P53.tau)) <= 1e-8

    def test_k_max_validation(self, fig3_spec):
        with pytest.raises(ValueError):
            lambert_root_survey(modal_pairs(fig3_spec, P53), P53, k_max=0)

    def test_classic_delayed_negative_feedback(self):
        # z' = -z(t - tau): unstable for tau = 2
        assert rightmost(0.0, -1.0, 2.0) > 0
        assert rightmost(0.0, -1.0, 1.0) < 0

    def test_crossing_at_half_pi(self):
        lo, hi = 1.0, 2.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if rightmost(0.0, -1.0, mid) < 0:
                lo = mid
            else:
                hi = mid
        assert 0.5 * (lo + hi) == pytest.approx(math.pi / 2, abs=1e-9)

    def test_survey_report_json(self, fig3_spec):
        rep = survey_check(fig3_spec, P53)
        d = rep.as_dict()
        assert d["verdict"] == "stable"
        assert len(d["details"]) == 6
        assert len(d["details"][0]["roots"]) == 21
        assert d["rightmost_root"][0] < 0


class TestTheorem1:
    def test_real_spectrum_any_rate(self):
        spec = Spectrum.from_eigenvalues([1.0, 3.0])
        for at in (1e-6, 1.0):
            rep = theorem1_check(spec, DsrParams(at, 2.0, 1.0))
            assert rep.verdict == "stable"
            assert all(d["lhs"] == 0 for d in rep.details)

    def test_fig3_preset(self, fig3_spec):
        assert theorem1_check(fig3_spec, P53).verdict == "stable"

    def test_complex_threshold(self):
        spec = Spectrum.from_eigenvalues([1 + 1j, 1 - 1j])
        at_star = (math.sqrt(5) - 1) / 2
        above = theorem1_check(spec, DsrParams(at_star * 1.001, 2.0, 1.0))
        below = theorem1_check(spec, DsrParams(at_star * 0.999, 2.0, 1.0))
        assert above.verdict == "stable" and below.verdict == "not-guaranteed"
        d = above.details[0]
        assert d["lhs"] == pytest.approx(math.sqrt(5) - 1, abs=1e-15)

    def test_equality_is_not_guaranteed(self):
        # lhs = |2 + 2j - 1| - 1 and rhs = 2 alpha tau; pick alpha = lhs / 2 exactly
        spec = Spectrum.from_eigenvalues([1 + 1j, 1 - 1j])
        lhs = abs(complex(1, 2)) - 1
        rep = theorem1_check(spec, DsrParams(lhs / 2, 2.0, 1.0))
        d = rep.details[0]
        if d["lhs"] == d["rhs"]:
            assert rep.verdict == "not-guaranteed"

    def test_assumption_violation(self, fig3_spec):
        rep = theorem1_check(fig3_spec, DsrParams(0.53, 0.5, 0.075))
        assert rep.verdict == "not-guaranteed"
        assert "precondition" in rep.reason


class TestCorollary1:
    def test_real_bounds(self):
        rep = corollary1_check(1.0, 4.0, 0.0, DsrParams(1e-6, 2.0, 1e-3))
        assert rep.extras["psi_bar"] == 0.0
        assert rep.details[0]["lhs"] == 0.0
        assert rep.verdict == "stable"

    def test_fig3_bounds(self, fig3_spec):
        rep = corollary1_check(fig3_spec.m_lo, fig3_spec.m_hi, fig3_spec.phi_hi, P53)
        assert rep.verdict == "stable"

    def test_precondition(self):
        rep = corollary1_check(1.0, 4.0, 1.2, DsrParams(1.0, 2.0, 0.1))
        assert rep.verdict == "not-guaranteed"
        assert "precondition" in rep.reason

    @pytest.mark.parametrize("seed", range(40))
    def test_implies_theorem1(self, seed):
        rng = np.random.default_rng(seed)
        m_lo = rng.uniform(0.2, 2)
        m_hi = m_lo * rng.uniform(1, 5)
        phi = rng.uniform(0, 1.2)
        beta = rng.uniform(1.01, 4) / (m_lo * math.cos(phi))
        p = DsrParams(rng.uniform(0.05, 5), beta, rng.uniform(0.01, 1))
        if corollary1_check(m_lo, m_hi, phi, p).verdict != "stable":
            return
        m = rng.uniform(m_lo, m_hi, 6)
        ph = rng.uniform(-phi, phi, 6)
        spec = Spectrum.from_eigenvalues(m * np.exp(1j * ph))
        assert theorem1_check(spec, p).verdict == "stable"

    def test_monotone_in_rho_and_psi(self):
        rho = np.linspace(0.01, 50, 400)
        psi = np.linspace(0, math.pi / 2 - 1e-3, 400)
        R, S = np.meshgrid(rho, psi, indexing="ij")
        F = (R + 1) / (R * np.cos(S) + 1)
        assert np.all(np.diff(F, axis=0) >= -1e-12)
        assert np.all(np.diff(F, axis=1) >= -1e-12)


class TestCorollary2:
    def test_verdicts(self, fig3_spec, complex_ps):
        assert corollary2_check(fig3_spec, P53).verdict == "stable"
        assert corollary2_check(fig3_spec, DsrParams(0.5, 0.9, 0.1)).verdict == "not-guaranteed"
        assert corollary2_check(spectrum(complex_ps), DsrParams(0.5, 20, 0.1)).verdict == "not-guaranteed"

    @pytest.mark.parametrize("seed", range(12))
    def test_real_spectra_stable_over_decades(self, seed):
        rng = np.random.default_rng(500 + seed)
        g, _ = random_block_graph(rng, rng.integers(1, 4, size=3))
        spec = spectrum(pinned_system(g))
        assert spec.all_real
        beta = beta_lower_bound(spec) * rng.uniform(1.05, 3)
        for alpha in (0.01, 0.1, 1.0, 10.0, 100.0):
            for tau in (1e-3, 1e-2, 1e-1, 1.0, 10.0):
                p = DsrParams(alpha, beta, tau)
                assert corollary2_check(spec, p).verdict == "stable"
                res = lambert_root_survey(modal_pairs(spec, p), p)
                assert res.rightmost_real < 0, (alpha, tau)


class TestHayes:
    def test_classical_boundary_case(self):
        assert hayes_V(0.0) == pytest.approx(math.pi / 2)
        rep = hayes_check([ModalPair(0.0, -1.0, 0j)], DsrParams(1.0, 1.0, 1.0))
        assert rep.verdict == "stable"
        assert rep.details[0]["rhs"] == pytest.approx(math.pi / 2)

    @pytest.mark.parametrize("a", [-5.0, -1.0, -0.1, 0.5, 0.99])
    def test_V_solves_equation(self, a):
        V = hayes_V(a)
        assert 0 < V < math.pi
        assert V / math.tan(V) == pytest.approx(a, abs=1e-10)

    def test_V_undefined_for_a_ge_1(self):
        with pytest.raises(ValueError):
            hayes_V(1.0)

    def test_a_at_least_one_unstable(self):
        rep = hayes_check([ModalPair(1.5, -0.1, 0j)], DsrParams(1.0, 1.0, 1.0))
        assert rep.verdict == "unstable"

    def test_fig3_modes(self, fig3_spec):
        assert hayes_check(modal_pairs(fig3_spec, P53), P53).verdict == "stable"

    def test_rejects_complex_pairs(self):
        with pytest.raises(ValueError):
            hayes_check([ModalPair(1j, -1.0, 0j)], DsrParams(1.0, 1.0, 1.0))

    @pytest.mark.parametrize("lam", [-3.0, -0.5, 0.0, 0.4])
    @pytest.mark.parametrize("tau", [1.0, 0.2])
    def test_threshold_matches_root_survey(self, lam, tau):
        # stability boundary in -lam_d for fixed lam, from the rightmost surveyed root
        a = lam * tau
        threshold = math.sqrt(hayes_V(a) ** 2 + a * a) / tau
        lo, hi = max(-lam, 0.0) + 1e-9, threshold * 3
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if rightmost(lam, -mid, tau) < 0:
                lo = mid
            else:
                hi = mid
        assert 0.5 * (lo + hi) == pytest.approx(threshold, abs=1e-6)

    @pytest.mark.parametrize("seed", range(30))
    def test_agrees_with_survey(self, seed):
        rng = np.random.default_rng(seed)
        lam, lam_d, tau = rng.uniform(-5, 2), rng.uniform(-6, 6), rng.uniform(0.05, 2)
        p = DsrParams(1.0, 1.0, tau)
        verdict = hayes_check([ModalPair(lam, lam_d, 0j)], p).verdict
        r = rightmost(lam, lam_d, tau)
        if abs(r) > 1e-6:
            assert (verdict == "stable") == (r < 0)


class TestBrayton:
    RING = build_graph([("s", 1, 1.0), (1, 2, 1.0), (2, 1, 1.0)], "s")

    def test_undirected_ring(self):
        ps = pinned_system(self.RING)
        beta = beta_lower_bound(spectrum(ps)) * 1.1
        rep = brayton_check(ps, DsrParams(0.5, beta, 0.1))
        assert rep.verdict == "stable"
        assert all(d["min_eig"] > 0 for d in rep.details)

    def test_small_beta_flagged(self):
        rep = brayton_check(pinned_system(self.RING), DsrParams(0.5, 0.5, 0.1))
        assert rep.verdict == "not-guaranteed"

    def test_directed_not_applicable(self, fig3_ps):
        assert brayton_check(fig3_ps, P53).verdict == "not-applicable"

    @pytest.mark.parametrize("seed", range(10))
    def test_sound_against_survey(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 6))
        edges = [("s", 1, 1.0)]
        for i in range(2, n + 1):
            w = rng.uniform(0.3, 2)
            j = int(rng.integers(1, i))
            edges += [(j, i, w), (i, j, w)]
        ps = pinned_system(build_graph(edges, "s", list(range(1, n + 1))))
        spec = spectrum(ps)
        p = DsrParams(rng.uniform(0.1, 3), beta_lower_bound(spec) * rng.uniform(0.5, 3),
                      rng.uniform(0.01, 1))
        if brayton_check(ps, p).verdict == "stable":
            assert lambert_root_survey(modal_pairs(spec, p), p).rightmost_real < -1e-9


class TestTheorem2:
    def test_second_order_preset(self, fig3_spec):
        rep = theorem2_check(P_SECOND, spec=fig3_spec)
        assert rep.verdict == "stable"
        assert rep.extras["eps_lambda"] == pytest.approx(8 / 7)

    def test_unfiltered_sup_is_two(self):
        sup, w = filter_delay_sup(0.075, None)
        assert sup == pytest.approx(2.0, abs=1e-12)
        # attained at any odd multiple of pi / tau
        assert abs(math.sin(w * 0.075 / 2)) == pytest.approx(1.0, abs=1e-12)

    def test_unfiltered_verdict_is_direct_comparison(self, fig3_spec):
        for alpha in (10.0, 30.0):
            p = DsrParams(alpha, 2.0, 0.075, r=1)
            rep = theorem2_check(p, spec=fig3_spec)
            assert (rep.verdict == "stable") == (2.0 < rep.extras["eps_lambda"] * alpha * 0.075)

    def test_vanishing_cutoff(self, fig3_spec):
        p = DsrParams(0.05, 2.0, 10.0, omega=1e-9, r=2)
        rep = theorem2_check(p, spec=fig3_spec)
        assert rep.extras["sup"] < 1e-8
        assert rep.verdict == "stable"

    def test_sup_against_dense_brute_force(self):
        tau, om = 0.3, 4.0
        sup, _ = filter_delay_sup(tau, om)
        w = np.linspace(0, 60, 2_000_001)
        brute = np.max(om / np.hypot(w, om) * 2 * np.abs(np.sin(w * tau / 2)))
        assert sup >= brute - 1e-12
        assert sup == pytest.approx(brute, rel=1e-8)

    @pytest.mark.parametrize("seed", range(30))
    def test_bound_form_is_conservative(self, seed):
        rng = np.random.default_rng(seed)
        m_lo = rng.uniform(0.2, 2)
        m_hi = m_lo * rng.uniform(1, 4)
        phi = rng.uniform(0, 1.0)
        beta = rng.uniform(1.01, 4) / (m_lo * math.cos(phi))
        lam = rng.uniform(m_lo, m_hi, 5) * np.exp(1j * rng.uniform(-phi, phi, 5))
        spec = Spectrum.from_eigenvalues(lam)
        for r in (1, 2):
            p = DsrParams(1.0, beta, 0.1, omega=1.0, r=r)
            assert eps_lambda(p, bounds=(m_lo, m_hi, phi)) <= eps_lambda(p, spec=spec) * (1 + 1e-12)

    def test_precondition(self, fig3_spec):
        rep = theorem2_check(DsrParams(1.0, 0.5, 0.075, omega=0.1, r=2), spec=fig3_spec)
        assert rep.verdict == "not-guaranteed" and "precondition" in rep.reason
        rep = theorem2_check(DsrParams(1.0, 0.5, 0.075, omega=0.1, r=2), bounds=(1.0, 4.0, 0.0))
        assert rep.verdict == "not-guaranteed"


def _random_draw(rng):
    g = random_connected_graph(rng, int(rng.integers(2, 7)))
    ps = pinned_system(g)
    spec = spectrum(ps)
    p = DsrParams(
        float(10 ** rng.uniform(-1.5, 1)),
        beta_lower_bound(spec) * float(rng.uniform(1.01, 4)),
        float(10 ** rng.uniform(-2.5, 0)),
    )
    return ps, spec, p


def test_soundness_randomized():
    """Sufficient-condition verdicts are never contradicted by a root survey."""
    rng = np.random.default_rng(20240601)
    claims = 0
    for _ in range(200):
        ps, spec, p = _random_draw(rng)
        verdicts = [
            theorem1_check(spec, p).verdict,
            corollary1_check(spec.m_lo, spec.m_hi, spec.phi_hi, p).verdict,
            theorem2_check(p, spec=spec).verdict,  # unfiltered, r = 1
        ]
        if "stable" in verdicts:
            claims += 1
            res = lambert_root_survey(modal_pairs(spec, p), p)
            assert res.rightmost_real <= -1e-9, (spec.eigenvalues, p)
    assert claims >= 50


@pytest.mark.parametrize("seed", range(6))
def test_filtered_theorem2_soundness_by_simulation(seed):
    """Filtered second-order verdicts: a stable claim implies a decaying response."""
    rng = np.random.default_rng(77 + seed)
    g = random_connected_graph(rng, 4)
    ps = pinned_system(g)
    spec = spectrum(ps)
    alpha = float(rng.uniform(0.5, 2))
    p = DsrParams(alpha, beta_lower_bound(spec) * float(rng.uniform(1.1, 3)), 0.05,
                  omega=alpha / 10, r=2)
    if theorem2_check(p, spec=spec).verdict != "stable":
        pytest.skip("no stability claim for this draw")
    T = 40.0 / alpha
    traj = integrate(SimConfig("dsr-higher-order", T=T, params=p,
                               initial=tuple(rng.normal(size=4))), ps)
    # zero-amplitude default source is a unit step; measure distance to it
    err = np.abs(traj.states - 1.0).max(axis=1)
    assert not traj.diverged
    assert err[-1] < 0.05 * err[0]
