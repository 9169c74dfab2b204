import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from martrace.bellman import (STRATA, ConfigBatch, ConfigPoint, ConfigurationError, DomainError, Parametrization,
                              Sampler, SupersolutionCandidate, certify_main_inequality, check_boundary,
                              check_estimate_from_above, default_ladders, discrepancy, discrepancy_batch,
                              discrepancy_lower_bound_near_extremal, lp_candidate, make_candidate, pattern_search,
                              potential_candidate, rank_one_library, search_constants, trace_candidate)
from martrace.groupfourier import kernel_phi, random_kernel
from martrace.subspace import TransformOp

ENDPOINT = SupersolutionCandidate.endpoint(1.0, 10.0, 100.0)
SUBCRITICAL = SupersolutionCandidate.subcritical(0.9, 1e3, 1e6)


def equal_kids(m, alpha, x, z, t, s, y=0.0):
    x = np.asarray(x, float)
    return ConfigPoint(np.tile(x, (m, 1)), y, np.full(m, z), np.full(m, t / m), np.full(m, m ** (alpha - 1) * s))


@pytest.fixture(scope="module")
def random_phi22(request):
    from martrace.groupfourier import parse_builtin
    gs = parse_builtin("builtin:grad:mu=2,d=2")
    return kernel_phi(gs, random_kernel(2, 2, np.random.default_rng(7))).normalized()


class TestCandidates:
    def test_formulas(self):
        x, y, z, t, s = np.array([3.0, 4.0]), -2.0, 7.0, 0.25, 1.0
        assert ENDPOINT(x, y, z, t, s) == pytest.approx(2 * 0.25 + 5 * 0.25 + 10 * 5 * 0.5 + 100 * 2)
        th, M1, M2 = SUBCRITICAL.params
        assert SUBCRITICAL(x, y, z, t, s) == pytest.approx(0.5 + M1 * 5 * 0.25 ** (1 - th) + M2 * 2)

    @given(st.floats(0.01, 100), st.floats(0.01, 100), st.integers(0, 2**31))
    def test_homogeneity(self, lam, mu, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(3)
        y = rng.standard_normal()
        z = np.linalg.norm(x) + rng.random()
        s = rng.random() + 0.1
        t = s * rng.random()
        for G in (ENDPOINT, SUBCRITICAL):
            assert G(lam * x, lam * y, lam * z, mu * t, mu * s) == pytest.approx(lam * mu * G(x, y, z, t, s),
                                                                                  rel=1e-10)

    def test_validation(self):
        with pytest.raises(ValueError):
            SupersolutionCandidate("quadratic", (1, 2, 3))
        with pytest.raises(ValueError):
            SupersolutionCandidate.subcritical(1.5, 1, 1)
        with pytest.raises(ValueError):
            SupersolutionCandidate("endpoint", (1, 2))
        with pytest.raises(ConfigurationError):
            make_candidate("custom", (1, 2, 3))
        assert ENDPOINT.as_dict()["constants"] == {"C1": 1.0, "C2": 10.0, "C3": 100.0}

    def test_ladders(self):
        for kind in ("endpoint", "subcritical"):
            lad = default_ladders(kind)
            assert len(lad) == 27
        assert (1.0, 10.0, 100.0) in default_ladders("endpoint")


class TestDiscrepancy:
    def test_equal_kids_potential(self, grad22):
        c = equal_kids(4, 0.5, [0.3, -0.2, 0.1, 0.5], 2.0, 0.4, 1.0, y=1.5)
        assert discrepancy(potential_candidate(), TransformOp.zero(grad22.subspace), 0.5, c) == pytest.approx(0.0,
                                                                                                             abs=1e-15)

    def test_worked_value(self, grad22):
        # x_j = x, z_j - |x_j| = 1, s = 1, s_j = t_j = 1/4: 4 (1/4 - (1/2)(1/4)) = 1/2
        x = np.array([0.6, 0.0, 0.0, 0.8])
        c = ConfigPoint(np.tile(x, (4, 1)), 0.0, np.full(4, 2.0), np.full(4, 0.25), np.full(4, 0.25))
        assert c.derived(0.5)[3] == pytest.approx(1.0)
        assert discrepancy(potential_candidate(), TransformOp.zero(grad22.subspace), 0.5, c) == pytest.approx(0.5)

    def test_trace_term_without_increment(self, grad22, rng):
        phi = TransformOp(grad22.subspace, rng.standard_normal((4, 16)))
        c = ConfigPoint(np.tile(rng.standard_normal(4), (4, 1)), -0.7, np.full(4, 10.0), rng.random(4), np.ones(4))
        assert discrepancy(trace_candidate(), phi, 0.5, c) == pytest.approx(0.0, abs=1e-14)

    def test_domain_errors(self, grad22, rng):
        W = grad22.subspace
        phi = TransformOp.zero(W)
        X = rng.standard_normal((4, 4))  # generic: x-vector leaves W
        with pytest.raises(DomainError):
            discrepancy(ENDPOINT, phi, 0.5, ConfigPoint(X, 0, np.full(4, 10.0), np.zeros(4), np.ones(4)))
        X = np.zeros((4, 4))
        with pytest.raises(DomainError):
            discrepancy(ENDPOINT, phi, 0.5, ConfigPoint(X, 0, np.ones(4), np.full(4, 2.0), np.ones(4)))

    def test_batch_matches_points(self, grad22, rng, random_phi22):
        W = grad22.subspace
        b = Sampler(W, 0.5, rank_one_library(W)).draw("extremal", rng, 20).normalized(0.5)
        vals = discrepancy_batch(ENDPOINT, random_phi22, 0.5, b)
        for i in (0, 7, 19):
            assert discrepancy(ENDPOINT, random_phi22, 0.5, b.point(i)) == pytest.approx(vals[i], rel=1e-12)

    def test_point_roundtrip(self, rng):
        c = ConfigPoint(rng.standard_normal((3, 2)), 1.0, np.ones(3) * 5, np.zeros(3), np.ones(3))
        d = ConfigPoint.from_dict(c.as_dict())
        np.testing.assert_array_equal(d.X, c.X)


class TestSampler:
    @pytest.mark.parametrize("stratum", STRATA)
    def test_strata_are_valid(self, grad22, rng, stratum):
        W = grad22.subspace
        b = Sampler(W, 0.5, rank_one_library(W)).draw(stratum, rng, 500)
        b.validate(W)
        nb = b.normalized(0.5)
        nb.validate(W)
        x, _, _, s = nb.derived(0.5)
        np.testing.assert_allclose(s, 1.0)
        np.testing.assert_allclose(np.linalg.norm(x, axis=1) + np.abs(nb.y) + nb.Z.sum(axis=1), 1.0)

    def test_parametrization_roundtrip(self, grad22, rng):
        W = grad22.subspace
        par = Parametrization(W, 0.5)
        b = Sampler(W, 0.5, rank_one_library(W)).draw("generic", rng, 50).normalized(0.5)
        d = par.decode(par.encode(b))
        for f in ("X", "y", "Z", "T", "S"):
            np.testing.assert_allclose(getattr(d, f), getattr(b, f), atol=1e-12)
        d.validate(W)

    def test_pattern_search_quadratic(self, rng):
        P0 = rng.standard_normal((5, 3)) * 3
        P, v = pattern_search(lambda P: (P**2).sum(axis=1), P0, rng, sweeps=200)
        assert v.min() < 1e-6

    def test_library_extremal(self, grad22):
        lib = rank_one_library(grad22.subspace)
        assert lib.extremal and len(lib) == 6


class TestUniversalPositivity:
    @pytest.mark.parametrize("space", ["grad22", "div42"])
    def test_potential_nonnegative(self, space, request):
        gs = request.getfixturevalue(space)
        W = gs.subspace
        rep = certify_main_inequality(potential_candidate(), W, TransformOp.zero(W), 0.5, 20_000, seed=3,
                                      descent_cap=100, sweeps=20, threshold=-1e-12)
        assert rep.certified and rep.min_found >= -1e-12


class TestBoundaryAndUpper:
    @pytest.mark.parametrize("G", [ENDPOINT, SUBCRITICAL])
    def test_boundary_holds(self, G):
        rep = check_boundary(G, ell=4, samples=20_000)
        assert rep.holds and rep.witness is None

    def test_broken_candidate(self):
        broken = SupersolutionCandidate.custom(lambda x, y, z, t, s: np.abs(y) * t - np.linalg.norm(x, axis=-1) * s)
        rep = check_boundary(broken, samples=1000)
        assert not rep.holds and rep.witness is not None and rep.min_found < 0

    def test_upper_constants(self):
        e = check_estimate_from_above(ENDPOINT, samples=20_000)
        assert e.bounded and e.constant <= sum(ENDPOINT.params) * (1 + 1e-12)
        s = check_estimate_from_above(SUBCRITICAL, samples=20_000)
        assert s.bounded and s.constant <= sum(SUBCRITICAL.params[1:]) * (1 + 1e-12)
        assert check_estimate_from_above(lp_candidate(0.5), samples=1000).constant <= 1 + 1e-12

    def test_unbounded(self):
        bad = SupersolutionCandidate.custom(lambda x, y, z, t, s: z**2 * s / np.linalg.norm(x, axis=-1))
        rep = check_estimate_from_above(bad, samples=1000)
        assert not rep.bounded and rep.constant > 1e8


class TestCertification:
    def test_endpoint_zero_transform(self, grad22, grad22_extremals):
        W = grad22.subspace
        rep = certify_main_inequality(ENDPOINT, W, TransformOp.zero(W), 0.5, 20_000, extremals=grad22_extremals)
        assert rep.certified
        assert set(rep.strata) == set(STRATA)
        assert sum(v["count"] for v in rep.strata.values()) == 20_000

    def test_endpoint_noncanceling_refuted(self, grad22, grad22_extremals, random_phi22):
        rep = certify_main_inequality(ENDPOINT, grad22.subspace, random_phi22, 0.5, 20_000,
                                      extremals=grad22_extremals)
        assert not rep.certified and rep.min_found < -1e-3
        w = ConfigPoint.from_dict(rep.witness)
        assert discrepancy(ENDPOINT, random_phi22, 0.5, w) == pytest.approx(rep.min_found, rel=1e-9)

    def test_subcritical_at_point_six(self, grad22, grad22_extremals, random_phi22):
        rep = certify_main_inequality(SUBCRITICAL, grad22.subspace, random_phi22, 0.6, 20_000,
                                      extremals=grad22_extremals)
        assert rep.certified

    def test_jobs_do_not_change_result(self, grad22, grad22_extremals, random_phi22):
        args = (ENDPOINT, grad22.subspace, random_phi22, 0.5, 8000)
        a = certify_main_inequality(*args, seed=5, jobs=1, chunk=2000, extremals=grad22_extremals)
        b = certify_main_inequality(*args, seed=5, jobs=3, chunk=2000, extremals=grad22_extremals)
        assert a.min_found == b.min_found

    def test_zero_budget(self, grad22):
        with pytest.raises(ConfigurationError):
            certify_main_inequality(ENDPOINT, grad22.subspace, TransformOp.zero(grad22.subspace), 0.5, 0)
        rep = search_constants("endpoint", grad22.subspace, TransformOp.zero(grad22.subspace), 0.5, 0)
        assert not rep.found and "zero budget" in rep.message

    def test_search_canceling(self, grad22, grad22_extremals):
        W = grad22.subspace
        rep = search_constants("endpoint", W, TransformOp.zero(W), 0.5, 10_000, extremals=grad22_extremals,
                               ladders=default_ladders("endpoint")[:3])
        assert rep.found and rep.constants == (1.0, 10.0, 100.0)

    def test_subcritical_below_threshold_fails(self, grad22, grad22_extremals, random_phi22):
        # -kappa'(1) / log m = 1/2 here, so alpha = 0.4 violates the hypothesis
        rep = search_constants("subcritical", grad22.subspace, random_phi22, 0.4, 3000,
                               extremals=grad22_extremals, ladders=default_ladders("subcritical")[-6:])
        assert not rep.found
        assert all(t["screen_min"] < 0 for t in rep.tried)
        assert "best minimum" in rep.message


class TestNearExtremal:
    def test_ratio_bounded_below(self, grad22, grad22_extremals):
        W = grad22.subspace
        rep = discrepancy_lower_bound_near_extremal(W, TransformOp.zero(W), 0.5, 1e3, grad22_extremals,
                                                    samples=2000)
        assert rep.used > 1000
        assert rep.min_ratio > 1.0
        assert rep.exact_extremal_discrepancy >= 0

    def test_needs_extremals(self, grad22):
        with pytest.raises(ConfigurationError):
            discrepancy_lower_bound_near_extremal(grad22.subspace, TransformOp.zero(grad22.subspace), 0.5, 1e3, [])
