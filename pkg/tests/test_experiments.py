import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from martrace.experiments import (ExperimentError, blowup_probe, blowup_tree_ratio, elementary_increments,
                                  empirical_trace_constant, expected_abs_sum, expected_abs_sum_enumeration,
                                  extremal_martingale, frostman_necessity_probe, random_sobolev_martingale,
                                  rank_one_witness_operator, support_values, trace_ratio)
from martrace.frostman import frostman_measure_generator, frostman_sup
from martrace.groupfourier import kernel_phi, project_onto_cancellation, random_kernel
from martrace.subspace import Subspace, TransformOp
from martrace.transform import check_membership
from martrace.tree import AtomPath, TreeMeasure, TreeShape


def witness(gs, ev, u):
    return rank_one_witness_operator(gs.subspace, ev, u).normalized()


class TestExtremalMartingale:
    @pytest.mark.parametrize("N", [0, 1, 3])
    def test_structure(self, div42, div42_extremals, N):
        ev = div42_extremals[5]
        F, nu = extremal_martingale(ev, N=N)
        check_membership(F, div42.subspace)
        h = len(ev.support)
        assert np.count_nonzero(np.linalg.norm(F.leaves, axis=1)) == h**N
        assert F.l1_norm() == pytest.approx(np.linalg.norm(ev.a))
        assert nu.total == pytest.approx(1.0)
        assert frostman_sup(nu, 0.5) == pytest.approx(1.0)

    def test_differences_are_rank_one(self, grad22_extremals):
        ev = grad22_extremals[0]
        F, _ = extremal_martingale(ev, N=2)
        root = F.martingale_difference(AtomPath(()))
        np.testing.assert_allclose(root, np.outer(ev.v, ev.a), atol=1e-14)

    def test_witness_operator(self, grad22, grad22_extremals):
        ev = grad22_extremals[1]
        u = np.array([2.0, 0.0, -1.0, -1.0])
        phi = rank_one_witness_operator(grad22.subspace, ev, u)
        np.testing.assert_allclose(phi.apply(np.outer(ev.v, ev.a)), u - u.mean(), atol=1e-12)


class TestExactSums:
    @given(st.integers(1, 10), st.integers(0, 2**31))
    def test_multinomial_matches_enumeration_two_values(self, N, seed):
        xi = np.random.default_rng(seed).standard_normal(2)
        assert expected_abs_sum(xi, N) == pytest.approx(expected_abs_sum_enumeration(xi, N), rel=1e-10)

    @given(st.integers(1, 7), st.integers(0, 2**31))
    def test_multinomial_matches_enumeration_four_values(self, N, seed):
        xi = np.random.default_rng(seed).standard_normal(4)
        assert expected_abs_sum(xi, N) == pytest.approx(expected_abs_sum_enumeration(xi, N), rel=1e-10)

    def test_simple_walk(self):
        # E|S_N| for a +-1 walk, N = 4: (2 * 4 + 8 * 2 + 6 * 0) / 16 = 1.5
        assert expected_abs_sum([1.0, -1.0], 4) == pytest.approx(1.5)
        assert expected_abs_sum([1.0, -1.0], 0) == 0.0

    def test_tree_route_matches(self, div42, div42_extremals):
        ev = div42_extremals[0]
        u = np.array([0.0] * 16)
        u[list(np.flatnonzero(ev.mask))] = [1.0, -1.0, 2.0, -2.0]
        phi = witness(div42, ev, u)
        for N in (1, 2, 3):
            direct = blowup_probe(div42.subspace, phi, 0.5, [N], ev).ratios[0]
            assert blowup_tree_ratio(phi, ev, N) == pytest.approx(direct, rel=1e-10)


class TestBlowup:
    def test_mean_zero_sqrt_growth(self, div42, div42_extremals):
        ev = div42_extremals[0]
        u = np.zeros(16)
        u[np.flatnonzero(ev.mask)] = [1.0, -1.0, 2.0, -2.0]
        rep = blowup_probe(div42.subspace, witness(div42, ev, u), 0.5, [16, 32, 64], ev)
        assert abs(rep.mean) < 1e-12
        assert 0.35 <= rep.slope <= 0.65

    def test_mean_nonzero_linear_growth(self, div42, div42_extremals, rng):
        ev = div42_extremals[0]
        phi = kernel_phi(div42, random_kernel(4, 2, rng)).normalized()
        rep = blowup_probe(div42.subspace, phi, 0.5, [16, 32, 64], ev)
        assert abs(rep.mean) > 1e-6
        assert rep.slope == pytest.approx(1.0, abs=1e-9)

    def test_canceling_vanishes(self, div42, div42_extremals, rng):
        phi = kernel_phi(div42, project_onto_cancellation(random_kernel(4, 2, rng), "div")).normalized()
        for ev in div42_extremals:
            rep = blowup_probe(div42.subspace, phi, 0.5, [16, 32, 64], ev)
            assert rep.ratios == [0.0, 0.0, 0.0] and rep.slope is None

    def test_translation_invariant_values_constant_on_support(self, div42, div42_extremals, rng):
        phi = kernel_phi(div42, random_kernel(4, 2, rng))
        for ev in div42_extremals[:4]:
            xi = support_values(phi, ev)
            np.testing.assert_allclose(xi, xi[0], atol=1e-10)

    def test_csv(self, grad22, grad22_extremals):
        ev = grad22_extremals[0]
        rep = blowup_probe(grad22.subspace, witness(grad22, ev, [1.0, -1.0, 0.0, 0.0]), 0.5, [2, 4], ev)
        lines = rep.to_csv().splitlines()
        assert lines[0] == "N,ratio" and len(lines) == 3
        assert rep.as_dict()["ns"] == [2, 4]

    def test_not_geometric(self, rng):
        W = Subspace.from_spanning(4, 3, rng.standard_normal((1, 4, 3)))
        with pytest.raises(ExperimentError):
            blowup_probe(W, TransformOp.zero(W), 0.5, [4])


class TestFrostmanProbe:
    def test_point_mass_growth(self, rng):
        W = Subspace.full(2, 1)
        phi = TransformOp(W, np.eye(2))
        sups, best = [], []
        for N in (2, 4, 6):
            nu = TreeMeasure.point_mass(TreeShape(2, N), AtomPath((1,) * N))
            rep = frostman_necessity_probe(phi, 0.5, nu)
            assert rep.applicable
            assert rep.best_ratio >= rep.constant * rep.frostman_sup * (1 - 1e-12)
            best.append(rep.best_ratio)
            sups.append(rep.frostman_sup)
        np.testing.assert_allclose(np.diff(np.log(best)), 2 * math.log(2) * 0.5, rtol=1e-12)
        np.testing.assert_allclose(np.diff(np.log(sups)), 2 * math.log(2) * 0.5, rtol=1e-12)

    def test_frostman_measure_bounded(self):
        W = Subspace.full(4, 1)
        phi = TransformOp(W, np.eye(4))
        rep = frostman_necessity_probe(phi, 0.5, frostman_measure_generator(0.5, 5, 0, m=4))
        # nu(kid) <= m^{(alpha-1)(n+1)}, so every ratio is at most m^{alpha-1} max_j sum_k P_jk
        w = elementary_increments(phi).reshape(4, -1)
        P = np.abs(phi.effective @ w.T).T / np.linalg.norm(w.reshape(4, 4, 1), axis=2).mean(axis=1)[:, None]
        assert rep.best_ratio <= 4**-0.5 * P.sum(axis=1).max() * (1 + 1e-12)
        assert rep.frostman_sup <= 1 + 1e-12

    def test_degenerate(self, grad22):
        rep = frostman_necessity_probe(TransformOp.zero(grad22.subspace), 0.5, TreeMeasure.uniform(TreeShape(4, 2)))
        assert not rep.applicable and "degenerate" in rep.note
        assert elementary_increments(TransformOp.zero(grad22.subspace)) is None


class TestTraceConstants:
    def test_zero_transform(self, grad22):
        rep = empirical_trace_constant(grad22.subspace, TransformOp.zero(grad22.subspace), 0.5, trials=20)
        assert rep.max_ratio == 0.0

    def test_reproducible_and_sandwiched(self, grad22, rng):
        W = grad22.subspace
        phi = kernel_phi(grad22, random_kernel(2, 2, rng)).normalized()
        a = empirical_trace_constant(W, phi, 0.6, trials=30, seed=4, certified_bound=1e3 + 1e6)
        b = empirical_trace_constant(W, phi, 0.6, trials=30, seed=4)
        assert a.max_ratio == b.max_ratio > 0
        assert a.sandwich

    def test_ratio_definition(self, grad22, rng):
        W = grad22.subspace
        F = random_sobolev_martingale(W, 3, rng)
        F = F.scaled(3.0)
        nu = frostman_measure_generator(0.5, 3, 2, m=4)
        phi = kernel_phi(grad22, random_kernel(2, 2, rng))
        r1 = trace_ratio(F, nu, phi, 0.5)
        assert trace_ratio(F.scaled(-2.0), nu, phi, 0.5) == pytest.approx(r1, rel=1e-12)
