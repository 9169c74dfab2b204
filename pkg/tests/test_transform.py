import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from martrace.experiments import random_sobolev_martingale
from martrace.subspace import Subspace, TransformOp
from martrace.transform import (MembershipError, check_membership, hls_term_bound, hls_term_norm, hls_term_rhs,
                                i_alpha_partial, membership_residuals, point_mass_hls_ratio, project_to_sobolev)
from martrace.tree import AtomPath, SimpleMartingale, TreeError, TreeMeasure, TreeShape, measure_to_martingale


def random_phi(W, rng):
    return TransformOp(W, rng.standard_normal((W.m, W.size)))


class TestMembership:
    def test_sobolev_martingale_passes(self, grad22, rng):
        F = random_sobolev_martingale(grad22.subspace, 3, rng)
        check_membership(F, grad22.subspace)
        assert max(r.max() for r in membership_residuals(F, grad22.subspace)) < 1e-12

    def test_first_offender_reported(self, grad22, rng):
        W = grad22.subspace
        F = random_sobolev_martingale(W, 2, rng)
        leaves = F.leaves.copy()
        leaves[5, 0] += 1.0  # breaks the level-1 difference at atom (2,)
        leaves[4, 0] -= 1.0
        with pytest.raises(MembershipError) as exc:
            i_alpha_partial(SimpleMartingale.from_leaves(F.shape, leaves), random_phi(W, rng), 0.5)
        assert exc.value.atom == AtomPath((2,))

    def test_repair_mode(self, grad22, rng):
        W = grad22.subspace
        F = SimpleMartingale.from_leaves(TreeShape(4, 2, 4), rng.standard_normal((16, 4)))
        G = project_to_sobolev(F, W)
        check_membership(G, W)
        phi = random_phi(W, rng)
        a = i_alpha_partial(F, phi, 0.5, mode="repair").values
        np.testing.assert_allclose(a, i_alpha_partial(G, phi, 0.5).values, atol=1e-12)
        with pytest.raises(ValueError):
            i_alpha_partial(F, phi, 0.5, mode="lenient")

    def test_shape_mismatch(self, grad22):
        F = SimpleMartingale.constant(TreeShape(2, 1, 1), [0.0])
        with pytest.raises(TreeError):
            membership_residuals(F, grad22.subspace)


class TestFractionalIntegral:
    def test_single_step(self, grad22, rng):
        W = grad22.subspace
        w = W.random_element(rng)
        F = SimpleMartingale.from_leaves(TreeShape(4, 1, 4), np.ones(4) + w)
        phi = random_phi(W, rng)
        res = i_alpha_partial(F, phi, 0.5)
        np.testing.assert_allclose(res.values, phi.apply(w), atol=1e-12)
        np.testing.assert_array_equal(res.level_values(0), [0.0])

    def test_zero_and_constant(self, grad22, rng):
        W = grad22.subspace
        F = SimpleMartingale.constant(TreeShape(4, 3, 4), rng.standard_normal(4))
        res = i_alpha_partial(F, random_phi(W, rng), 0.5)
        assert np.abs(res.values).max() < 1e-15 and res.leaf_values().size == 64

    def test_weights(self, rng):
        # full space m = 2: two levels, the second term carries m^{-alpha}
        W = Subspace.full(2, 1)
        phi = TransformOp(W, np.array([[1.0, 0.0], [0.0, 1.0]]))
        F = SimpleMartingale.from_leaves(TreeShape(2, 2, 1), np.array([3.0, 1.0, -1.0, -3.0]))
        res = i_alpha_partial(F, phi, 0.5)
        # dF_1 = (2, -2) -> phi = (2, -2); dF_2 = (1, -1) on both -> (1, -1) / sqrt 2
        s = 2**-0.5
        np.testing.assert_allclose(res.values, [2 + s, 2 - s, -2 + s, -2 - s])

    @given(st.integers(0, 2**31))
    def test_partial_sums_are_a_martingale(self, seed):
        rng = np.random.default_rng(seed)
        W = Subspace.full(3, 2)
        F = random_sobolev_martingale(W, 4, rng)
        res = i_alpha_partial(F, random_phi(W, rng), 0.7)
        for n in range(4):
            kids = res.level_values(n + 1).reshape(-1, 3).mean(axis=1)
            np.testing.assert_allclose(kids, res.level_values(n), atol=1e-11)
        np.testing.assert_array_equal(res.level_values(4), res.values)
        with pytest.raises(TreeError):
            res.level_values(5)

    def test_linearity(self, rng):
        W = Subspace.full(3, 2)
        F, G = random_sobolev_martingale(W, 3, rng), random_sobolev_martingale(W, 3, rng)
        phi = random_phi(W, rng)
        lhs = i_alpha_partial(F + G.scaled(-2.0), phi, 0.4).values
        rhs = i_alpha_partial(F, phi, 0.4).values - 2 * i_alpha_partial(G, phi, 0.4).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-11)

    def test_truncated_level(self, rng):
        W = Subspace.full(2, 1)
        F = random_sobolev_martingale(W, 4, rng)
        phi = random_phi(W, rng)
        res = i_alpha_partial(F, phi, 0.5, N=2)
        np.testing.assert_allclose(res.values, i_alpha_partial(F, phi, 0.5).level_values(2))
        assert res.leaf_values().size == 16


class TestHLS:
    @pytest.mark.parametrize("m,q", [(2, 1.0), (2, 2.0), (4, 1.5), (4, 3.0), (3, 2.0)])
    def test_point_mass_closed_form(self, m, q):
        N = 5
        nu = TreeMeasure.point_mass(TreeShape(m, N), AtomPath((1,) * N))
        F = measure_to_martingale(nu)
        for n in (1, 3, 5):
            ratio = hls_term_norm(F, q, n) / hls_term_rhs(F, q, n)
            assert ratio == pytest.approx(point_mass_hls_ratio(m, q), rel=1e-12)
            assert hls_term_bound(F, 0.5, q, n)

    @given(st.integers(0, 2**31), st.floats(1.0, 4.0), st.integers(1, 6))
    def test_random_martingales(self, seed, q, depth):
        rng = np.random.default_rng(seed)
        F = SimpleMartingale.from_leaves(TreeShape(4, depth, 2), rng.standard_cauchy((4**depth, 2)))
        n = int(rng.integers(1, depth + 1))
        assert hls_term_bound(F, 0.5, q, n)

    def test_domain(self, rng):
        F = SimpleMartingale.from_leaves(TreeShape(2, 2, 1), rng.standard_normal(4))
        with pytest.raises(TreeError):
            hls_term_norm(F, 2.0, 0)
        with pytest.raises(ValueError):
            hls_term_bound(F, 0.5, 0.5, 1)
