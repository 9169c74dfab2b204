import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from martrace.frostman import (frostman_measure_generator, frostman_sup, maximal_process, maximal_process_scan,
                               splitting_defect)
from martrace.tree import AtomPath, TreeMeasure, TreeShape


def random_measure(m, N, seed):
    rng = np.random.default_rng(seed)
    return TreeMeasure(TreeShape(m, N), rng.exponential(size=m**N) * rng.random() ** 2)


class TestFrostmanSup:
    @pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0])
    def test_uniform(self, alpha):
        assert frostman_sup(TreeMeasure.uniform(TreeShape(3, 4)), alpha) == pytest.approx(1.0)

    @pytest.mark.parametrize("m,N,alpha", [(2, 5, 0.5), (4, 3, 0.5), (3, 4, 0.25)])
    def test_point_mass(self, m, N, alpha):
        nu = TreeMeasure.point_mass(TreeShape(m, N), AtomPath((1,) * N))
        assert frostman_sup(nu, alpha) == pytest.approx(m ** ((1 - alpha) * N))

    def test_alpha_one_is_total_mass(self):
        nu = random_measure(3, 3, 1)
        assert frostman_sup(nu, 1.0) == pytest.approx(nu.total)

    @given(st.integers(2, 4), st.integers(0, 4), st.floats(0.01, 1.0), st.floats(0.1, 10.0), st.integers(0, 2**31))
    def test_homogeneous(self, m, N, alpha, c, seed):
        nu = random_measure(m, N, seed)
        scaled = TreeMeasure(nu.shape, c * nu.masses)
        assert frostman_sup(scaled, alpha) == pytest.approx(c * frostman_sup(nu, alpha), rel=1e-12)


class TestMaximalProcess:
    @given(st.integers(2, 4), st.integers(0, 4), st.floats(0.01, 1.0), st.integers(0, 2**31))
    def test_dp_matches_scan(self, m, N, alpha, seed):
        nu = random_measure(m, N, seed)
        proc = maximal_process(nu, alpha)
        for a, b in zip(proc.absolute, maximal_process_scan(nu, alpha)):
            np.testing.assert_allclose(a, b, rtol=1e-12)
        assert proc.root == pytest.approx(frostman_sup(nu, alpha), rel=1e-12)
        assert splitting_defect(proc, nu) <= 1e-15 * max(1.0, proc.root)

    def test_at(self):
        nu = TreeMeasure.point_mass(TreeShape(2, 2), AtomPath((2, 1)))
        proc = maximal_process(nu, 0.5)
        assert proc.at(AtomPath((2,))) == pytest.approx(2.0)
        assert proc.at(AtomPath((1,))) == 0.0
        assert proc.at(AtomPath((2,)), relative=True) == pytest.approx(2**0.5)

    def test_read_only(self):
        proc = maximal_process(random_measure(2, 2, 0), 0.5)
        with pytest.raises(ValueError):
            proc.absolute[0][0] = 1.0


class TestGenerator:
    @given(st.sampled_from([0.25, 0.5, 0.75, 1.0]), st.integers(0, 6), st.integers(0, 2**31),
           st.integers(2, 4))
    def test_frostman_and_probability(self, alpha, depth, seed, m):
        nu = frostman_measure_generator(alpha, depth, seed, m=m)
        assert nu.total == pytest.approx(1.0)
        assert 0.5 <= frostman_sup(nu, alpha) <= 1.0 + 1e-12
        for n in range(depth + 1):
            assert nu.level_masses(n).max() <= m ** ((alpha - 1) * n) * (1 + 1e-12)

    def test_reproducible(self):
        a = frostman_measure_generator(0.5, 5, 42)
        b = frostman_measure_generator(0.5, 5, 42)
        np.testing.assert_array_equal(a.masses, b.masses)
        c = frostman_measure_generator(0.5, 5, 43)
        assert not np.array_equal(a.masses, c.masses)

    def test_alpha_domain(self):
        with pytest.raises(ValueError):
            frostman_measure_generator(0.0, 3, 0)
