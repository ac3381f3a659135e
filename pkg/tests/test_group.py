import itertools

import numpy as np
import pytest

from scarot.errors import BadParameter, DimensionTooLarge, NotPositiveDefinite, UnsupportedStratum
from scarot.group import (
    SignedPerm,
    act,
    beta_g,
    block_coset_reps,
    canonical_decomposition,
    classify_stratum,
    enumerate_group,
    fiber_of,
    group_arrays,
    plane_rotation,
    r_cx,
)
from scarot.manifold import EigenDecomp, d_m, rotation_angle

from conftest import random_point, random_top_spd, spd


def _as_key(H):
    return tuple(np.rint(H).astype(int).ravel())


class TestEnumeration:
    @pytest.mark.parametrize("p, size", [(2, 4), (3, 24), (4, 192), (5, 1920)])
    def test_order(self, p, size):
        G = enumerate_group(p)
        assert len(G) == size
        assert len({_as_key(h.matrix) for h in G}) == size

    def test_identity_first(self):
        assert enumerate_group(3)[0].is_identity()

    @pytest.mark.parametrize("p", [2, 3])
    def test_group_axioms(self, p, rng):
        H = group_arrays(p)[0]
        keys = {_as_key(h) for h in H}
        for a, b in itertools.product(H, repeat=2):
            assert _as_key(a @ b) in keys
        for a in H:
            assert _as_key(a.T) in keys
            assert np.linalg.det(a) == pytest.approx(1.0)
        for _ in range(50):
            a, b, c = H[rng.integers(len(H), size=3)]
            np.testing.assert_array_equal((a @ b) @ c, a @ (b @ c))

    def test_matmul_and_inverse(self):
        for h in enumerate_group(3):
            assert (h @ h.inverse()).is_identity()

    def test_cap(self):
        with pytest.raises(DimensionTooLarge):
            enumerate_group(6)
        with pytest.raises(DimensionTooLarge):
            beta_g(7)

    def test_odd_element_rejected(self):
        with pytest.raises(BadParameter):
            SignedPerm((1, 0), (1, 1))


class TestAction:
    def test_identity(self, rng):
        m = random_point(3, rng)
        out = act(SignedPerm.identity(3), m)
        np.testing.assert_array_equal(out.U, m.U)
        np.testing.assert_array_equal(out.log_d, m.log_d)

    def test_planar_swap(self):
        h = SignedPerm.from_matrix([[0, 1], [-1, 0]])
        out = act(h, EigenDecomp.from_diag(np.eye(2), [8.0, 3.0]))
        np.testing.assert_allclose(out.U, [[0.0, -1.0], [1.0, 0.0]])
        np.testing.assert_allclose(out.eigenvalues, [3.0, 8.0])
        np.testing.assert_allclose(out.compose(), np.diag([8.0, 3.0]), atol=1e-14)

    @pytest.mark.parametrize("p", [2, 3])
    def test_fiber_invariance(self, p, rng):
        m = random_point(p, rng)
        X = m.compose()
        for h in enumerate_group(p):
            np.testing.assert_allclose(act(h, m).compose(), X, atol=1e-12)

    @pytest.mark.parametrize("p", [2, 3])
    def test_orbit_separation(self, p, rng):
        for k in (0.5, 1.0, 4.0):
            m = random_point(p, rng)
            bound = np.sqrt(k) * beta_g(p)
            for h in enumerate_group(p)[1:]:
                assert d_m(m, act(h, m), k) >= bound - 1e-12


class TestBeta:
    def test_small_dimensions(self):
        assert beta_g(2) == pytest.approx(np.pi / 2, abs=1e-15)
        assert beta_g(3) == pytest.approx(np.pi / 2, abs=1e-15)

    def test_four_is_bounded(self):
        assert beta_g(4) <= np.pi / 2 + 1e-15
        H = group_arrays(4)[0][1:]
        assert beta_g(4) == pytest.approx(float(np.min(rotation_angle(H))))

    def test_radius(self):
        assert r_cx(2, 1.0) == pytest.approx(np.pi / 8)
        assert r_cx(3, 4.0) == pytest.approx(np.pi / 4)
        assert r_cx(3, 8.0) == pytest.approx(2 * r_cx(3, 2.0))


class TestStrata:
    def test_top(self):
        s = classify_stratum(np.diag([8.0, 3.0]))
        assert s.tag == "top"
        assert s.partition == ((0,), (1,))

    def test_bottom(self):
        assert classify_stratum(5 * np.eye(3)).tag == "bottom"

    def test_lower_pattern(self):
        s = classify_stratum(np.diag([2.0, 2.0, 7.0]))
        assert s.tag == "lower"
        assert sorted(s.multiplicities) == [1, 2]
        # positions refer to the descending eigenvalue list (7, 2, 2)
        assert s.partition == ((0,), (1, 2))

    def test_tolerance_groups_near_ties(self):
        X = np.diag([2.0, 2.0 * np.exp(5e-9), 7.0])
        assert classify_stratum(X).tag == "lower"
        assert classify_stratum(X, eps_strat=1e-10).tag == "top"

    @pytest.mark.parametrize("bad", [np.diag([1.0, -1.0]), np.array([[1.0, 2.0], [0.0, 1.0]]), np.ones((2, 3))])
    def test_rejects_non_spd(self, bad):
        with pytest.raises(NotPositiveDefinite):
            classify_stratum(bad)


class TestFiber:
    def test_planar_count(self):
        f = fiber_of(np.diag([8.0, 3.0]))
        assert f.kind == "finite"
        assert len(f.representatives) == 4

    def test_recomposition_p3(self, rng):
        X = random_top_spd(3, rng)
        reps = fiber_of(X).representatives
        assert len(reps) == 24
        for m in reps:
            np.testing.assert_allclose(m.compose(), X, atol=1e-12)
        pairs = [d_m(a, b) for a, b in itertools.combinations(reps, 2)]
        assert min(pairs) >= np.pi / 2 - 1e-12

    def test_bottom_is_parametric(self):
        f = fiber_of(2.0 * np.eye(3))
        assert f.kind == "parametric"
        assert f.tag == "bottom"
        assert f.subgroup_dim == 3
        np.testing.assert_allclose(f.base.eigenvalues, [2.0] * 3)

    def test_double_eigenvalue_circle(self, rng):
        U = random_point(3, rng).U
        X = spd(U, [3.0, 3.0, 1.0])
        f = fiber_of(X)
        assert f.subgroup_dim == 1
        assert f.block == (0, 1)
        for h in enumerate_group(3)[:6]:
            for t in (0.0, 1.0, 2.5):
                m = f.element(h, plane_rotation(3, *f.block, t))
                np.testing.assert_allclose(m.compose(), X, atol=1e-12)

    def test_coset_representatives(self):
        for block in ((0, 1), (1, 2), (0, 2)):
            reps = block_coset_reps(3, block)
            assert len(reps) == 6
            H = group_arrays(3)[0]
            (single,) = set(range(3)) - set(block)
            # two representatives differ by an element outside the circle subgroup
            for a, b in itertools.combinations(reps, 2):
                g = H[a].T @ H[b]
                assert not (abs(g[single, single] - 1.0) < 1e-12)

    def test_unsupported_p4_lower(self):
        with pytest.raises(UnsupportedStratum):
            fiber_of(np.diag([1.0, 1.0, 2.0, 3.0]))

    def test_bottom_p4_allowed(self):
        assert fiber_of(np.eye(4)).tag == "bottom"

    def test_canonical_decomposition(self, rng):
        X = random_top_spd(3, rng)
        m = canonical_decomposition(X)
        assert np.all(np.diff(m.log_d) < 0)
        assert np.linalg.det(m.U) == pytest.approx(1.0)
        np.testing.assert_allclose(m.compose(), X, atol=1e-12)
