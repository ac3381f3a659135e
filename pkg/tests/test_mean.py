
import numpy as np
import pytest
from scipy import optimize

from scarot.distance import d_psr, d_sr
from scarot.errors import EmptyInput, NoConvergenceWarning, UnsupportedDimension, UnsupportedStratum
from scarot.group import act, canonical_decomposition, enumerate_group
from scarot.inference import sample_model_2d
from scarot.manifold import EigenDecomp, d_so, random_rotation, rotation_2d, so_exp
from scarot.mean import (
    certify_sr_vs_psr,
    certify_stratum_avoidance,
    certify_uniqueness,
    f_psr,
    f_sr,
    frechet_mean_diag,
    frechet_mean_so,
    mean_orbit,
    minimize_fsr_lower,
    psr_mean,
    so_objective,
    so_objective_gradient,
)

from conftest import planar_spd, random_point, random_top_spd, spd

# Frozen from an independent oracle (grid of starts + Nelder-Mead over M(2),
# bounded scalar minimization over log c).
PLANAR_DATA = [planar_spd(0.3, np.log(6.0), np.log(1.5)), planar_spd(-0.2, np.log(4.0), np.log(2.0)),
               planar_spd(1.0, np.log(3.0), np.log(0.8))]
FPSR_MIN = 0.4694571632723263
FSR_LOWER_LOGC = 0.8586891427283259
FSR_LOWER_MIN = 0.8699095871070764


def _cluster(p, n, rng, spread=0.1, eigs=None):
    U0 = random_rotation(p, rng)
    eigs = np.linspace(2.0, 0.0, p) if eigs is None else np.asarray(eigs)
    out = []
    for _ in range(n):
        A = rng.standard_normal((p, p)) * spread
        U = so_exp(A - A.T) @ U0
        out.append(spd(U, np.exp(eigs + spread * rng.standard_normal(p))))
    return out


class TestDiagonalMean:
    def test_identical(self):
        np.testing.assert_allclose(frechet_mean_diag([[2.0, 3.0], [2.0, 3.0]]), [2.0, 3.0])

    def test_swapped(self):
        np.testing.assert_allclose(frechet_mean_diag([np.diag([4.0, 9.0]), np.diag([9.0, 4.0])]), [6.0, 6.0])

    def test_numeric_minimizer(self, rng):
        Ds = np.exp(rng.standard_normal((3, 3)))
        obj = lambda z: np.sum((np.log(Ds) - z) ** 2)
        res = optimize.minimize(obj, np.zeros(3), method="BFGS", options={"gtol": 1e-12})
        np.testing.assert_allclose(np.log(frechet_mean_diag(Ds)), res.x, atol=1e-7)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            frechet_mean_diag([])


class TestRotationMean:
    def test_identical(self, rng):
        U = random_rotation(3, rng)
        np.testing.assert_allclose(frechet_mean_so([U, U, U]), U, atol=1e-12)

    def test_symmetric_pair(self):
        th = 1.2
        np.testing.assert_allclose(frechet_mean_so([rotation_2d(-th), rotation_2d(th)]), np.eye(2), atol=1e-12)

    def test_cluster_stationary(self, rng):
        U0 = random_rotation(3, rng)
        Us = np.stack([so_exp(0.4 * (lambda A: A - A.T)(rng.standard_normal((3, 3)))) @ U0 for _ in range(15)])
        M = frechet_mean_so(Us, tol=1e-12)
        assert np.linalg.norm(so_objective_gradient(Us, M)) < 1e-9
        f = so_objective(Us, M)
        assert all(f <= so_objective(Us, U) for U in Us)

    def test_finite_difference_gradient(self, rng):
        Us = np.stack([random_rotation(3, rng) for _ in range(6)])
        U = random_rotation(3, rng)
        G = so_objective_gradient(Us, U)
        h = 1e-6
        worst = 0.0
        for _ in range(10):
            E = rng.standard_normal((3, 3))
            E = E - E.T
            fd = (so_objective(Us, so_exp(h * E) @ U) - so_objective(Us, so_exp(-h * E) @ U)) / (2 * h)
            worst = max(worst, abs(fd - np.sum(G * E)))
        assert worst < 1e-6

    def test_no_convergence_flag(self, rng):
        Us = [random_rotation(3, rng) for _ in range(5)]
        with pytest.warns(NoConvergenceWarning):
            frechet_mean_so(Us, tol=1e-30, max_iter=2)


class TestPsrMean:
    def test_single_observation(self, rng):
        X = random_top_spd(3, rng)
        res = psr_mean([X])
        assert res.objective == pytest.approx(0.0, abs=1e-20)
        np.testing.assert_allclose(res.mean.compose(), X, atol=1e-12)
        assert res.orbit_size == 24

    def test_rotation_bisector(self):
        th = 0.3
        D = np.diag([3.0, 1.0])
        Xs = [rotation_2d(s * th) @ D @ rotation_2d(s * th).T for s in (1, -1)]
        res = psr_mean(Xs)
        m = min(mean_orbit(res.mean), key=lambda e: d_so(e.U, np.eye(2)))
        np.testing.assert_allclose(m.U, np.eye(2), atol=1e-9)
        np.testing.assert_allclose(m.eigenvalues, [3.0, 1.0], atol=1e-9)

    def test_frozen_brute_force(self):
        res = psr_mean(PLANAR_DATA, multi_start=True)
        assert res.objective == pytest.approx(FPSR_MIN, abs=1e-9)

    def test_brute_force_small_samples(self, rng):
        # grid of starts in M(2), polished by Nelder-Mead
        for _ in range(3):
            Xs = [random_top_spd(2, rng) for _ in range(3)]
            obj = lambda z: f_psr(Xs, EigenDecomp(rotation_2d(z[0]), z[1:]))
            starts = [[t, a, b] for t in np.linspace(-np.pi, np.pi, 12, endpoint=False)
                      for a in (-1.0, 0.0, 1.0) for b in (-1.0, 0.0, 1.0)]
            z0 = min(starts, key=obj)
            brute = optimize.minimize(obj, z0, method="Nelder-Mead",
                                      options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 5000}).fun
            assert psr_mean(Xs, multi_start=True).objective <= brute + 1e-4

    def test_trace_monotone(self, rng):
        for p in (2, 3):
            Xs = [random_top_spd(p, rng) for _ in range(30)]
            tr = psr_mean(Xs).objective_trace
            assert all(b <= a + 1e-14 for a, b in zip(tr, tr[1:]))

    def test_orbit_invariance(self, rng):
        for p in (2, 3):
            Xs = [random_top_spd(p, rng) for _ in range(8)]
            m = random_point(p, rng)
            ref = f_psr(Xs, m)
            for h in enumerate_group(p):
                assert f_psr(Xs, act(h, m)) == pytest.approx(ref, abs=1e-12)
            assert len(mean_orbit(m)) == len(enumerate_group(p))

    def test_matched_fibers(self, rng):
        Xs = _cluster(3, 10, rng)
        res = psr_mean(Xs)
        for X, m in zip(Xs, res.matched_fibers):
            np.testing.assert_allclose(m.compose(), X, atol=1e-10)
        assert res.objective == pytest.approx(f_psr(Xs, res.mean), abs=1e-14)

    def test_mixed_strata(self, rng):
        Xs = _cluster(3, 6, rng) + [2.0 * np.eye(3), spd(random_rotation(3, rng), [3.0, 3.0, 1.0])]
        res = psr_mean(Xs)
        tr = res.objective_trace
        assert all(b <= a + 1e-14 for a, b in zip(tr, tr[1:]))
        assert res.converged

    def test_one_iteration_when_concentrated(self, rng):
        Xs = [planar_spd(0.02 * rng.standard_normal(), 1.0 + 0.02 * rng.standard_normal(),
                         -0.5 + 0.02 * rng.standard_normal()) for _ in range(10)]
        assert certify_uniqueness(Xs).holds
        res = psr_mean(Xs)
        assert res.settled_after == 1
        assert not any(res.selection_changes[1:])

    def test_multi_start_not_worse(self, rng):
        Xs = sample_model_2d(30, np.pi / 3, 1.0, 0.0, 0.2, seed=3)
        assert psr_mean(Xs, multi_start=True).objective <= psr_mean(Xs).objective + 1e-14

    def test_empty(self):
        with pytest.raises(EmptyInput):
            psr_mean([])

    def test_non_convergence_warns(self, rng):
        Xs = sample_model_2d(40, np.pi / 2, 0.5, 0.0, 0.3, seed=1)
        with pytest.warns(NoConvergenceWarning):
            res = psr_mean(Xs, max_outer=1)
        assert not res.converged


class TestSrObjective:
    def test_self(self, rng):
        X = random_top_spd(3, rng)
        assert f_sr([X], X) == pytest.approx(0.0, abs=1e-20)
        assert f_psr([X], canonical_decomposition(X)) == pytest.approx(0.0, abs=1e-20)

    def test_termwise(self, rng):
        Xs = [random_top_spd(3, rng) for _ in range(5)]
        S = random_top_spd(3, rng)
        assert f_sr(Xs, S) == pytest.approx(np.mean([d_sr(X, S).dist ** 2 for X in Xs]), abs=1e-12)
        m = random_point(3, rng)
        assert f_psr(Xs, m) == pytest.approx(np.mean([d_psr(X, m)[0] ** 2 for X in Xs]), abs=1e-12)

    def test_sr_below_psr(self, rng):
        Xs = [random_top_spd(2, rng) for _ in range(10)]
        for _ in range(20):
            m = random_point(2, rng)
            assert f_sr(Xs, m.compose()) <= f_psr(Xs, m) + 1e-12

    def test_lower_stratum_target(self, rng):
        Xs = [random_top_spd(3, rng) for _ in range(4)]
        S = 1.5 * np.eye(3)
        assert f_sr(Xs, S) == pytest.approx(np.mean([d_sr(X, S).dist ** 2 for X in Xs]))


class TestLowerStratum:
    def test_frozen_planar(self):
        S, val = minimize_fsr_lower(PLANAR_DATA)
        np.testing.assert_allclose(S, np.exp(FSR_LOWER_LOGC) * np.eye(2), rtol=1e-9)
        assert val == pytest.approx(FSR_LOWER_MIN, abs=1e-10)

    def test_planar_diagonal_data(self):
        a, b = 5.0, 0.5
        S, _ = minimize_fsr_lower([np.diag([a, b])])
        np.testing.assert_allclose(S, np.sqrt(a * b) * np.eye(2))

    def test_constant_scalar(self):
        S, val = minimize_fsr_lower([2.0 * np.eye(3)] * 3)
        np.testing.assert_allclose(S, 2.0 * np.eye(3))
        assert val == pytest.approx(0.0, abs=1e-20)

    def test_golden_oracle_planar(self, rng):
        Xs = [random_top_spd(2, rng) for _ in range(7)]
        res = optimize.minimize_scalar(lambda c: f_sr(Xs, np.exp(c) * np.eye(2)), bounds=(-10, 10),
                                       method="bounded", options={"xatol": 1e-10})
        S, val = minimize_fsr_lower(Xs)
        assert val <= res.fun + 1e-12
        assert np.log(S[0, 0]) == pytest.approx(res.x, abs=1e-6)

    def test_p3_finds_double_eigenvalue(self, rng):
        U = random_rotation(3, rng)
        Xs = [spd(so_exp(0.05 * (lambda A: A - A.T)(rng.standard_normal((3, 3)))) @ U,
                  np.exp([1.0, 0.02 * rng.standard_normal(), 0.02 * rng.standard_normal()]))
              for _ in range(12)]
        S, val = minimize_fsr_lower(Xs)
        w = np.sort(np.linalg.eigvalsh(S))
        assert w[1] == pytest.approx(w[0], rel=1e-10)
        assert val == pytest.approx(f_sr(Xs, S), abs=1e-10)
        c = np.mean([np.log(np.linalg.eigvalsh(X)) for X in Xs])
        assert val < f_sr(Xs, np.exp(c) * np.eye(3))

    def test_p4_rejected(self, rng):
        with pytest.raises(UnsupportedDimension):
            minimize_fsr_lower([random_top_spd(4, rng)])


class TestCertificates:
    def test_single_point(self, rng):
        X = random_top_spd(2, rng)
        res = psr_mean([X])
        c = certify_sr_vs_psr([X], res)
        assert c.kind == "sr_equals_psr" and c.holds
        assert c.witnesses["f_sr_psr_mean"] == pytest.approx(0.0, abs=1e-20)
        assert certify_uniqueness([X]).holds
        assert certify_stratum_avoidance([X], X).holds

    def test_tight_cluster_unique(self):
        Xs = [planar_spd(t, 1.0, 0.0) for t in np.linspace(0, np.pi / 16, 5)]
        c = certify_uniqueness(Xs)
        assert c.witnesses["diameter"] == pytest.approx(np.pi / 16)
        assert c.holds

    def test_toy_pair_not_unique(self):
        eps = 0.1
        X1 = np.diag([np.exp(eps / 2), np.exp(-eps / 2)])
        X2 = planar_spd(np.pi / 4, eps / 2, -eps / 2)
        c = certify_uniqueness([X1, X2])
        assert not c.holds
        assert c.witnesses["diameter"] == pytest.approx(np.pi / 4)
        assert c.witnesses["r_cx"] == pytest.approx(np.pi / 8)

    def test_uniqueness_needs_top(self):
        with pytest.raises(UnsupportedStratum):
            certify_uniqueness([np.eye(2), np.diag([2.0, 1.0])])

    def test_case_one_like(self):
        Xs = sample_model_2d(200, np.pi / 12, 2.0, 0.0, 0.2, seed=0)
        c = certify_sr_vs_psr(Xs, psr_mean(Xs))
        assert c.kind == "sr_equals_psr"
        assert c.holds == (c.witnesses["f_sr_psr_mean"] <= c.witnesses["f_sr_lower_min"])

    def test_case_two_like(self):
        Xs = sample_model_2d(200, np.pi / 3, 1.0, 0.0, 0.2, seed=0)
        c = certify_sr_vs_psr(Xs, psr_mean(Xs))
        assert c.kind == "sr_in_lower"
        assert c.witnesses["f_sr_lower_min"] < c.witnesses["f_sr_psr_mean"]

    def test_stratum_avoidance_case_one(self):
        Xs = sample_model_2d(50, np.pi / 24, 2.0, 0.0, 0.05, seed=0)
        c = certify_stratum_avoidance(Xs, np.diag([np.exp(2.0), 1.0]))
        assert c.witnesses["delta"] == pytest.approx(np.sqrt(2))
        assert c.holds == (c.witnesses["max_distance"] < c.witnesses["delta"] / 3)

    def test_scalar_matrix_never_avoids(self, rng):
        for _ in range(10):
            S0 = random_top_spd(2, rng)
            c = certify_stratum_avoidance([S0, 1.3 * np.eye(2)], S0)
            assert not c.holds
            assert c.witnesses["max_distance"] >= c.witnesses["delta"] - 1e-12

    def test_stratum_avoidance_needs_top(self):
        with pytest.raises(UnsupportedStratum):
            certify_stratum_avoidance([np.eye(2)], np.eye(2))

    def test_p3_certificate_note(self, rng):
        Xs = _cluster(3, 8, rng, eigs=[2.0, 1.0, 0.0])
        c = certify_sr_vs_psr(Xs, psr_mean(Xs))
        assert c.kind == "sr_equals_psr"
        assert "numeric" in c.note
