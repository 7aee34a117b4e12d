"""Tests for direct, scaled, Fisher-distance, prior-aware ML and general-axes estimators."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blochtomo.axes import AxisSet, cartesian
from blochtomo.core import DomainError
from blochtomo.data import CountRecord, outcome_array
from blochtomo.estimators import (OK, BranchCutError, Status, direct_inversion, direct_vectors,
                                  fisher_batch, fisher_distance, fisher_minimizer, general_axes_batch,
                                  general_axes_mle, kl_divergence, mle, mle_batch, mle_ridge,
                                  ridge_component, scaled_batch, scaled_direct_inversion)
from blochtomo.priors import bures, chernoff, gaussian, hs, pure, with_entropy

FIG1 = CountRecord(29, 1, 25, 5, 15, 15)
FIG2 = CountRecord(26, 4, 23, 7, 15, 15)
PRIORS = [hs(), bures(), pure(), chernoff(), gaussian(3.0), with_entropy(hs()), with_entropy(bures())]

small_counts = st.lists(st.integers(0, 12), min_size=6, max_size=6).filter(
    lambda v: all(v[i] + v[i + 1] > 0 for i in (0, 2, 4)))


def _random_records(n, seed, total=30):
    rng = np.random.default_rng(seed)
    ups = rng.integers(0, total + 1, size=(n, 3))
    c = np.empty((n, 6))
    c[:, 0::2] = ups
    c[:, 1::2] = total - ups
    return c


class TestRidgeComponent:
    """The piecewise root u x**3 - (1 + u) x + t = 0."""

    def test_identity_at_zero(self):
        t = np.linspace(-1, 1, 11)
        assert ridge_component(0.0, t) == pytest.approx(t)

    def test_limits(self):
        assert ridge_component(np.inf, 0.7) == 0.0
        assert ridge_component(-np.inf, 0.3) == 1.0
        assert ridge_component(-np.inf, -0.3) == -1.0

    @pytest.mark.parametrize("u", [-50.0, -1.0000001, -1.0, -0.9999999, -0.5, 0.3, 0.5])
    def test_unit_fixed_points(self, u):
        """t = +-1 is a fixed point of the continuous branch while u <= 1/2."""
        assert ridge_component(u, 1.0) == pytest.approx(1.0, abs=1e-9)
        assert ridge_component(u, -1.0) == pytest.approx(-1.0, abs=1e-9)

    def test_cubic_residual(self):
        u = np.concatenate([np.linspace(-30, -1.01, 50), np.linspace(-0.99, 30, 50), [-1 - 1e-8, -1 + 1e-8]])
        t = np.linspace(-0.97, 0.98, len(u))
        x = ridge_component(u, t)
        assert np.max(np.abs(u * x ** 3 - (1 + u) * x + t)) < 1e-12

    def test_continuity_across_minus_one(self):
        t = 0.4
        vals = ridge_component(np.array([-1 - 1e-5, -1 - 1e-7, -1.0, -1 + 1e-7, -1 + 1e-5]), t)
        assert np.ptp(vals) < 1e-5
        assert vals[2] == pytest.approx(np.cbrt(t))

    def test_large_u_shrinks_pinned_component(self):
        """Beyond u = 1/2 the branch through t = 1 is the smaller root (sqrt(1 + 4/u) - 1) / 2."""
        assert ridge_component(40.0, 1.0) == pytest.approx((math.sqrt(1 + 4 / 40) - 1) / 2)

    def test_odd_in_t(self):
        u = np.array([-3.0, -0.4, 2.0])
        assert ridge_component(u, -0.35) == pytest.approx(-ridge_component(u, 0.35))

    def test_branch_cut_detected(self):
        with pytest.raises(BranchCutError):
            mle_ridge(CountRecord(5, 5, 9, 1, 8, 2), -20.0)


class TestRidgeCurve:
    def test_alpha_zero_is_direct(self):
        assert mle_ridge(FIG1, 0.0).as_array() == pytest.approx([14 / 15, 2 / 3, 0])

    def test_norm_monotone_in_alpha(self):
        """|r(alpha)| is non-increasing over alpha in [-1e3, 1e3] for 100 random records."""
        c = _random_records(100, seed=5)
        c = c[np.all(direct_vectors(c)[0] != 0, axis=1)]
        alphas = np.concatenate([-np.logspace(3, -3, 200), [0.0], np.logspace(-3, 3, 200)])
        for row in c:
            rec = CountRecord.from_sequence(row.astype(int))
            norms = np.array([mle_ridge(rec, a).norm for a in alphas])
            assert np.all(np.diff(norms) <= 1e-12)


class TestDirectAndScaled:
    def test_reference_record_direct_exact(self):
        r = direct_inversion(FIG1).vector
        assert (r.x, r.y, r.z) == (14 / 15, 2 / 3, 0.0)

    def test_reference_record_scaled(self):
        assert scaled_direct_inversion(FIG1).vector.as_array() == pytest.approx([0.81373, 0.58124, 0], abs=5e-5)

    def test_eta_divides(self):
        assert direct_inversion(FIG2, eta=0.8).vector.as_array() == pytest.approx([0.7333 / 0.8, 0.5333 / 0.8, 0],
                                                                                   abs=1e-4)

    def test_missing_axis(self):
        with pytest.raises(DomainError):
            direct_inversion(CountRecord(1, 1, 0, 0, 1, 1))


class TestDivergences:
    def test_fisher_unit_example(self):
        """One binomial error bar along x costs exactly one half."""
        c = CountRecord(15, 15, 15, 15, 15, 15)
        assert fisher_distance(c, (1 / math.sqrt(30), 0, 0)) == pytest.approx(0.5)

    def test_fisher_pinned(self):
        c = CountRecord(30, 0, 15, 15, 15, 15)
        assert fisher_distance(c, (1, 0.1, 0)) == pytest.approx(0.5 * 0.1 ** 2 * 30)
        assert fisher_distance(c, (0.9, 0, 0)) == math.inf

    def test_kl_cubic_agreement(self):
        """KL minus its quadratic approximation shrinks by at least 800 per decade of displacement."""
        t = np.array([11 / 15, 8 / 15, 0.0])
        rng = np.random.default_rng(12)
        for _ in range(5):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            diffs = [abs(kl_divergence(FIG2, t + e * d) - fisher_distance(FIG2, t + e * d)) for e in (1e-1, 1e-2, 1e-3)]
            assert diffs[0] / diffs[1] >= 800
            assert diffs[1] / diffs[2] >= 800

    def test_kl_zero_at_direct(self):
        assert kl_divergence(FIG1, (14 / 15, 2 / 3, 0)) == pytest.approx(0.0, abs=1e-12)


class TestFisherMinimizer:
    def test_reference_record(self):
        assert fisher_minimizer(FIG1).vector.as_array() == pytest.approx([0.86619, 0.49971, 0], abs=5e-5)

    def test_reference_record_on_sphere(self):
        assert fisher_minimizer(FIG1).vector.norm == pytest.approx(1.0, abs=1e-12)

    def test_no_solution(self):
        """Two pinned axes with |t| > 1 leave no point of the ball at finite distance."""
        est = fisher_minimizer(CountRecord(30, 0, 30, 0, 15, 15))
        assert est.status is Status.FAILED_NO_SOLUTION
        assert not est.ok
        assert math.isnan(est.vector.x)

    def test_pinned_norm_one_limit(self):
        est = fisher_minimizer(CountRecord(30, 0, 20, 10, 12, 18))
        assert est.ok
        assert est.vector.as_array() == pytest.approx([1.0, 0.0, 0.0])
        assert est.alpha == math.inf

    def test_inside_is_direct(self):
        assert fisher_minimizer(FIG2).vector.as_array() == pytest.approx([11 / 15, 8 / 15, 0])


class TestMLE:
    def test_reference_record_hs(self):
        est = mle(FIG1, hs())
        assert est.vector.as_array() == pytest.approx([0.84795, 0.53008, 0], abs=5e-5)
        assert est.diagnostics["prior_class"] == "uniform"

    @pytest.mark.parametrize("prior,expected", [
        (with_entropy(hs()), (0.800, 0.494)),
        (with_entropy(bures()), (0.827, 0.513)),
        (with_entropy(chernoff()), (0.832, 0.517)),
    ])
    def test_reference_record_entropy_weighted(self, prior, expected):
        est = mle(FIG1, prior)
        assert est.vector.as_array()[:2] == pytest.approx(expected, abs=5e-4)

    def test_pure_prior_unit_norm_or_failure(self):
        r, status, _, _ = mle_batch(outcome_array(8, 8, 8).astype(float), pure())
        ok = status == OK
        assert np.linalg.norm(r[ok], axis=1) == pytest.approx(np.ones(ok.sum()), abs=1e-12)
        assert np.all(np.isnan(r[~ok]))
        assert np.any(~ok)

    def test_pure_fails_with_two_zero_means(self):
        est = mle(CountRecord(15, 15, 15, 15, 20, 10), pure())
        assert est.status is Status.FAILED_NOT_UNIQUE

    def test_hs_inside_is_direct(self):
        assert mle(FIG2, hs()).vector.as_array() == pytest.approx([11 / 15, 8 / 15, 0])

    def test_eta_scaling(self):
        """With noise the search runs in the ball of radius eta, reported in platonic units."""
        est = mle(FIG1, hs(), eta=0.9)
        assert est.vector.norm == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("prior", PRIORS, ids=lambda p: p.name)
    def test_physical(self, prior):
        r, status, _, _ = mle_batch(_random_records(300, seed=2), prior)
        ok = status == OK
        assert np.all(np.linalg.norm(r[ok], axis=1) <= 1 + 1e-12)


class TestCoincidence:
    def test_inside_ball_all_agree(self):
        """Scaled inversion, flat-prior MLE and the Fisher minimiser equal r_d inside the ball."""
        c = outcome_array(30, 30, 30).astype(float)
        t = direct_vectors(c)[0]
        inside = np.linalg.norm(t, axis=1) < 1
        assert inside.sum() > 10000
        ci = c[inside]
        s = scaled_batch(ci)[0]
        f = fisher_batch(ci)[0]
        m = mle_batch(ci, hs())[0]
        for r in (s, f, m):
            assert np.max(np.abs(r - t[inside])) == 0.0


class TestEquivariance:
    @pytest.mark.parametrize("prior", PRIORS, ids=lambda p: p.name)
    def test_permutation_and_flip(self, prior):
        c = _random_records(40, seed=9)
        r0 = mle_batch(c, prior, reduce=False)[0]
        perm = [2, 0, 1]
        cp = c.reshape(-1, 3, 2)[:, perm, :].reshape(-1, 6)
        assert np.allclose(mle_batch(cp, prior, reduce=False)[0], r0[:, perm], atol=1e-9, equal_nan=True)
        cf = c.copy()
        cf[:, [2, 3]] = cf[:, [3, 2]]
        rf = mle_batch(cf, prior, reduce=False)[0]
        assert np.allclose(rf, r0 * [1, -1, 1], atol=1e-9, equal_nan=True)

    @pytest.mark.parametrize("prior", PRIORS, ids=lambda p: p.name)
    def test_canonical_reduction(self, prior):
        c = outcome_array(6, 6, 6).astype(float)
        a = mle_batch(c, prior)
        b = mle_batch(c, prior, reduce=False)
        assert np.array_equal(a[1], b[1])
        assert np.allclose(a[0], b[0], atol=1e-7, equal_nan=True)

    def test_fisher_flip(self):
        c = _random_records(40, seed=4)
        cf = c.copy()
        cf[:, [0, 1]] = cf[:, [1, 0]]
        assert np.allclose(fisher_batch(cf)[0], fisher_batch(c)[0] * [-1, 1, 1], equal_nan=True)

    @settings(max_examples=40, deadline=None)
    @given(small_counts)
    def test_mle_property(self, vals):
        rec = CountRecord(*vals)
        est = mle(rec, hs())
        assert est.ok
        assert est.vector.norm <= 1 + 1e-12
        flipped = CountRecord(vals[1], vals[0], *vals[2:])
        assert mle(flipped, hs()).vector.x == pytest.approx(-est.vector.x, abs=1e-9)


class TestGeneralAxes:
    def test_cartesian_agrees(self):
        est = general_axes_mle(cartesian(), [(29, 1), (25, 5), (15, 15)])
        assert est.vector.as_array() == pytest.approx(mle(FIG1, hs()).vector.as_array(), abs=1e-8)

    def test_newton_matches_fast_path(self):
        """A dummy unmeasured fourth axis forces the general solver."""
        A = np.vstack([np.eye(3), [[0.6, 0.8, 0.0]]])
        c = _random_records(50, seed=3)
        up4 = np.column_stack([c[:, 0::2], np.zeros(50)])
        down4 = np.column_stack([c[:, 1::2], np.zeros(50)])
        slow, st_slow = general_axes_batch(A, up4, down4)
        fast, st_fast = general_axes_batch(np.eye(3), c[:, 0::2], c[:, 1::2])
        assert np.all(st_slow == OK) and np.all(st_fast == OK)
        assert np.max(np.abs(slow - fast)) < 1e-7

    def test_reference_record_general_solver(self):
        A = np.vstack([np.eye(3), [[0.0, 0.6, 0.8]]])
        r, status = general_axes_batch(A, np.array([[29, 25, 15, 0.0]]), np.array([[1, 5, 15, 0.0]]))
        assert r[0] == pytest.approx([0.84795, 0.53008, 0], abs=1e-4)

    def test_rotated_frame(self):
        q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(3, 3)))
        axes = AxisSet.from_vectors(q)
        est = general_axes_mle(axes, [(29, 1), (25, 5), (15, 15)])
        expected = np.array([0.84795, 0.53008, 0.0]) @ q
        assert est.vector.as_array() == pytest.approx(expected, abs=1e-4)

    def test_degenerate_axes_fail(self):
        axes = AxisSet.from_vectors([[0, 0, 1]] * 3)
        est = general_axes_mle(axes, [(5, 5), (4, 6), (7, 3)])
        assert est.status is Status.FAILED_NO_SOLUTION

    def test_tetrahedron_interior(self):
        """Interior data reproduce the linear inversion of the tetrahedral frame."""
        from blochtomo.axes import tetrahedron
        ax = tetrahedron()
        r_true = np.array([0.2, -0.1, 0.3])
        p = ax.vectors @ r_true
        up = np.round(50 * (1 + p) / 2)
        counts = np.column_stack([up, 50 - up])
        est = general_axes_mle(ax, counts)
        tm = 2 * up / 50 - 1
        expected = np.linalg.lstsq(ax.vectors, tm, rcond=None)[0]
        assert est.vector.as_array() == pytest.approx(expected, abs=2e-2)

    def test_shape_checked(self):
        with pytest.raises(DomainError):
            general_axes_mle(cartesian(), [(1, 1), (1, 1)])
