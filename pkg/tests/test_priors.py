"""Tests for the radial prior families."""
import math

import numpy as np
import pytest

from blochtomo.core import DomainError
from blochtomo.priors import (Family, PriorClass, ancilla, bures, bures_s_coordinate, chernoff, density,
                              gaussian, hs, mean_squared_radius, parse_prior, pure, radial_cdf,
                              radial_integral, with_entropy)

ALL_PRIORS = [hs(), bures(), pure(), chernoff(), ancilla(1.2), ancilla(3.0), gaussian(4.0),
              with_entropy(hs()), with_entropy(bures()), with_entropy(chernoff())]


class TestNormalisation:
    @pytest.mark.parametrize("prior", ALL_PRIORS, ids=lambda p: p.name)
    def test_integrates_to_one(self, prior):
        assert radial_integral(prior, lambda r: np.ones_like(r)) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("k", [1.1, 1.5, 2.0, 2.5, 4.0, 10.0])
    def test_mean_squared_radius(self, k):
        p = ancilla(k)
        assert mean_squared_radius(p, "quadrature") == pytest.approx(3 / (2 * k + 1), abs=1e-6)
        assert mean_squared_radius(p) == pytest.approx(3 / (2 * k + 1))

    def test_pure_is_surface(self):
        assert mean_squared_radius(pure()) == 1.0
        assert density(pure(), (0, 0, 0.5)) == 0.0

    def test_hs_is_flat(self):
        assert density(hs(), (0.1, 0.2, 0.3)) == pytest.approx(3 / (4 * math.pi))
        assert density(hs(), (0, 0, 0.99)) == pytest.approx(3 / (4 * math.pi))

    def test_outside_ball_is_zero(self):
        assert density(bures(), (0.8, 0.8, 0)) == 0.0


class TestBures:
    def test_known_value(self):
        assert bures_s_coordinate(0.5) == pytest.approx(0.38635, abs=1e-5)

    @pytest.mark.parametrize("r", [0.05, 0.3, 0.5, 0.7, 0.9, 0.99])
    def test_flat_in_s(self, r):
        """The Bures radial CDF is s(r)**3, so the measure is uniform in the s-ball."""
        assert radial_cdf(bures(), r) == pytest.approx(bures_s_coordinate(r) ** 3, abs=1e-8)

    def test_endpoints(self):
        assert bures_s_coordinate(0.0) == 0.0
        assert bures_s_coordinate(1.0) == pytest.approx(1.0)


class TestChernoff:
    def test_small_radius_limit(self):
        """Near the origin the density tends to 1 / (4 pi (pi - 2))."""
        assert density(chernoff(), (1e-6, 0, 0)) == pytest.approx(1 / (4 * math.pi * (math.pi - 2)), rel=1e-9)

    def test_cdf_closed_form(self):
        for r in (0.2, 0.6, 0.95):
            expected = 2 * (math.asin(r) - r) / (math.pi - 2)
            assert radial_cdf(chernoff(), r) == pytest.approx(expected, abs=1e-10)


class TestClasses:
    @pytest.mark.parametrize("prior,cls", [
        (hs(), PriorClass.UNIFORM), (bures(), PriorClass.PURE_PEAKED), (pure(), PriorClass.PURE_PEAKED),
        (chernoff(), PriorClass.PURE_PEAKED), (ancilla(3), PriorClass.MONOTONIC_MIXED_BIASED),
        (gaussian(2), PriorClass.MONOTONIC_MIXED_BIASED), (with_entropy(hs()), PriorClass.NON_MONOTONIC)])
    def test_default_class(self, prior, cls):
        assert prior.prior_class is cls


class TestParse:
    @pytest.mark.parametrize("name", ["hs", "bures", "pure", "chernoff", "ancilla:3", "gaussian:2",
                                      "hs+entropy", "chernoff+entropy"])
    def test_round_trip(self, name):
        assert parse_prior(name).name == name

    def test_case_and_whitespace(self):
        assert parse_prior(" Bures ").family is Family.ANCILLA

    @pytest.mark.parametrize("bad", ["flat", "ancilla:x", "ancilla:1", "pure+entropy", "gaussian:-1"])
    def test_rejects(self, bad):
        with pytest.raises(DomainError):
            parse_prior(bad)
