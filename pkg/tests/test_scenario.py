"""Tests for scenario validation, pattern classification, and serialization."""

import math

import pytest
from scipy.integrate import quad

from kdvscatter.jost import Perturbation, TruncationPolicy
from kdvscatter.scenario import (
    DEFAULT_TOLERANCES,
    Scenario,
    ScenarioError,
    band_pattern,
)
from kdvscatter.surface import BandParams


def bands(e1, e2, x0=0.0, side="left"):
    return BandParams(e1, e2, x0, side=side)


class TestBandPattern:
    def test_six_patterns(self):
        cases = [
            ((0.8, 1.5), (1.7, 2.3), "i"),
            ((1.7, 2.3), (0.8, 1.5), "ii"),
            ((1.0, 2.0), (1.2, 2.4), "iii"),
            ((1.2, 2.4), (1.0, 2.0), "iv"),
            ((1.0, 2.0), (1.2, 1.8), "v"),
            ((1.2, 1.8), (1.0, 2.0), "vi"),
        ]
        for (l1, l2), (r1, r2), tag in cases:
            assert band_pattern(bands(l1, l2), bands(r1, r2, side="right")) == tag

    def test_identical_bands_are_the_degenerate_tag(self):
        assert band_pattern(bands(1.0, 2.0), bands(1.0, 2.0, side="right")) \
            == "identical"

    def test_shared_endpoint_rejected(self):
        with pytest.raises(ScenarioError, match="share the endpoint"):
            band_pattern(bands(1.0, 2.0), bands(1.0, 2.5, side="right"))
        with pytest.raises(ScenarioError, match="share the endpoint"):
            band_pattern(bands(1.0, 2.0), bands(0.4, 1.0, side="right"))


class TestPerturbation:
    def test_bump_shapes(self):
        g = Perturbation("gaussian_bump", 0.05, -1.0, 0.5)
        assert g.bump(-1.0) == pytest.approx(0.05)
        assert g.bump(-1.5) == pytest.approx(0.05 * math.exp(-0.5))
        s = Perturbation("compact_spline", 0.1, 2.0, 1.5)
        assert s.bump(2.0) == pytest.approx(0.1)
        assert s.bump(3.5) == 0.0 and s.bump(0.49) == 0.0
        assert Perturbation().bump(0.3) == 0.0

    def test_tail_mass_against_quadrature(self):
        # closed-form tails vs direct integration of |bump|
        for pert in (Perturbation("gaussian_bump", 0.05, -1.0, 0.5),
                     Perturbation("compact_spline", -0.2, 0.7, 1.3)):
            for X in (0.5, 2.0, 4.0):
                above = quad(lambda y: abs(pert.bump(y)), X, X + 40.0)[0]
                below = quad(lambda y: abs(pert.bump(y)), -X - 40.0, -X)[0]
                assert pert.tail_mass(X) == pytest.approx(above + below,
                                                          abs=1e-12, rel=1e-8)

    def test_support_contains_the_mass(self):
        pert = Perturbation("gaussian_bump", 0.05, -1.0, 0.5)
        lo, hi = pert.support(1e-11)
        assert lo < -1.0 < hi
        # remaining mass outside: integrate both tails around the center
        outside = (quad(lambda y: abs(pert.bump(y)), hi, hi + 30.0)[0]
                   + quad(lambda y: abs(pert.bump(y)), lo - 30.0, lo)[0])
        assert outside < 1e-11

    def test_validation(self):
        with pytest.raises(ValueError, match="kind"):
            Perturbation("box", 1.0)
        with pytest.raises(ValueError, match="width"):
            Perturbation("gaussian_bump", 1.0, 0.0, 0.0)


class TestTruncationPolicy:
    def test_validation(self):
        with pytest.raises(ValueError):
            TruncationPolicy(X_far=-1.0)
        with pytest.raises(ValueError):
            TruncationPolicy(X_far=10.0, ode_tol=1.0)

    def test_tail_invariant_enforced_at_build(self):
        pert = Perturbation("gaussian_bump", 0.5, 0.0, 2.0)
        with pytest.raises(ScenarioError, match="tail"):
            Scenario(left=bands(1.0, 2.0), right=bands(1.2, 2.4, side="right"),
                     perturbation=pert,
                     truncation=TruncationPolicy(X_far=3.0))

    def test_default_is_forty_periods_past_support(self):
        scn = Scenario(left=bands(1.0, 2.0), right=bands(1.2, 2.4, side="right"),
                       perturbation=Perturbation("gaussian_bump", 0.05, -1.0, 0.5))
        period = max(scn.surface("left").x_period(),
                     scn.surface("right").x_period())
        lo, hi = scn.perturbation.support(1e-13)
        assert scn.truncation.X_far == pytest.approx(
            max(abs(lo), abs(hi)) + 40.0 * period)
        assert scn.perturbation.tail_mass(scn.truncation.X_far) \
            < 0.1 * scn.truncation.ode_tol


class TestScenario:
    def test_pattern_and_sides_normalized(self):
        scn = Scenario(left=bands(1.0, 2.0), right=bands(1.2, 1.8))
        assert scn.pattern == "v"
        assert scn.left.side == "left" and scn.right.side == "right"

    def test_u0_is_the_switched_junction(self):
        pert = Perturbation("gaussian_bump", 0.05, -1.0, 0.5)
        scn = Scenario(left=bands(1.0, 2.0), right=bands(1.2, 2.4, side="right"),
                       perturbation=pert)
        assert scn.u0(-3.0) == pytest.approx(
            scn.u0_side("left", -3.0) + pert.bump(-3.0))
        assert scn.u0(1.7) == pytest.approx(
            scn.u0_side("right", 1.7) + pert.bump(1.7))
        # branch functions expose the one-sided limits at the step
        # (bump included: the branch is the smooth datum on that side)
        assert scn.u0_branch(-1e-9)(0.0) == pytest.approx(
            scn.u0_side("left", 0.0) + pert.bump(0.0))
        assert scn.u0_branch(+1e-9)(0.0) == pytest.approx(
            scn.u0_side("right", 0.0) + pert.bump(0.0))

    def test_is_trivial(self):
        assert Scenario(left=bands(1.0, 2.0, 0.3),
                        right=bands(1.0, 2.0, 0.3)).is_trivial("left")
        assert not Scenario(left=bands(1.0, 2.0, 0.3),
                            right=bands(1.0, 2.0, 0.0)).is_trivial("left")
        assert not Scenario(
            left=bands(1.0, 2.0, 0.3), right=bands(1.0, 2.0, 0.3),
            perturbation=Perturbation("gaussian_bump", 0.01)).is_trivial("left")

    def test_roundtrip_and_hash_stability(self):
        doc = {
            "left": {"eta1": 1.0, "eta2": 2.0, "x0": 0.0},
            "right": {"eta1": 1.2, "eta2": 2.4, "x0": 0.1},
            "perturbation": {"kind": "gaussian_bump", "amplitude": 0.05,
                             "center": -1.0, "width": 0.5},
        }
        scn = Scenario.from_dict(doc)
        again = Scenario.from_dict(scn.to_dict())
        assert again.scenario_hash == scn.scenario_hash
        assert again.to_dict() == scn.to_dict()
        assert scn.tolerances == DEFAULT_TOLERANCES

    def test_validation_errors_name_the_field(self):
        base = {"left": {"eta1": 1.0, "eta2": 2.0, "x0": 0.0},
                "right": {"eta1": 1.2, "eta2": 2.4, "x0": 0.0}}
        with pytest.raises(ScenarioError, match="right.eta2"):
            Scenario.from_dict({**base, "right": {"eta1": 1.2, "x0": 0.0}})
        with pytest.raises(ScenarioError, match="eta1 < eta2"):
            Scenario.from_dict({**base, "left": {"eta1": 2.0, "eta2": 1.0,
                                                 "x0": 0.0}})
        with pytest.raises(ScenarioError, match="unknown field"):
            Scenario.from_dict({**base, "speed": 3.0})
        with pytest.raises(ScenarioError, match="perturbation.kind"):
            Scenario.from_dict({**base, "perturbation": {"kind": "box"}})
        with pytest.raises(ScenarioError, match="share the endpoint"):
            Scenario.from_dict({**base, "right": {"eta1": 1.0, "eta2": 2.5,
                                                  "x0": 0.0}})
        with pytest.raises(ScenarioError, match="tolerances.wiggle"):
            Scenario.from_dict({**base, "tolerances": {"wiggle": 1e-3}})
