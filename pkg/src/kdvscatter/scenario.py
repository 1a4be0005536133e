"""Scenario container for the step-like junction of two one-gap fields.

A scenario bundles the two background parameter sets (both spectra already
Galilean-normalized to share the energy endpoint 0, so they are specified
directly in the lambda plane by (eta1, eta2) pairs), a localized
perturbation, and the numerical policies.  The induced initial datum is

    u0(x) = u0_l(x) [x < 0] + u0_r(x) [x >= 0] + bump(x).

The two upper bands Sigma_1^l = (i eta1_l, i eta2_l) and
Sigma_1^r = (i eta1_r, i eta2_r) must not share endpoints, which leaves six
arrangements.  We enumerate them as

    (i)   disjoint, left band below right:        eta2_l < eta1_r
    (ii)  disjoint, right band below left:        eta2_r < eta1_l
    (iii) partial overlap, left starts lower:     eta1_l < eta1_r < eta2_l < eta2_r
    (iv)  partial overlap, right starts lower:    eta1_r < eta1_l < eta2_r < eta2_l
    (v)   containment Sigma_1^r inside Sigma_1^l: eta1_l < eta1_r, eta2_r < eta2_l
    (vi)  containment Sigma_1^l inside Sigma_1^r: eta1_r < eta1_l, eta2_l < eta2_r

Scenarios serialize to/from plain JSON dicts; the scenario hash (sha256 of
the canonical physical fields) is embedded in every exported artifact.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping

from .background import phase_state, u_dn_form
from .jost import Perturbation, TruncationPolicy
from .surface import BandParams, SurfaceData

__all__ = [
    "Scenario", "ScenarioError", "band_pattern", "DEFAULT_TOLERANCES",
    "surface_for",
]

# named tolerances echoed into every report; keys match the check names
DEFAULT_TOLERANCES = {
    "dual_form": 1e-9,
    "kdv_residual": 1e-8,
    "det": 1e-8,
    "symmetry": 1e-7,
    "unimodularity": 1e-6,
    "jump": 1e-5,
    "schwarz": 1e-6,
    "x_independence": 1e-6,
    "reflection": 1e-5,
    "m_jump": 1e-4,
    "det_V": 1e-10,
    "reconstruction": 1e-3,
}


class ScenarioError(ValueError):
    """Scenario validation failure; the message names the offending field."""


@lru_cache(maxsize=None)
def surface_for(bands: BandParams) -> SurfaceData:
    return SurfaceData(bands)


def band_pattern(left: BandParams, right: BandParams) -> str:
    """Classify the mutual arrangement of the two upper bands, (i)-(vi).

    Exactly coinciding bands (the trivial-junction diagnostic case) sit
    outside the step-like taxonomy and get the tag "identical"; partially
    shared endpoints are rejected.
    """
    l1, l2, r1, r2 = left.eta1, left.eta2, right.eta1, right.eta2
    scale = max(l2, r2)
    if abs(l1 - r1) < 1e-12 * scale and abs(l2 - r2) < 1e-12 * scale:
        return "identical"
    for a, b, name in ((l1, r1, "eta1"), (l2, r2, "eta2"),
                       (l1, r2, "eta1^l/eta2^r"), (l2, r1, "eta2^l/eta1^r")):
        if abs(a - b) < 1e-12 * scale:
            raise ScenarioError(
                f"bands share the endpoint {name} = {a:g}; the six-pattern "
                "taxonomy requires all four endpoints distinct")
    if l2 < r1:
        return "i"
    if r2 < l1:
        return "ii"
    if l1 < r1:
        return "iii" if l2 < r2 else "v"
    return "iv" if r2 < l2 else "vi"


@dataclass(frozen=True)
class Scenario:
    left: BandParams
    right: BandParams
    perturbation: Perturbation = Perturbation()
    truncation: TruncationPolicy | None = None
    theta_t_coefficient: float = 4.0
    tolerances: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.left.side != "left":
            object.__setattr__(self, "left", BandParams(
                self.left.eta1, self.left.eta2, self.left.x0, side="left"))
        if self.right.side != "right":
            object.__setattr__(self, "right", BandParams(
                self.right.eta1, self.right.eta2, self.right.x0, side="right"))
        band_pattern(self.left, self.right)  # rejects shared endpoints
        tols = dict(DEFAULT_TOLERANCES)
        tols.update(self.tolerances)
        object.__setattr__(self, "tolerances", tols)
        if self.truncation is None:
            object.__setattr__(self, "truncation", self._default_truncation())
        tail = self.perturbation.tail_mass(self.truncation.X_far)
        if not tail < 0.1 * self.truncation.ode_tol:
            raise ScenarioError(
                f"truncation.X_far = {self.truncation.X_far:g} leaves a "
                f"perturbation tail {tail:.3g} >= ode_tol/10 = "
                f"{0.1 * self.truncation.ode_tol:.3g}")

    def _default_truncation(self) -> TruncationPolicy:
        # 40 background periods past the perturbation support
        lo, hi = self.perturbation.support(1e-13)
        period = max(self.surface("left").x_period(),
                     self.surface("right").x_period())
        return TruncationPolicy(X_far=max(abs(lo), abs(hi)) + 40.0 * period)

    # -- geometry ----------------------------------------------------------

    @property
    def pattern(self) -> str:
        return band_pattern(self.left, self.right)

    def surface(self, side: str) -> SurfaceData:
        if side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        return surface_for(self.left if side == "left" else self.right)

    def is_trivial(self, side: str) -> bool:
        """True iff u0 coincides identically with the side's background."""
        same = (self.left.eta1 == self.right.eta1
                and self.left.eta2 == self.right.eta2
                and self.left.x0 == self.right.x0)
        return same and self.perturbation.is_zero

    # -- the initial datum --------------------------------------------------

    def u0_side(self, side: str, x: float) -> float:
        s = self.surface(side)
        return u_dn_form(phase_state(s, x, 0.0), s)

    def u0(self, x: float) -> float:
        side = "left" if x < 0.0 else "right"
        return self.u0_side(side, x) + self.perturbation.bump(x)

    def u0_branch(self, x_probe: float) -> Callable[[float], float]:
        """The smooth branch of u0 valid around x_probe (for integrators that
        evaluate at segment endpoints, where the step at 0 is two-valued)."""
        side = "left" if x_probe < 0.0 else "right"
        s = self.surface(side)
        bump = self.perturbation.bump
        return lambda x: u_dn_form(phase_state(s, x, 0.0), s) + bump(x)

    def u0_support(self):
        """Interval outside which u0 - u0^side is negligible on side's tail."""
        lo, hi = self.perturbation.support(0.1 * self.truncation.ode_tol)
        return min(0.0, lo), max(0.0, hi)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "left": {"eta1": self.left.eta1, "eta2": self.left.eta2,
                     "x0": self.left.x0},
            "right": {"eta1": self.right.eta1, "eta2": self.right.eta2,
                      "x0": self.right.x0},
            "perturbation": {
                "kind": self.perturbation.kind,
                "amplitude": self.perturbation.amplitude,
                "center": self.perturbation.center,
                "width": self.perturbation.width,
            },
            "truncation": {"X_far": self.truncation.X_far,
                           "ode_tol": self.truncation.ode_tol,
                           "max_step": self.truncation.max_step},
            "theta_t_coefficient": self.theta_t_coefficient,
            "tolerances": dict(self.tolerances),
        }

    @property
    def scenario_hash(self) -> str:
        doc = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(doc.encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Scenario":
        def need(d, key, where):
            if key not in d:
                raise ScenarioError(f"missing field {where}{key}")
            return d[key]

        def number(d, key, where, default=None):
            val = d.get(key, default)
            if val is None:
                raise ScenarioError(f"missing field {where}{key}")
            if not isinstance(val, (int, float)) or isinstance(val, bool) \
                    or not math.isfinite(val):
                raise ScenarioError(f"field {where}{key} must be a finite number")
            return float(val)

        if not isinstance(doc, Mapping):
            raise ScenarioError("scenario document must be a JSON object")
        known = {"left", "right", "perturbation", "truncation",
                 "theta_t_coefficient", "tolerances"}
        for key in doc:
            if key not in known:
                raise ScenarioError(f"unknown field {key}")
        bands = {}
        for side in ("left", "right"):
            sub = need(doc, side, "")
            eta1 = number(sub, "eta1", f"{side}.")
            eta2 = number(sub, "eta2", f"{side}.")
            if not 0.0 < eta1 < eta2:
                raise ScenarioError(
                    f"field {side}: requires 0 < eta1 < eta2, got "
                    f"({eta1:g}, {eta2:g})")
            bands[side] = BandParams(eta1, eta2, number(sub, "x0", f"{side}.", 0.0),
                                     side=side)
        psub = doc.get("perturbation", {})
        kind = psub.get("kind", "none")
        if kind not in ("none", "gaussian_bump", "compact_spline"):
            raise ScenarioError(f"field perturbation.kind: unknown kind {kind!r}")
        pert = Perturbation(kind=kind,
                            amplitude=number(psub, "amplitude", "perturbation.", 0.0),
                            center=number(psub, "center", "perturbation.", 0.0),
                            width=number(psub, "width", "perturbation.", 1.0))
        trunc = None
        if "truncation" in doc:
            tsub = doc["truncation"]
            trunc = TruncationPolicy(
                X_far=number(tsub, "X_far", "truncation."),
                ode_tol=number(tsub, "ode_tol", "truncation.", 1e-10),
                max_step=number(tsub, "max_step", "truncation.", 0.25))
        tols = doc.get("tolerances", {})
        for key, val in tols.items():
            if key not in DEFAULT_TOLERANCES:
                raise ScenarioError(f"field tolerances.{key}: unknown tolerance")
            if not isinstance(val, (int, float)) or not 0.0 < val < 1.0:
                raise ScenarioError(f"field tolerances.{key}: must be in (0, 1)")
        try:
            return cls(left=bands["left"], right=bands["right"],
                       perturbation=pert, truncation=trunc,
                       theta_t_coefficient=number(doc, "theta_t_coefficient",
                                                  "", 4.0),
                       tolerances=dict(tols))
        except (ValueError, ScenarioError) as exc:
            raise ScenarioError(str(exc)) from exc
