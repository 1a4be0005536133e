"""Jost solutions of the step-like perturbed problem.

The initial datum is a junction of two one-gap fields plus a localized bump,

    u0(x) = u0_l(x) [x < 0] + u0_r(x) [x >= 0] + bump(x),

so u0 - u0_s is integrable on the s-side half line (s in {l, r}).  The Jost
solution of side s solves the first-order form of the spectral problem,

    d/dx Phi = ( -i lam sigma3 + i u0(x)/(2 lam) [[1,1],[-1,-1]] ) Phi,

normalized by Phi^s ~ O^s e^{-i(x-x0^s) p^s sigma3} as x -> s-infinity.
Writing Phi^s = O^s J^s e^{-i(x-x0^s) p^s sigma3} turns this into the
Volterra system

    dJ/dx + i p^s [sigma3, J] = U^s J,
    U^s = (O^s)^{-1} [ i (u0-u0^s)/(2 lam) [[1,1],[-1,-1]] ] O^s,

with J^s -> I at s-infinity.  We integrate the equivalent column form: the
columns of W = O^s J^s = Phi^s e^{+i(x-x0^s) p^s sigma3} decouple,

    W_1' = (Ltilde(x) + i p^s) W_1,      W_2' = (Ltilde(x) - i p^s) W_2,

whose right-hand side needs only u0(x) (no theta evaluations inside the
loop).  The contamination mode of column j is e^{-2 s_j i (x-y) p^s},
s_1 = +1, s_2 = -1; it decays along the integration direction exactly when
lam lies in the column's admissible half plane (column 1 of the left
solution on closed C+, column 2 on closed C-, mirrored on the right), which
is also where the Volterra kernel is bounded.  Outside that region the true
column grows like e^{2 |Im p| |x - seed|}; we amplify est_error accordingly
and refuse once the exponent is hopeless.

Seeding happens at the edge of the support of u0 - u0^s, where J = I holds
identically; the far cutoff X_far of the truncation policy enters only
through the tail bound it certifies (integrating the unperturbed region
would merely reproduce O^s with extra error).  One-sided band values use the
one-sided O^s, p^s of the requested contour side, so the produced boundary
values are the analytic ones; in particular the gap jump of J inherits the
e^{i(Omega+Delta) sigma3} jump of O through the seed.

The stepper is an embedded Dormand-Prince 5(4) pair with FSAL and a PI-like
step controller; est_error is the accumulated local error estimate times a
safety factor 10 plus the seed's truncation tail.  The scalar Schroedinger
oracle (-psi'' + u0 psi = lam^2 psi) cross-checks the Wronskian a(lambda)
through an unrelated integrator (scipy DOP853).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np
from scipy.special import erfcinv

from .background import O_matrix, phase_state, psi0
from .surface import ContourPoint, SurfaceData

if TYPE_CHECKING:  # anti-cycle: scenario composes the types defined here
    from .scenario import Scenario

__all__ = [
    "Perturbation", "TruncationPolicy", "JostMatrix",
    "ProximityError", "StiffnessError",
    "solve_J", "jost_phi", "jost_phi_column", "oracle_wronskian_a",
    "SIGMA1",
]

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_B = np.array([[1.0, 1.0], [-1.0, -1.0]], dtype=complex)

_EXCLUSION = 1e-3       # keep lam this far from {0, +-i eta1, +-i eta2}
_GROWTH_CAP = 60.0      # log of column amplification beyond which we refuse
_MAX_STEPS = 500_000


class ProximityError(ValueError):
    """lam too close to 0 or a band endpoint of the requested side."""


class StiffnessError(RuntimeError):
    """Step-size underflow, step budget exhausted, or a hopeless column."""


# ---------------------------------------------------------------------------
# the perturbation and the truncation policy


@dataclass(frozen=True)
class Perturbation:
    """Localized bump added on top of the step-like background junction.

    gaussian_bump:   amplitude * exp(-(x-center)^2 / (2 width^2))
    compact_spline:  amplitude * (1 - ((x-center)/width)^2)^3 on |x-c| < w

    Both are C^2 with (super-)polynomially decaying tails, so the induced
    u0 keeps the weighted-integrability of the step-like class.
    """

    kind: str = "none"
    amplitude: float = 0.0
    center: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian_bump", "compact_spline"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if not self.width > 0.0:
            raise ValueError("perturbation width must be positive")

    @property
    def is_zero(self) -> bool:
        return self.kind == "none" or self.amplitude == 0.0

    def bump(self, x: float) -> float:
        if self.is_zero:
            return 0.0
        s = (x - self.center) / self.width
        if self.kind == "gaussian_bump":
            return self.amplitude * math.exp(-0.5 * s * s)
        if abs(s) >= 1.0:
            return 0.0
        return self.amplitude * (1.0 - s * s) ** 3

    def support(self, tail_tol: float):
        """Interval outside which the remaining |bump| mass is < tail_tol."""
        if self.is_zero:
            return self.center, self.center
        if self.kind == "compact_spline":
            return self.center - self.width, self.center + self.width
        # one-sided gaussian tail mass: |A| w sqrt(pi/2) erfc(k/sqrt(2));
        # budget a quarter per tail so both together stay strictly below
        # tail_tol (erfc decay makes the extra width negligible)
        mass1 = abs(self.amplitude) * self.width * math.sqrt(math.pi / 2.0)
        arg = 0.25 * tail_tol / mass1
        if arg >= 2.0:
            return self.center, self.center
        k = math.sqrt(2.0) * float(erfcinv(arg))
        return self.center - k * self.width, self.center + k * self.width

    def tail_mass(self, X: float) -> float:
        """integral of |bump| over |y| > X (exact closed forms)."""
        if self.is_zero:
            return 0.0
        if self.kind == "gaussian_bump":
            c1 = abs(self.amplitude) * self.width * math.sqrt(math.pi / 2.0)
            rt2w = math.sqrt(2.0) * self.width
            return c1 * (math.erfc((X - self.center) / rt2w)
                         + math.erfc((X + self.center) / rt2w))

        def mass_above(a):  # integral over (a, inf), a in bump coordinates
            s = min(max((a - self.center) / self.width, -1.0), 1.0)
            F = lambda t: t - t ** 3 + 0.6 * t ** 5 - t ** 7 / 7.0
            return abs(self.amplitude) * self.width * (F(1.0) - F(s))

        full = mass_above(self.center - self.width)
        below = full - mass_above(-X)  # integral over (-inf, -X)
        return mass_above(X) + below


@dataclass(frozen=True)
class TruncationPolicy:
    """Far-field cutoff and stepper tolerances for the Jost solves.

    X_far certifies the tail bound integral_{|y|>X_far} |u0-u0^s| < ode_tol/10;
    the actual integration starts at the support edge of u0 - u0^s, where
    J = I holds identically.
    """

    X_far: float
    ode_tol: float = 1e-10
    max_step: float = 0.25

    def __post_init__(self):
        if not self.X_far > 0.0:
            raise ValueError("X_far must be positive")
        if not 0.0 < self.ode_tol < 1e-2:
            raise ValueError("ode_tol out of range")
        if not self.max_step > 0.0:
            raise ValueError("max_step must be positive")


@dataclass(frozen=True)
class JostMatrix:
    """One Jost sample: J^s(x; lam) with an accumulated error estimate.

    det J = 1 and sigma1 J(x;-lam) sigma1 = J(x;lam) hold within est_error.
    """

    J: np.ndarray
    side: str
    x: float
    lam: ContourPoint
    est_error: float


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) with accumulated local error


def _dp45(f: Callable, a: float, b: float, y0: np.ndarray, *,
          rtol: float, atol: float, max_step: float, diag: str = ""):
    """Integrate y' = f(x, y) from a to b (either direction).

    Returns (y(b), acc) where acc is the sum of the embedded local error
    estimates over accepted steps (the raw ingredient of est_error).
    """
    span = b - a
    y = np.asarray(y0, dtype=complex).copy()
    if abs(span) <= 1e-13 * max(1.0, abs(a), abs(b)):
        return y, 0.0
    sgn = 1.0 if span > 0.0 else -1.0
    x = a
    k1 = f(x, y)
    h = sgn * min(max_step, max(abs(span) * 1e-2, 1e-6))
    acc = 0.0
    nsteps = 0
    while sgn * (b - x) > 0.0:
        nsteps += 1
        if nsteps > _MAX_STEPS:
            raise StiffnessError(f"step budget exhausted at x = {x:.6g}{diag}")
        h = sgn * min(abs(h), max_step, abs(b - x))
        if abs(h) <= 1e-14 * max(1.0, abs(x)):
            raise StiffnessError(f"step size underflow at x = {x:.6g}{diag}")
        k2 = f(x + 0.2 * h, y + h * (0.2 * k1))
        k3 = f(x + 0.3 * h, y + h * (0.075 * k1 + 0.225 * k2))
        k4 = f(x + 0.8 * h, y + h * ((44.0 / 45.0) * k1 - (56.0 / 15.0) * k2
                                     + (32.0 / 9.0) * k3))
        k5 = f(x + (8.0 / 9.0) * h,
               y + h * ((19372.0 / 6561.0) * k1 - (25360.0 / 2187.0) * k2
                        + (64448.0 / 6561.0) * k3 - (212.0 / 729.0) * k4))
        k6 = f(x + h, y + h * ((9017.0 / 3168.0) * k1 - (355.0 / 33.0) * k2
                               + (46732.0 / 5247.0) * k3 + (49.0 / 176.0) * k4
                               - (5103.0 / 18656.0) * k5))
        ynew = y + h * ((35.0 / 384.0) * k1 + (500.0 / 1113.0) * k3
                        + (125.0 / 192.0) * k4 - (2187.0 / 6784.0) * k5
                        + (11.0 / 84.0) * k6)
        k7 = f(x + h, ynew)
        err = h * ((71.0 / 57600.0) * k1 - (71.0 / 16695.0) * k3
                   + (71.0 / 1920.0) * k4 - (17253.0 / 339200.0) * k5
                   + (22.0 / 525.0) * k6 - 0.025 * k7)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        errnorm = float(np.max(np.abs(err) / scale))
        if errnorm <= 1.0:
            x += h
            y = ynew
            k1 = k7
            acc += float(np.max(np.abs(err)))
            fac = 5.0 if errnorm == 0.0 else min(5.0, 0.9 * errnorm ** -0.2)
        else:
            fac = max(0.2, 0.9 * errnorm ** -0.2)
        h *= fac
    return y, acc


# ---------------------------------------------------------------------------
# column solves


def _check_proximity(pt: ContourPoint, s: SurfaceData):
    lam = complex(pt.lam)
    for z0 in (0.0, 1j * s.bands.eta1, -1j * s.bands.eta1,
               1j * s.bands.eta2, -1j * s.bands.eta2):
        if abs(lam - z0) < _EXCLUSION:
            raise ProximityError(
                f"lambda = {lam} within {_EXCLUSION} of excluded point {z0}")


def _seed_point(side: str, scn: "Scenario") -> float:
    lo, hi = scn.u0_support()
    return min(0.0, lo) if side == "left" else max(0.0, hi)


def _is_home(side: str, x: float, seed: float) -> bool:
    return x <= seed if side == "left" else x >= seed


def _segments(a: float, b: float, scn: "Scenario"):
    """Split [a, b] at the u0 breakpoints (the step at 0, spline edges)."""
    pts = [0.0]
    pert = scn.perturbation
    if pert.kind == "compact_spline" and not pert.is_zero:
        pts += [pert.center - pert.width, pert.center + pert.width]
    lo, hi = min(a, b), max(a, b)
    inner = sorted(p for p in set(pts) if lo < p < hi)
    knots = [a] + (inner if b > a else inner[::-1]) + [b]
    return list(zip(knots[:-1], knots[1:]))


def _solve_w_column(side: str, col: int, x: float, pt: ContourPoint,
                    scn: "Scenario"):
    """Column col of W = O^s J^s at x; returns (2-vector, raw error).

    The raw error already includes the contamination amplification and the
    seed's truncation tail, but not the safety factor 10.
    """
    s = scn.surface(side)
    _check_proximity(pt, s)
    pol = scn.truncation
    seed = _seed_point(side, scn)
    if scn.is_trivial(side) or _is_home(side, x, seed):
        w = O_matrix(phase_state(s, x, 0.0), pt, s)[:, col]
        return w, 0.1 * pol.ode_tol
    p = complex(s.p(pt))
    scol = 1.0 if col == 0 else -1.0
    growth = -2.0 * scol * p.imag * (x - seed)
    if growth > _GROWTH_CAP:
        raise StiffnessError(
            f"column {col + 1} of the {side} Jost solution is inadmissible at "
            f"lambda = {pt.lam}: contamination exponent {growth:.1f} "
            f"(Im p = {p.imag:.3g} over span {abs(x - seed):.3g})")
    amp = math.exp(max(0.0, growth))
    y = O_matrix(phase_state(s, seed, 0.0), pt, s)[:, col].astype(complex)
    lam = complex(pt.lam)
    il = 1j * lam
    cu = 0.5j / lam
    ps = scol * 1j * p
    d1, d2 = ps - il, ps + il
    diag = f" (side = {side}, column = {col + 1}, lambda = {lam})"
    acc = 0.0
    for xa, xb in _segments(seed, x, scn):
        u_seg = scn.u0_branch(0.5 * (xa + xb))

        def f(xx, yy, _u=u_seg):
            g = cu * _u(xx) * (yy[0] + yy[1])
            return np.array([d1 * yy[0] + g, d2 * yy[1] - g])

        y, a_seg = _dp45(f, xa, xb, y, rtol=pol.ode_tol, atol=pol.ode_tol,
                         max_step=pol.max_step, diag=diag)
        acc += a_seg
    return y, amp * acc + 0.1 * pol.ode_tol


# ---------------------------------------------------------------------------
# public solves


def solve_J(side: str, x: float, pt: ContourPoint, scn: "Scenario") -> JostMatrix:
    """J^s(x; lam), integrated from the support edge of u0 - u0^s.

    Both columns are produced; outside a column's admissible half plane the
    true column grows like e^{2 |Im p| span}, which est_error reflects.
    """
    s = scn.surface(side)
    if scn.is_trivial(side) or _is_home(side, x, _seed_point(side, scn)):
        _check_proximity(pt, s)
        return JostMatrix(J=np.eye(2, dtype=complex), side=side, x=float(x),
                          lam=pt, est_error=0.1 * scn.truncation.ode_tol)
    w0, e0 = _solve_w_column(side, 0, x, pt, scn)
    w1, e1 = _solve_w_column(side, 1, x, pt, scn)
    O = O_matrix(phase_state(s, x, 0.0), pt, s)
    Oinv = np.array([[O[1, 1], -O[0, 1]], [-O[1, 0], O[0, 0]]])  # det O = 1
    J = Oinv @ np.column_stack([w0, w1])
    return JostMatrix(J=J, side=side, x=float(x), lam=pt,
                      est_error=10.0 * (e0 + e1))


def jost_phi(side: str, x: float, pt: ContourPoint, scn: "Scenario"):
    """Phi^s(x; lam) = O^s J^s e^{-i(x-x0^s) p^s sigma3} as a 2x2 matrix."""
    w0, _ = _solve_w_column(side, 0, x, pt, scn)
    w1, _ = _solve_w_column(side, 1, x, pt, scn)
    s = scn.surface(side)
    ph = (x - s.bands.x0) * complex(s.p(pt))
    return np.column_stack([w0 * cmath.exp(-1j * ph), w1 * cmath.exp(1j * ph)])


def jost_phi_column(side: str, col: int, x: float, pt: ContourPoint,
                    scn: "Scenario"):
    """Single column of Phi^s with its error estimate (stable-column API).

    Scattering determinants combine column 1 of the left solution with
    column 2 of the right one, both admissible on closed C+; this entry
    point avoids ever touching the opposing (growing) column.
    """
    w, e = _solve_w_column(side, col, x, pt, scn)
    s = scn.surface(side)
    ph = (x - s.bands.x0) * complex(s.p(pt))
    sgn = -1.0 if col == 0 else 1.0
    return w * cmath.exp(sgn * 1j * ph), 10.0 * e


# ---------------------------------------------------------------------------
# scalar Schroedinger oracle


def oracle_wronskian_a(pt: ContourPoint, scn: "Scenario",
                       x_match: float | None = None) -> complex:
    """a(lam) from the scalar problem -psi'' + u0 psi = lam^2 psi.

    Two solutions are seeded from the exact background matrices: (psi, psi')
    from column 1 of Psi0^l at the left support edge and column 2 of Psi0^r
    at the right one (sites where the truncated tail is below the policy
    bound, so the seeds solve the full problem there).  Abel's identity makes
    their Wronskian x-independent, and det Psi0 = 2 i lam normalizes

        a(lam) = W(psi_l, psi_r) / (2 i lam) = det[Phi_1^l, Phi_2^r].

    Integration uses scipy's DOP853, an integrator unrelated to the in-house
    stepper, which is the point of the oracle.
    """
    from scipy.integrate import solve_ivp

    sl, sr = scn.surface("left"), scn.surface("right")
    _check_proximity(pt, sl)
    _check_proximity(pt, sr)
    lam = complex(pt.lam)
    lam2 = lam * lam
    al, ar = _seed_point("left", scn), _seed_point("right", scn)
    xm = 0.5 * (al + ar) if x_match is None else float(x_match)
    seed_l = psi0(phase_state(sl, al, 0.0), pt, sl)[:, 0]
    seed_r = psi0(phase_state(sr, ar, 0.0), pt, sr)[:, 1]
    tol = min(1e-11, scn.truncation.ode_tol)

    def run(a, b, y0):
        y = np.asarray(y0, dtype=complex)
        for xa, xb in _segments(a, b, scn):
            u_seg = scn.u0_branch(0.5 * (xa + xb))
            sol = solve_ivp(
                lambda xx, yy: np.array([yy[1], (u_seg(xx) - lam2) * yy[0]]),
                (xa, xb), y, method="DOP853", rtol=tol, atol=tol)
            if not sol.success:
                raise StiffnessError(f"oracle integration failed: {sol.message}")
            y = sol.y[:, -1]
        return y

    psi_l = run(al, xm, seed_l)
    psi_r = run(ar, xm, seed_r)
    W = psi_l[0] * psi_r[1] - psi_l[1] * psi_r[0]
    return complex(W / (2j * lam))
