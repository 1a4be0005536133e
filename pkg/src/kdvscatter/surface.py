"""Genus-1 Riemann surface for one periodic background.

All cuts sit on the imaginary axis: Sigma1 = [i*eta1, i*eta2] and
Sigma2 = [-i*eta2, -i*eta1], both oriented upward.  The plus side of either
cut is the one with Re(lambda) < 0.  R(lambda) is the square root of
(lambda^2+eta1^2)(lambda^2+eta2^2) normalized by R/lambda^2 -> 1 at infinity,
which puts its branch cuts exactly on Sigma1 u Sigma2 and gives
R(0) = +eta1*eta2.

The Abelian integrals

    p(lambda) = int_{i eta2}^lambda (zeta^2 + c1) / R(zeta) dzeta
    q(lambda) = 12 int_{i eta2}^lambda (zeta^4 + (eta1^2+eta2^2)/2 zeta^2 + c2) / R dzeta
    J(lambda) = int_{i eta2}^lambda omega,  omega = -i eta2 / (4 K(m)) * dzeta / R

run over cut-avoiding polylines.  Off-axis pieces are straight lines with a
t^2 substitution at the branch-point endpoint; pieces along the imaginary
axis use trigonometric parametrizations in which the root factors of R cancel
exactly, so band/gap/tail traverses are spectrally accurate with no endpoint
cancellation:

    band:  s(th)  = sqrt(eta1^2 cos^2 th + eta2^2 sin^2 th),  ds/g = dth/s
    gap:   s(ph)  = eta1 sin ph,       R = eta1 cos(ph) sqrt(eta2^2 - s^2)
    tail:  s(ps)  = eta2 cosh ps,      R = -e2 sinh(ps) sqrt(s^2 - eta1^2)

c1 and c2 kill the A-periods (through-gap cycle) of dp, dq, so both integrals
are single-valued off the cut [-i eta2, i eta2]; omega has A-period 1.
B-periods (twice the plus-side traverse of Sigma1):

    Omega1 = pi eta2 / K(m),
    Omega2 = -2 pi eta2 (eta1^2 + eta2^2) / K(m),
    tau    = i K(m') / (2 K(m)),  m' = sqrt(1 - m^2),

with m = eta1/eta2.  tau is the complementary-modulus reading of the period
ratio; the literal argument K(1-m) is available behind tau_literal_arg for
comparison and is *not* consistent with the B-period quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import EllipticModulus

__all__ = [
    "PLUS",
    "MINUS",
    "OFF",
    "SingularityError",
    "PathError",
    "BandParams",
    "ContourPoint",
    "BranchPoint",
    "SurfaceData",
    "locate",
    "surface_R",
    "quasi_momentum_p",
    "quasi_energy_q",
    "abel_J",
    "gamma4",
    "periods",
]

PLUS, MINUS, OFF = 1, -1, 0

_AXIS_TOL = 1e-12
_EDGE_TOL = 1e-12
_CLEARANCE = 1e-3


class SingularityError(ValueError):
    """Evaluation requested at (or too close to) a branch point."""


class PathError(RuntimeError):
    """Integration path would cross a cut, or quadrature failed to settle."""


@dataclass(frozen=True)
class BandParams:
    """One background's band edges 0 < eta1 < eta2 and phase shift x0."""

    eta1: float
    eta2: float
    x0: float = 0.0
    side: str = "left"

    def __post_init__(self):
        if not (0.0 < self.eta1 < self.eta2):
            raise ValueError("band edges must satisfy 0 < eta1 < eta2")
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")

    @property
    def modulus(self) -> float:
        return self.eta1 / self.eta2


@dataclass(frozen=True)
class ContourPoint:
    """A lambda value plus the requested boundary side on a cut.

    side is PLUS (+1, the Re < 0 side), MINUS (-1), or OFF (0, off-contour).
    """

    lam: complex
    side: int = OFF

    def __post_init__(self):
        if self.side not in (PLUS, MINUS, OFF):
            raise ValueError("side must be +1, -1 or 0")


BranchPoint = ContourPoint


def locate(lam, s: "SurfaceData", tol=_AXIS_TOL):
    """Region of lam relative to this surface's cuts.

    Returns one of 'band1', 'band2', 'gap', 'axis_out', 'real', 'generic'.
    Raises SingularityError within _EDGE_TOL of a branch point.
    """
    lam = complex(lam)
    scale = max(1.0, abs(lam))
    for e in (s.bands.eta1, s.bands.eta2):
        if abs(lam - 1j * e) < _EDGE_TOL * scale or abs(lam + 1j * e) < _EDGE_TOL * scale:
            raise SingularityError(f"lambda = {lam} is a branch point")
    if abs(lam.real) <= tol * scale:
        y = abs(lam.imag)
        if s.bands.eta1 < y < s.bands.eta2:
            return "band1" if lam.imag > 0 else "band2"
        if y < s.bands.eta1:
            return "gap"
        return "axis_out"
    if abs(lam.imag) <= tol * scale:
        return "real"
    return "generic"


# ---------------------------------------------------------------------------
# quadrature engine

_GL_CACHE: dict = {}


def _gl(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def adaptive_gl(g, a, b, tol, order=24, max_panels=4096):
    """Adaptive Gauss-Legendre of a vectorized complex g over [a, b].

    Bisects panels until |GL(panel) - GL(halves)| is below the panel's share
    of tol (with a small relative floor against roundoff).  Returns
    (value, error_estimate).
    """
    x, w = _gl(order)
    span = abs(b - a)
    if span == 0.0:
        return 0.0 + 0.0j, 0.0

    def gl_panel(lo, hi):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        return half * np.sum(w * g(mid + half * x))

    total = 0.0 + 0.0j
    err = 0.0
    stack = [(a, b, gl_panel(a, b))]
    panels = 0
    while stack:
        lo, hi, coarse = stack.pop()
        panels += 1
        if panels > max_panels:
            raise PathError("quadrature failed to converge (panel budget exhausted)")
        mid = 0.5 * (lo + hi)
        left, right = gl_panel(lo, mid), gl_panel(mid, hi)
        fine = left + right
        delta = abs(fine - coarse)
        width = abs(hi - lo)
        if delta <= tol * width / span + 1e-14 * abs(fine) or width < 1e-13 * span:
            total += fine
            err += delta
        else:
            stack.append((lo, mid, left))
            stack.append((mid, hi, right))
    return total, err


@dataclass(frozen=True)
class Piece:
    """Directed path piece.

    kind 'line': straight za -> zb with desing in {'none','start','end','both'}
    marking inverse-square-root endpoints removed by a t^2 substitution.
    kinds 'band1', 'band2', 'gap', 'axis_up', 'axis_down' lie on the imaginary
    axis between Im za and Im zb and are integrated in their trig parameter;
    'side' selects the one-sided R branch on band pieces.
    """

    kind: str
    za: complex
    zb: complex
    desing: str = "none"
    side: int = OFF


# ---------------------------------------------------------------------------
# surface data


class SurfaceData:
    """Immutable derived data for one background's genus-1 surface."""

    def __init__(self, bands: BandParams, tau_literal_arg: bool = False,
                 quad_tol: float = 1e-12, gl_order: int = 24):
        self.bands = bands
        self.quad_tol = float(quad_tol)
        self.gl_order = int(gl_order)
        m = bands.modulus
        self.em = EllipticModulus.from_m(m)
        K, E = self.em.K, self.em.E
        e1s, e2s = bands.eta1 ** 2, bands.eta2 ** 2
        self.c1 = e2s - e2s * E / K
        self.c2 = e1s * e2s / 3.0 - (e1s + e2s) * self.c1 / 6.0
        self.p1 = (e1s - e2s) / 2.0 + e2s * E / K
        self.Omega1 = math.pi * bands.eta2 / K
        self.Omega2 = -2.0 * math.pi * bands.eta2 * (e1s + e2s) / K
        if tau_literal_arg:
            # literal reading K(1-m); kept only for comparison, see module doc
            from .special import ellip_K
            self.tau = 1j * ellip_K(1.0 - m) / (2.0 * K)
        else:
            self.tau = 1j * self.em.Kc / (2.0 * K)
        self.omega_norm = -1j * bands.eta2 / (4.0 * K)
        self._memo: dict = {}

    # -- pointwise R and the integrand numerators -----------------------------

    def R_free(self, z):
        """R off the cuts (and one may evaluate on the gap/outer axis too)."""
        e1s, e2s = self.bands.eta1 ** 2, self.bands.eta2 ** 2
        return np.sqrt(z * z + e1s) * np.sqrt(z * z + e2s)

    def _band_g(self, y):
        e1s, e2s = self.bands.eta1 ** 2, self.bands.eta2 ** 2
        return math.sqrt((y * y - e1s) * (e2s - y * y))

    def R_point(self, pt: ContourPoint):
        region = locate(pt.lam, self)
        lam = complex(pt.lam)
        e1s, e2s = self.bands.eta1 ** 2, self.bands.eta2 ** 2
        if region in ("band1", "band2"):
            if pt.side == OFF:
                raise ValueError("side tag required on a cut")
            g = self._band_g(abs(lam.imag))
            return -pt.side * 1j * g if region == "band1" else pt.side * 1j * g
        if region == "gap":
            ys = lam.imag ** 2
            return complex(math.sqrt((e1s - ys) * (e2s - ys)))
        if region == "axis_out":
            # above/below the outer edges R is negative real (explicit form:
            # signed zeros in lam**2 would flip the principal sqrt there)
            ys = lam.imag ** 2
            return complex(-math.sqrt((ys - e1s) * (ys - e2s)))
        return complex(self.R_free(lam))

    def num(self, kind, z):
        if kind == "p":
            return z * z + self.c1
        if kind == "q":
            e = 0.5 * (self.bands.eta1 ** 2 + self.bands.eta2 ** 2)
            return 12.0 * (z ** 4 + e * z * z + self.c2)
        return self.omega_norm * np.ones_like(z)

    # -- path building --------------------------------------------------------

    def _edge_target(self, lam):
        scale = max(1.0, abs(lam))
        for e in (self.bands.eta1, self.bands.eta2):
            for bp in (1j * e, -1j * e):
                if abs(lam - bp) < _EDGE_TOL * scale:
                    return bp
        return None

    def _check_clear(self, za, zb):
        """Reject segments that cross the cut column or graze a branch point."""
        e1, e2 = self.bands.eta1, self.bands.eta2
        xa, xb = za.real, zb.real
        if xa * xb < 0.0:
            t = xa / (xa - xb)
            ycross = za.imag + t * (zb.imag - za.imag)
            if abs(ycross) <= e2 + _CLEARANCE:
                raise PathError(f"segment {za} -> {zb} crosses the cut column")
        d = zb - za
        L2 = abs(d) ** 2
        for bp in (1j * e1, -1j * e1, 1j * e2, -1j * e2):
            if abs(za - bp) < _EDGE_TOL or abs(zb - bp) < _EDGE_TOL:
                continue  # desingularized endpoint
            t = 0.0 if L2 == 0.0 else ((bp - za).real * d.real + (bp - za).imag * d.imag) / L2
            t = min(1.0, max(0.0, t))
            if abs(za + t * d - bp) < _CLEARANCE:
                raise PathError(f"segment {za} -> {zb} passes within {_CLEARANCE} of {bp}")

    def path_to(self, pt: ContourPoint):
        """Cut-avoiding path from i*eta2 to pt.lam as a Piece list."""
        e1, e2 = self.bands.eta1, self.bands.eta2
        lam = complex(pt.lam)
        top = 1j * e2

        def descent(stop, sd):
            """On-axis pieces from i*eta2 down to stop = Im(lambda)."""
            segs = []
            y1 = max(stop, e1)
            segs.append(Piece("band1", top, 1j * y1, side=sd))
            if stop >= e1:
                return segs
            y2 = max(stop, -e1)
            segs.append(Piece("gap", 1j * e1, 1j * y2))
            if stop >= -e1:
                return segs
            y3 = max(stop, -e2)
            segs.append(Piece("band2", -1j * e1, 1j * y3, side=sd))
            if stop >= -e2:
                return segs
            segs.append(Piece("axis_down", -1j * e2, 1j * stop))
            return segs

        edge = self._edge_target(lam)
        if edge is not None:
            if pt.side == OFF:
                raise ValueError("side tag required for a band-edge integral")
            return descent(edge.imag, pt.side)

        region = locate(lam, self)
        if region in ("band1", "band2", "gap") or (region == "axis_out" and lam.imag < 0):
            sd = pt.side
            if region in ("band1", "band2") and sd == OFF:
                raise ValueError("side tag required for on-cut integrals")
            return descent(lam.imag, sd if sd != OFF else PLUS)

        if region == "axis_out":  # above i*eta2
            return [Piece("axis_up", top, lam)]

        # generic / real targets: stay inside the target's half plane
        sigma = 1.0 if lam.real > 0 else -1.0
        direct_ok = abs(lam.real) >= 0.25 * e2 or lam.imag >= e2
        if direct_ok:
            self._check_clear(top, lam)
            return [Piece("line", top, lam, desing="start")]
        xd = sigma * 0.6 * e2
        w1 = xd + 1j * e2
        w2 = xd + 1j * lam.imag
        segs = [Piece("line", top, w1, desing="start"),
                Piece("line", w1, w2),
                Piece("line", w2, lam)]
        for sg in segs[1:]:
            self._check_clear(sg.za, sg.zb)
        return segs

    # -- single-piece integration ---------------------------------------------

    def _integrate_piece(self, kind, piece: Piece):
        tol, order = self.quad_tol, self.gl_order
        e1, e2 = self.bands.eta1, self.bands.eta2
        de = e2 * e2 - e1 * e1

        if piece.kind == "line":
            za, zb = piece.za, piece.zb
            d = zb - za
            if piece.desing == "none":
                f = lambda z: self.num(kind, z) / self.R_free(z)
                return adaptive_gl(lambda t: f(za + d * t) * d, 0.0, 1.0, tol, order)
            if piece.desing in ("start", "end"):
                # zeta = bp + d t^2: the vanishing quadratic zeta^2 - bp^2 is
                # formed from t exactly as (d t^2)(d t^2 + 2 bp); forming it
                # from the rounded zeta loses half the digits near the edge
                bp = za if piece.desing == "start" else zb
                dd = d if piece.desing == "start" else -d
                eo2 = e1 * e1 if abs(abs(bp) - e2) < abs(abs(bp) - e1) else e2 * e2

                def g(t):
                    w = dd * t * t
                    z = bp + w
                    qv = w * (w + 2.0 * bp)
                    return (self.num(kind, z) / (np.sqrt(qv) * np.sqrt(z * z + eo2))
                            * 2.0 * t * dd)

                return adaptive_gl(g, 0.0, 1.0, tol, order)
            mid = 0.5 * (za + zb)
            v1, q1 = self._integrate_piece(kind, Piece("line", za, mid, "start"))
            v2, q2 = self._integrate_piece(kind, Piece("line", mid, zb, "end"))
            return v1 + v2, q1 + q2

        ya, yb = piece.za.imag, piece.zb.imag

        if piece.kind == "band1":
            # zeta = i s(th), s^2 = e1^2 + de sin^2 th; dzeta/R_side = -side dth/s
            tha, thb = self._th_of(ya), self._th_of(yb)
            sgn = -piece.side

            def g(th):
                ss = np.sqrt(e1 * e1 + de * np.sin(th) ** 2)
                return sgn * self.num(kind, 1j * ss) / ss

            return adaptive_gl(g, tha, thb, tol, order)

        if piece.kind == "band2":
            # zeta = -i s(th); dzeta/R_side = -side dth/s as on band1
            tha, thb = self._th_of(-ya), self._th_of(-yb)
            sgn = -piece.side

            def g(th):
                ss = np.sqrt(e1 * e1 + de * np.sin(th) ** 2)
                return sgn * self.num(kind, -1j * ss) / ss

            # downward zeta motion means increasing th; orientation handled by bounds
            return adaptive_gl(g, tha, thb, tol, order)

        if piece.kind == "gap":
            # zeta = i e1 sin ph; dzeta/R = i dph / sqrt(e2^2 - e1^2 sin^2 ph)
            pha, phb = math.asin(ya / e1), math.asin(yb / e1)

            def g(ph):
                ss = e1 * np.sin(ph)
                return 1j * self.num(kind, 1j * ss) / np.sqrt(e2 * e2 - ss * ss)

            return adaptive_gl(g, pha, phb, tol, order)

        if piece.kind in ("axis_up", "axis_down"):
            # zeta = +-i e2 cosh ps; dzeta/R = -+i dps / sqrt(e2^2 cosh^2 ps - e1^2)
            up = piece.kind == "axis_up"
            psa = _acosh(abs(ya) / e2)
            psb = _acosh(abs(yb) / e2)
            pref = -1j if up else 1j
            zsgn = 1j if up else -1j

            def g(ps):
                ch = np.cosh(ps)
                ss = e2 * ch
                return pref * self.num(kind, zsgn * ss) / np.sqrt(ss * ss - e1 * e1)

            return adaptive_gl(g, psa, psb, tol, order)

        raise ValueError(f"unknown piece kind {piece.kind!r}")

    def _th_of(self, y):
        """Band parameter: th with s(th) = y, monotone on [eta1, eta2]."""
        e1, e2 = self.bands.eta1, self.bands.eta2
        r = (y * y - e1 * e1) / (e2 * e2 - e1 * e1)
        return math.asin(min(1.0, max(0.0, math.sqrt(max(r, 0.0)))))

    # -- Abelian integrals -----------------------------------------------------

    def _integral(self, kind, pt: ContourPoint):
        key = (kind, complex(pt.lam), pt.side)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        total = 0.0 + 0.0j
        for piece in self.path_to(pt):
            val, _ = self._integrate_piece(kind, piece)
            total += val
        self._memo[key] = total
        return total

    def p(self, pt: ContourPoint):
        return self._integral("p", pt)

    def q(self, pt: ContourPoint):
        return self._integral("q", pt)

    def J(self, pt: ContourPoint):
        return self._integral("J", pt)

    def gamma(self, pt: ContourPoint):
        lam = complex(pt.lam)
        region = locate(lam, self)
        e1s, e2s = self.bands.eta1 ** 2, self.bands.eta2 ** 2
        if region in ("band1", "band2"):
            if pt.side == OFF:
                raise ValueError("side tag required on a cut")
            y = lam.imag
            mag = ((y * y - e1s) / (e2s - y * y)) ** 0.25
            # one-sided ratio sits just off R_-: arg -> -side*pi on Sigma1, +side*pi on Sigma2
            sgn = -pt.side if region == "band1" else pt.side
            return mag * complex(math.cos(sgn * math.pi / 4), math.sin(sgn * math.pi / 4))
        w = (lam * lam + e1s) / (lam * lam + e2s)
        return complex(w) ** 0.25

    def x_period(self) -> float:
        """Spatial period 2K(m)/eta2 of the background."""
        return 2.0 * self.em.K / self.bands.eta2

    # -- cycle quadratures (used by the verification tests) --------------------

    def cycle_A(self, kind):
        """A-cycle integral: twice the through-gap traverse -i*eta1 -> i*eta1."""
        e1 = self.bands.eta1
        val, err = self._integrate_piece(kind, Piece("gap", -1j * e1, 1j * e1))
        return 2.0 * val, 2.0 * err

    def cycle_B(self, kind):
        """B-cycle integral: twice the plus-side traverse i*eta1 -> i*eta2."""
        e1, e2 = self.bands.eta1, self.bands.eta2
        val, err = self._integrate_piece(kind, Piece("band1", 1j * e1, 1j * e2, side=PLUS))
        return 2.0 * val, 2.0 * err


def _acosh(x):
    return math.log(x + math.sqrt((x - 1.0) * (x + 1.0))) if x > 1.0 else 0.0


# ---------------------------------------------------------------------------
# spec-level operation wrappers


def surface_R(pt: ContourPoint, s: SurfaceData) -> complex:
    return s.R_point(pt)


def quasi_momentum_p(pt: ContourPoint, s: SurfaceData) -> complex:
    return s.p(pt)


def quasi_energy_q(pt: ContourPoint, s: SurfaceData) -> complex:
    return s.q(pt)


def abel_J(pt: ContourPoint, s: SurfaceData) -> complex:
    return s.J(pt)


def gamma4(pt: ContourPoint, s: SurfaceData) -> complex:
    return s.gamma(pt)


def periods(bands: BandParams):
    """(Omega1, Omega2, tau) closed forms for one background."""
    s = SurfaceData(bands)
    return s.Omega1, s.Omega2, s.tau
