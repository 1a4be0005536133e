"""Partial transmission factorization and Riemann-Hilbert jump data.

The scattering coefficients enter the normalized vector problem only
through the scalar function

    h(lambda) = exp{ -i (x_0^l - x_0^r) lambda + (1/2 pi i) S(lambda) },

where S collects Cauchy integrals of fixed logarithms over the jump
contour: ln(-b1(-)/b1(+)) on Sigma_1^r \\ Sigma_1^l, ln(-b1(-)/b1*(-)) on
the band intersection, ln(-b1*(+)/b1*(-)) on Sigma_1^l \\ Sigma_1^r, the
mirror integrands on the Sigma_2 pieces, and ln(1 - |r|^2), r = b/a, on
the real axis.  The boundary relations b1(+) = i a(-) and b1*(+) = -i a(-)
make every band integrand computable from a single minus-side sample, and
unimodularity of the ratios makes the band logarithms purely imaginary,
say i phi(tau).  Conjugation symmetry gives the Sigma_2 integrand the
same phi at the mirror node, so each band pair contributes

    int phi(tau) [ 1/(lambda - i tau) + 1/(lambda + i tau) ] dtau

with one solve per node.  Quadrature clusters Gauss-Legendre nodes by the
substitution tau = end -+ s^2 toward both ends of every piece, excises a
thin window at each band endpoint (the forward solver rejects points
within 1e-3 of an endpoint) and restores it with an exact segment kernel
times the extrapolated end value of the integrand.  The real axis gets
the same treatment with zeta = s^2 node clustering toward the origin,
where the integrand has an integrable ln|zeta| singularity (a generically
has a simple pole there): the origin window is restored from the local
model c1 ln|zeta| + c0 through exact kernels, a dilogarithm carrying the
logarithmic moment, and the mesh is truncated at a cutoff with a fitted
power tail.

The branch of phi (the 2 pi n of each piece's unwrapped phase) is pinned
by the endpoint behavior of h: at a band endpoint carried by one piece
only, h ~ (lambda - i eta)^{-1/4} at right-band endpoints and ^{+1/4} at
left-band endpoints, which forces phi -> -+ 2 pi e(eta) at the lower and
upper piece ends, e being the summed exponent.  Where two pieces meet,
phi_below(top) - phi_above(bottom) = 2 pi e propagates the pinning to
pieces without free ends, and every constraint is re-checked after
shifting.

On the factorization a = a1 a2 with a1 = (a/h)^{1/2}, a2 = (a h)^{1/2}:
branches are continued from i infinity (where a1 e^{-i(x_0^l - x_0^r)
lambda} -> 1) down vertical rays, with the square root followed by
continuity, a detector that bisects any step whose a/h phase moves by
more than pi/2, and small lateral detours around the fourth-root band
endpoints when the ray runs down the imaginary axis itself.  a2 is always
reported as a/a1, so a1 a2 = a holds exactly.

The reflection coefficients attach to the oriented contour:

    r1 = (a2(-)/a1(-)) e^{-2 i x_0^r lambda} / (a2(-) a1(+) - i b1*(-)),
    r2 = (a1(-)/a2(-)) e^{+2 i x_0^r lambda} / (a1(-) a2(+) + i b1(-)),
    rho = b e^{-2 i x_0^r lambda} / (a1 conj(a2))  on the real axis,

and the value reported on the minus side of a band is the negative of the
plus-side value.  That orientation convention is what makes the one-sided
jump matrices inverses of each other, V(lambda_-)^{-1} = V(lambda_+),
identically in the sampled coefficients.  jump_matrix_X assembles the
jump of the row problem for the phase theta = x lambda + c t lambda^3;
verify_M_jumps checks the matrix problem M_+ = M_- V^(M) directly against
forward Jost solves; reconstruct_u recovers the datum from the
large-lambda asymptotics of the row problem.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import spence

from .jost import ProximityError, jost_phi_column
from .scattering import (
    BandGeometry,
    RegionError,
    ScatteringTable,
    band_geometry,
    classify_region,
    compute_ab,
)
from .scenario import Scenario
from .surface import MINUS, OFF, PLUS, ContourPoint

__all__ = [
    "ResolutionError",
    "BranchError",
    "DegenerateFactorizationError",
    "AsymptoticsError",
    "AuxiliaryH",
    "FactorPair",
    "ReflectionSample",
    "PhaseTheta",
    "JumpSample",
    "MJumpReport",
    "CauchyTable",
    "build_cauchy_table",
    "h_eval",
    "factor_a1a2",
    "reflection_coeffs",
    "jump_matrix_X",
    "verify_M_jumps",
    "reconstruct_u",
    "reflection_to_csv",
    "jumps_to_csv",
]

_AXIS_TOL = 1e-12
_WINDOW = 1.2e-3        # band-end exclusion half-width (> solver's 1e-3)
_REAL_WINDOW = 1.1e-3   # origin exclusion on the real axis
_CONTOUR_CLEAR = 1e-3   # off-contour evaluations must keep this distance
_GL = np.polynomial.legendre.leggauss(8)
_GL16 = np.polynomial.legendre.leggauss(16)


class ResolutionError(RuntimeError):
    """The quadrature mesh cannot resolve the requested evaluation."""


class BranchError(RuntimeError):
    """Square-root continuation along a ray could not be disambiguated."""


class DegenerateFactorizationError(RuntimeError):
    """A reflection denominator (or 1 + r1 r2) vanished."""


class AsymptoticsError(RuntimeError):
    """Large-lambda limit did not settle within the Richardson ladder."""


# -- result records ----------------------------------------------------------


@dataclass(frozen=True)
class AuxiliaryH:
    """h at one point with the a-posteriori quadrature error bound."""

    lam: ContourPoint
    h: complex
    quadrature_error: float


@dataclass(frozen=True)
class FactorPair:
    """a1 and a2 = a/a1 at one point, branch continued from i infinity."""

    lam: ContourPoint
    a1: complex
    a2: complex
    est_error: float

    @property
    def a(self) -> complex:
        return self.a1 * self.a2


@dataclass(frozen=True)
class ReflectionSample:
    """Reflection coefficients defined at one contour point.

    Band coefficients are attached to the oriented contour: the minus-side
    value is minus the plus-side value.  Fields outside the point's region
    are None (rho lives on the real axis, r1 on Sigma_1^l, r2 on
    Sigma_1^r, both on the band intersection).
    """

    lam: ContourPoint
    r1: Optional[complex] = None
    r2: Optional[complex] = None
    rho: Optional[complex] = None
    est_error: float = 0.0

    def to_row(self):
        def reim(z):
            return ("", "") if z is None else (repr(complex(z).real),
                                               repr(complex(z).imag))

        lam = complex(self.lam.lam)
        row = [repr(lam.real), repr(lam.imag), str(self.lam.side)]
        for z in (self.r1, self.r2, self.rho):
            row.extend(reim(z))
        row.append(repr(self.est_error))
        return row


_REFL_COLUMNS = ("lam_re", "lam_im", "side", "r1_re", "r1_im",
                 "r2_re", "r2_im", "rho_re", "rho_im", "est_error")


@dataclass(frozen=True)
class PhaseTheta:
    """theta(lambda) = x lambda + t_coefficient t lambda^3 (odd in lambda)."""

    x: float
    t: float = 0.0
    t_coefficient: float = 4.0

    def __call__(self, lam: complex) -> complex:
        lam = complex(lam)
        return self.x * lam + self.t_coefficient * self.t * lam ** 3


@dataclass(frozen=True)
class JumpSample:
    """One evaluated jump matrix with its piece tag, for CSV export."""

    lam: ContourPoint
    piece: str
    V: tuple  # ((v11, v12), (v21, v22))

    @property
    def det(self) -> complex:
        (v11, v12), (v21, v22) = self.V
        return v11 * v22 - v12 * v21

    def to_row(self):
        lam = complex(self.lam.lam)
        row = [repr(lam.real), repr(lam.imag), str(self.lam.side), self.piece]
        for r in self.V:
            for z in r:
                row.extend([repr(complex(z).real), repr(complex(z).imag)])
        d = self.det
        row.extend([repr(d.real), repr(d.imag)])
        return row


_JUMP_COLUMNS = ("lam_re", "lam_im", "side", "piece",
                 "v11_re", "v11_im", "v12_re", "v12_im",
                 "v21_re", "v21_im", "v22_re", "v22_im",
                 "det_re", "det_im")


# -- quadrature meshes --------------------------------------------------------


def _panel_nodes(s_lo, s_hi, n_panels):
    """Gauss-Legendre nodes/weights on [s_lo, s_hi] split into panels."""
    x, w = _GL
    edges = np.linspace(s_lo, s_hi, n_panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    s = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    return s, ws


def _half_mesh(a, b, end, window, n_panels):
    """tau nodes on the half-interval [a, b], clustered quadratically at
    the designated end ('lo' clusters at a, 'hi' at b)."""
    span = b - a
    s, ws = _panel_nodes(math.sqrt(window), math.sqrt(span), n_panels)
    tau = a + s * s if end == "lo" else b - s * s
    return tau, 2.0 * s * ws


@dataclass
class _PieceMesh:
    tag: str
    lo: float
    hi: float
    window: float
    tau: np.ndarray
    phi: np.ndarray
    wts: np.ndarray
    tau_c: np.ndarray
    phi_c: np.ndarray
    wts_c: np.ndarray
    phi_lo: float = 0.0
    phi_hi: float = 0.0
    mod_dev: float = 0.0
    anchor_residual: float = 0.0

    def end_phis(self):
        """Quadratic-in-s extrapolation of phi to both true endpoints."""
        s_lo = np.sqrt(self.tau - self.lo)
        s_hi = np.sqrt(self.hi - self.tau)
        lo_val = _extrapolate(s_lo[:4], self.phi[:4])
        hi_val = _extrapolate(s_hi[-4:], self.phi[-4:])
        return lo_val, hi_val


def _extrapolate(s, phi):
    return float(np.polyval(np.polyfit(s, phi, 2), 0.0))


@dataclass
class _RealMesh:
    zeta: np.ndarray
    L: np.ndarray
    wts: np.ndarray
    zeta_c: np.ndarray
    L_c: np.ndarray
    wts_c: np.ndarray
    window: float
    cutoff: float
    c0: float
    c1: float
    p_tail: float
    L_tail: float


_BAND_RATIO = {
    # logarithm argument from a single minus-side sample, via the exact
    # boundary relations b1(+) = i a(-) and b1*(+) = -i a(-)
    "sigma1r_only": lambda s: -s.b1 / (1j * s.a),
    "band_intersection": lambda s: -s.b1 / s.b1_star,
    "sigma1l_only": lambda s: (1j * s.a) / s.b1_star,
}


class CauchyTable(ScatteringTable):
    """Scattering samples at Cauchy-quadrature nodes, plus the mesh data.

    The inherited sample list holds genuine one-sided samples at every
    quadrature node (so the table exports like any scattering table); the
    piece meshes carry the unwrapped band phases and the real-axis
    log-integrand actually consumed by the exponent integrals.
    """

    def __init__(self, scenario_hash, samples, scn, geom, pieces, real_mesh,
                 n_panel, x_real, trivial):
        super().__init__(scenario_hash, samples)
        self.scenario = scn
        self.geometry = geom
        self.pieces = pieces
        self.real_mesh = real_mesh
        self.n_panel = n_panel
        self.x_real = x_real
        self.trivial = trivial
        self.delta_x0 = scn.left.x0 - scn.right.x0

    def anchor_residual(self) -> float:
        return max((p.anchor_residual for p in self.pieces), default=0.0)


def _endpoint_exponent(scn, tau):
    """Exponent of h at the band endpoint i tau: -1/4 per right-band end,
    +1/4 per left-band end (summed where endpoints coincide)."""
    e = 0.0
    for eta in (scn.right.eta1, scn.right.eta2):
        if abs(tau - eta) < 1e-9:
            e -= 0.25
    for eta in (scn.left.eta1, scn.left.eta2):
        if abs(tau - eta) < 1e-9:
            e += 0.25
    return e


def _pin_phases(meshes, scn):
    """Shift each piece's unwrapped phase by 2 pi n so the end values meet
    the endpoint exponents of h; junctions propagate the pinning."""
    for m in meshes:
        m.phi_lo, m.phi_hi = m.end_phis()

    def junction_partner(m, which):
        t = m.lo if which == "lo" else m.hi
        for other in meshes:
            if other is m:
                continue
            if which == "lo" and abs(other.hi - t) < 1e-9:
                return other
            if which == "hi" and abs(other.lo - t) < 1e-9:
                return other
        return None

    pinned = {}
    for m in meshes:
        cands = []
        if junction_partner(m, "lo") is None:
            anchor = -2.0 * math.pi * _endpoint_exponent(scn, m.lo)
            cands.append(round((anchor - m.phi_lo) / (2.0 * math.pi)))
        if junction_partner(m, "hi") is None:
            anchor = 2.0 * math.pi * _endpoint_exponent(scn, m.hi)
            cands.append(round((anchor - m.phi_hi) / (2.0 * math.pi)))
        if cands:
            if len(set(cands)) > 1:
                raise ResolutionError(
                    f"free-end anchors of piece {m.tag} ({m.lo:g},{m.hi:g}) "
                    f"disagree: shifts {sorted(set(cands))}")
            pinned[id(m)] = cands[0]

    # propagate through junctions: phi_below(top) - phi_above(bottom)
    # equals 2 pi e at the shared endpoint
    changed = True
    while changed:
        changed = False
        for m in meshes:
            if id(m) in pinned:
                continue
            below = junction_partner(m, "lo")
            if below is not None and id(below) in pinned:
                req = (below.phi_hi + 2.0 * math.pi * pinned[id(below)]
                       - 2.0 * math.pi * _endpoint_exponent(scn, m.lo))
                pinned[id(m)] = round((req - m.phi_lo) / (2.0 * math.pi))
                changed = True
                continue
            above = junction_partner(m, "hi")
            if above is not None and id(above) in pinned:
                req = (above.phi_lo + 2.0 * math.pi * pinned[id(above)]
                       + 2.0 * math.pi * _endpoint_exponent(scn, m.hi))
                pinned[id(m)] = round((req - m.phi_hi) / (2.0 * math.pi))
                changed = True
    if len(pinned) != len(meshes):
        raise ResolutionError("phase pinning did not reach every piece")

    for m in meshes:
        shift = 2.0 * math.pi * pinned[id(m)]
        m.phi = m.phi + shift
        m.phi_lo += shift
        m.phi_hi += shift
        # coarse nodes snap to the shifted fine phase
        ref = np.interp(m.tau_c, m.tau, m.phi)
        m.phi_c = m.phi_c + 2.0 * math.pi * np.round(
            (ref - m.phi_c) / (2.0 * math.pi))

    # residuals of every anchor/junction constraint (diagnostic + guard)
    worst = 0.0
    for m in meshes:
        if junction_partner(m, "lo") is None:
            worst = max(worst, abs(
                m.phi_lo + 2.0 * math.pi * _endpoint_exponent(scn, m.lo)))
        if junction_partner(m, "hi") is None:
            worst = max(worst, abs(
                m.phi_hi - 2.0 * math.pi * _endpoint_exponent(scn, m.hi)))
        below = junction_partner(m, "lo")
        if below is not None:
            worst = max(worst, abs(
                below.phi_hi - m.phi_lo
                - 2.0 * math.pi * _endpoint_exponent(scn, m.lo)))
    for m in meshes:
        m.anchor_residual = worst
    if worst > 0.9:
        raise ResolutionError(
            f"end phases miss their anchors by {worst:.3f} rad; the band "
            "mesh is too coarse to pin the logarithm branches")


def build_cauchy_table(scn: Scenario, *, n_panel: int = 6,
                       x_real: float = 12.0,
                       workers: int = 1) -> CauchyTable:
    """Sample the log-integrands on a Cauchy-ready mesh.

    n_panel Gauss panels per half piece (half that many on the coarse
    companion mesh that feeds the error estimate); the real axis is
    truncated at x_real with a fitted power tail.  A trivial junction
    needs no mesh: h = e^{-i (x_0^l - x_0^r) lambda} exactly.
    """
    geom = band_geometry(scn)
    trivial = scn.is_trivial("left")
    if trivial:
        return CauchyTable(scn.scenario_hash, [], scn, geom, [], None,
                           n_panel, x_real, True)

    points = []
    plan = []   # aligned blocks: (tag, interval, level, tau, wts)
    upper = [(tag, iv) for tag, iv in geom.pieces() if iv[0] > 0]

    fine_n, coarse_n = n_panel, max(2, n_panel // 2)
    for tag, (lo, hi) in upper:
        mid = 0.5 * (lo + hi)
        for level, n in (("f", fine_n), ("c", coarse_n)):
            for end, a, b in (("lo", lo, mid), ("hi", mid, hi)):
                tau, wts = _half_mesh(a, b, end, _WINDOW, n)
                plan.append((tag, (lo, hi), level, tau, wts))
                points.extend(ContourPoint(1j * float(t), MINUS)
                              for t in tau)

    s_lo, s_hi = math.sqrt(_REAL_WINDOW), math.sqrt(x_real)
    n_real_f = max(4, int(math.ceil((s_hi - s_lo) / 0.30)))
    n_real_c = max(2, int(math.ceil((s_hi - s_lo) / 0.60)))
    for level, n in (("f", n_real_f), ("c", n_real_c)):
        s, ws = _panel_nodes(s_lo, s_hi, n)
        zeta, wts = s * s, 2.0 * s * ws
        plan.append(("real_line", None, level, zeta, wts))
        points.extend(ContourPoint(float(z)) for z in zeta)

    samples = _solve_points(points, scn, workers)

    band_parts, real_parts = {}, {}
    idx = 0
    for tag, iv, level, tau, wts in plan:
        block = samples[idx:idx + len(tau)]
        idx += len(tau)
        if tag == "real_line":
            mod = np.array([abs(s.a) for s in block])
            real_parts[level] = (tau, -2.0 * np.log(mod), wts)
            continue
        ratio = np.array([_BAND_RATIO[tag](s) for s in block])
        band_parts.setdefault((tag, iv, level), []).append(
            (tau, np.angle(ratio), wts,
             float(np.max(np.abs(np.abs(ratio) - 1.0)))))

    meshes = []
    for tag, (lo, hi) in upper:
        def gather(level):
            halves = band_parts[(tag, (lo, hi), level)]
            tau = np.concatenate([h[0] for h in halves])
            phi = np.concatenate([h[1] for h in halves])
            wts = np.concatenate([h[2] for h in halves])
            order = np.argsort(tau)
            dev = max(h[3] for h in halves)
            return tau[order], np.unwrap(phi[order]), wts[order], dev

        tau_f, phi_f, wts_f, dev_f = gather("f")
        tau_c, phi_c, wts_c, dev_c = gather("c")
        meshes.append(_PieceMesh(
            tag=tag, lo=lo, hi=hi, window=_WINDOW,
            tau=tau_f, phi=phi_f, wts=wts_f,
            tau_c=tau_c, phi_c=phi_c, wts_c=wts_c,
            mod_dev=max(dev_f, dev_c)))

    _pin_phases(meshes, scn)

    zf, Lf, wf = real_parts["f"]
    zc, Lc, wc = real_parts["c"]
    # origin model L ~ c1 ln zeta + c0 (c1 = 2 for a simple pole of a)
    c1 = (Lf[1] - Lf[0]) / (math.log(zf[1]) - math.log(zf[0]))
    c1 = min(max(float(c1), 0.0), 2.5)
    c0 = float(Lf[0]) - c1 * math.log(zf[0])
    # tail model L ~ L(X) (X / zeta)^p from the outermost stretch
    i_lo = int(np.searchsorted(zf, 0.6 * x_real))
    i_lo = min(max(i_lo, 0), len(zf) - 2)
    p = ((math.log(max(abs(Lf[i_lo]), 1e-300))
          - math.log(max(abs(Lf[-1]), 1e-300)))
         / (math.log(zf[-1]) - math.log(zf[i_lo])))
    p = min(max(p, 1.0), 4.5)
    real_mesh = _RealMesh(zeta=zf, L=Lf, wts=wf, zeta_c=zc, L_c=Lc, wts_c=wc,
                          window=_REAL_WINDOW, cutoff=x_real,
                          c0=c0, c1=c1, p_tail=p, L_tail=float(Lf[-1]))

    return CauchyTable(scn.scenario_hash, samples, scn, geom, meshes,
                       real_mesh, n_panel, x_real, False)


def _solve_points(points, scn, workers):
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(partial(_solve_one, scn=scn), points,
                                 chunksize=8))
    return [compute_ab(pt, scn) for pt in points]


def _solve_one(pt, scn):
    return compute_ab(pt, scn)


# -- exponent evaluation ------------------------------------------------------


def _k1_segment(lam, t0, t1):
    """int dtau / (lambda - i tau) over [t0, t1], ratio-form logarithm
    (a straight segment subtends less than pi from any outside point, so
    the principal branch of the ratio is always the correct increment)."""
    return 1j * np.log((lam - 1j * t1) / (lam - 1j * t0))


def _k2_segment(lam, t0, t1):
    """int dtau / (lambda + i tau) over [t0, t1]."""
    return -1j * np.log((lam + 1j * t1) / (lam + 1j * t0))


def _dilog(z):
    """Li_2(z); scipy's spence is Li_2(1 - z)."""
    return spence(1.0 - z)


def _on_piece(mesh, lam):
    return (abs(lam.real) <= _AXIS_TOL * max(1.0, abs(lam))
            and mesh.lo <= lam.imag <= mesh.hi)


def _band_exponent(table, lam, side, level):
    """Sum over band pairs of int F/(zeta - lambda) d zeta, with Plemelj
    handling on the containing piece; also returns the magnitude of the
    endpoint-window model terms."""
    total = 0.0 + 0.0j
    wsum = 0.0
    for mesh in table.pieces:
        tau = mesh.tau if level == "f" else mesh.tau_c
        phi = mesh.phi if level == "f" else mesh.phi_c
        wts = mesh.wts if level == "f" else mesh.wts_c
        lo, hi, wd = mesh.lo, mesh.hi, mesh.window
        win_lo = mesh.phi_lo * (_k1_segment(lam, lo, lo + wd)
                                + _k2_segment(lam, lo, lo + wd))
        win_hi = mesh.phi_hi * (_k1_segment(lam, hi - wd, hi)
                                + _k2_segment(lam, hi - wd, hi))
        wsum += abs(win_lo) + abs(win_hi)
        # the Sigma_2 mirror kernel is regular on the closed upper half
        # plane; F = i phi and dzeta = i dtau cancel to a real-weight sum
        k2 = complex(np.sum(phi * wts / (lam + 1j * tau)))
        if _on_piece(mesh, lam):
            if side == OFF:
                raise ResolutionError(
                    "evaluation on a band piece needs a side tag")
            t0 = lam.imag
            if not (lo + wd < t0 < hi - wd):
                raise ResolutionError(
                    f"lambda = {lam} lies in the endpoint exclusion window "
                    f"of the piece ({lo:g}, {hi:g})")
            phi0 = _phi_at(table, mesh, t0)
            sub = float(np.sum((phi - phi0) * wts / (t0 - tau)))
            pv = phi0 * math.log((t0 - lo - wd) / (hi - wd - t0))
            k1 = -1j * (sub + pv) - side * math.pi * phi0
        else:
            k1 = complex(np.sum(phi * wts / (lam - 1j * tau)))
        total += k1 + k2 + win_lo + win_hi
    return total, wsum


def _phi_at(table, mesh, t0):
    """The band phase at an evaluation point, unwrapped against the mesh."""
    s = compute_ab(ContourPoint(1j * t0, MINUS), table.scenario)
    raw = float(np.angle(_BAND_RATIO[mesh.tag](s)))
    near = float(np.interp(t0, mesh.tau, mesh.phi))
    return raw + 2.0 * math.pi * round((near - raw) / (2.0 * math.pi))


def _real_exponent(table, lam, level):
    """int ln(1 - |r|^2)/(zeta - lambda) over the real axis (boundary
    values from the upper side), with origin-window and tail models."""
    rm = table.real_mesh
    zeta = rm.zeta if level == "f" else rm.zeta_c
    L = rm.L if level == "f" else rm.L_c
    wts = rm.wts if level == "f" else rm.wts_c
    delta, X = rm.window, rm.cutoff
    on_axis = abs(lam.imag) <= _AXIS_TOL * max(1.0, abs(lam))
    lam_u = lam if not on_axis else lam + 1e-13j

    if on_axis:
        lam0 = lam.real
        if abs(lam0) > 0.9 * X:
            raise ResolutionError(
                f"real evaluation at |lambda| = {abs(lam0):g} exceeds 90% "
                f"of the mesh cutoff {X:g}; rebuild with a larger x_real")
        s0 = compute_ab(ContourPoint(lam0), table.scenario)
        L0 = -2.0 * math.log(abs(s0.a))
        if abs(lam0) >= delta:
            if lam0 > 0:
                nodes = (np.sum((L - L0) * wts / (zeta - lam0))
                         + L0 * math.log((X - lam0) / (lam0 - delta))
                         + 1j * math.pi * L0
                         - np.sum(L * wts / (zeta + lam0)))
            else:
                nodes = (np.sum(L * wts / (zeta - lam0))
                         - np.sum((L - L0) * wts / (zeta + lam0))
                         - L0 * math.log((X + lam0) / (-lam0 - delta))
                         + 1j * math.pi * L0)
        else:
            # inside the origin window: both node sums are regular; the
            # residue i pi L emerges from the window kernel below
            nodes = (np.sum((L - L0) * wts / (zeta - lam0))
                     + L0 * math.log((X - lam0) / (delta - lam0))
                     - np.sum(L * wts / (zeta + lam0)))
    else:
        nodes = np.sum(L * wts * (1.0 / (zeta - lam_u)
                                  - 1.0 / (zeta + lam_u)))

    # origin window from the model c1 ln|zeta| + c0
    A = np.log((lam_u - delta) / (lam_u + delta))
    z = delta / lam_u
    w_log = math.log(delta) * A + _dilog(z) - _dilog(-z)
    window = rm.c0 * np.log((delta - lam_u) / (-delta - lam_u)) + rm.c1 * w_log

    tail = _tail_term(rm, lam_u, rm.p_tail)
    tail_var = abs(tail - _tail_term(rm, lam_u, max(1.0, rm.p_tail - 0.7)))
    return complex(nodes) + complex(window) + tail, abs(window), tail_var


def _tail_term(rm, lam_u, p):
    """int_X^inf L_tail (X/zeta)^p [1/(zeta - lambda) - 1/(zeta + lambda)]
    d zeta via zeta = X/s: 2 lambda L_tail X int_0^1 s^p/(X^2 - lambda^2
    s^2) ds."""
    s, w = _GL16
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    X = rm.cutoff
    vals = s ** p / (X * X - (lam_u * s) ** 2)
    return 2.0 * lam_u * rm.L_tail * X * complex(np.sum(w * vals))


def _exponent(table, lam, side, level):
    band, wsum = _band_exponent(table, lam, side, level)
    real, wreal, tail_var = _real_exponent(table, lam, level)
    S = band + real
    E = -1j * table.delta_x0 * lam + S / (2j * math.pi)
    return E, (wsum + wreal) / (2.0 * math.pi), tail_var / (2.0 * math.pi)


def _min_contour_distance(table, lam):
    d = abs(lam.imag)  # the real axis
    for mesh in table.pieces:
        for sgn in (1.0, -1.0):
            lo, hi = sorted((sgn * mesh.lo, sgn * mesh.hi))
            if lo <= lam.imag <= hi:
                dp = abs(lam.real)
            else:
                dp = min(abs(lam - 1j * lo), abs(lam - 1j * hi))
            d = min(d, dp)
    return d


def h_eval(pt: ContourPoint, table: ScatteringTable,
           geom: Optional[BandGeometry] = None) -> AuxiliaryH:
    """The partial transmission function h at pt.

    pt must either keep a distance >= 1e-3 from the jump contour, or sit
    on an upper band piece (side tag required, outside the endpoint
    windows), or on the real axis (|lambda| >= 1e-3; the reported value is
    the boundary value from the upper half plane).  Lower-half-plane
    points use h(lambda) = 1/conj(h(conj lambda)).  The quadrature_error
    field majorizes the fine/coarse mesh difference plus the window and
    tail model terms.
    """
    if not isinstance(table, CauchyTable):
        raise TypeError("h_eval needs the quadrature table produced by "
                        "build_cauchy_table")
    if geom is not None and geom != table.geometry:
        raise ValueError("geometry does not match the table's scenario")
    if not isinstance(pt, ContourPoint):
        pt = ContourPoint(complex(pt))
    lam = complex(pt.lam)

    if table.trivial:
        return AuxiliaryH(pt, cmath.exp(-1j * table.delta_x0 * lam), 0.0)
    if abs(lam) < _CONTOUR_CLEAR:
        raise ResolutionError("evaluation within 1e-3 of the origin")
    if lam.imag < -_AXIS_TOL * max(1.0, abs(lam)):
        # the exponent is Schwarz-odd: h(lambda) = 1/conj(h(conj lambda))
        mirror = h_eval(ContourPoint(lam.conjugate(), pt.side), table)
        h = 1.0 / np.conj(mirror.h)
        err = mirror.quadrature_error * abs(h) / max(abs(mirror.h), 1e-300)
        return AuxiliaryH(pt, complex(h), float(err))

    on_axis = abs(lam.imag) <= _AXIS_TOL * max(1.0, abs(lam))
    on_band = any(_on_piece(m, lam) for m in table.pieces)
    if not on_axis and not on_band:
        d = _min_contour_distance(table, lam)
        if d < _CONTOUR_CLEAR:
            raise ResolutionError(
                f"lambda = {lam} is {d:.2e} from the jump contour; evaluate "
                "on the contour with a side tag instead")

    E_f, w_f, t_f = _exponent(table, lam, pt.side, "f")
    E_c, _, _ = _exponent(table, lam, pt.side, "c")
    h = cmath.exp(E_f)
    mod_dev = max((m.mod_dev for m in table.pieces), default=0.0)
    qerr = (abs(h - cmath.exp(E_c))
            + abs(h) * (0.05 * w_f + t_f + mod_dev))
    return AuxiliaryH(pt, h, float(qerr))


# -- the splitting a = a1 a2 --------------------------------------------------

_RAY_STEP = 0.1
_DETOUR = 0.02
_HOP = 2.5e-3
_RAY_CACHE: dict = {}
_POINT_CACHE: dict = {}


def _table_key(table):
    return (table.scenario_hash, table.n_panel, round(table.x_real, 6))


def _band_endpoints(scn):
    return sorted({scn.left.eta1, scn.left.eta2,
                   scn.right.eta1, scn.right.eta2})


def _ray_heights(table, re, im_target):
    """Descent heights from above the bands down to im_target: sparse in
    the phase-quiet region above the band stack, dense across it."""
    scn = table.scenario
    eta_top = max(scn.left.eta2, scn.right.eta2)
    eta_bot = min(scn.left.eta1, scn.right.eta1)
    start = max(3.0 * eta_top, 1.25 * im_target)
    hs = [start]
    t = start
    while t > im_target + 1e-12:
        if t > eta_top + 0.5:
            step = max(0.5, 0.25 * t)
        elif t > eta_bot - 0.3:
            step = _RAY_STEP
        else:
            step = 0.15
        t = max(im_target, t - step)
        hs.append(t)
    near = max(abs(re), _HOP)
    extra = []
    for eta in _band_endpoints(scn):
        if im_target - 1e-12 <= eta <= start:
            for k in (1.0, 2.0, 4.0, 8.0):
                for sgn in (1.0, -1.0):
                    h = eta + sgn * k * near
                    if im_target <= h <= start:
                        extra.append(h)
            if abs(re) >= _CONTOUR_CLEAR - 1e-15:
                extra.append(eta)   # abreast of the endpoint: |re| >= 1e-3
    hs = sorted({round(h, 12) for h in hs + extra}, reverse=True)
    return [h for h in hs if h >= im_target - 1e-12]


def _ray_waypoints(table, re, im_target, side):
    """(lambda, side) samples of the descent path; on-axis rays take
    lateral detours around the fourth-root band endpoints."""
    heights = _ray_heights(table, re, im_target)
    if abs(re) > _AXIS_TOL:
        return [(complex(re, h), OFF) for h in heights]

    side_eff = MINUS if side == MINUS else PLUS
    detour_re = _DETOUR if side_eff == MINUS else -_DETOUR
    pieces = [(m.lo, m.hi) for m in table.pieces]

    def tag_for(h):
        for lo, hi in pieces:
            if lo + 1e-12 < h < hi - 1e-12:
                return side_eff
        return OFF

    cross = sorted((e for e in _band_endpoints(table.scenario)
                    if im_target + 1e-12 < e < heights[0]), reverse=True)
    out = []
    floor = heights[0] + 1.0
    for eta in cross:
        entry = eta + _HOP
        exit_ = max(eta - _HOP, im_target)
        for h in heights:
            if entry + 1e-12 < h < floor - 1e-12:
                out.append((complex(0.0, h), tag_for(h)))
        out.append((complex(0.0, entry), tag_for(entry)))
        out.append((complex(detour_re, entry), OFF))
        out.append((complex(detour_re, eta), OFF))
        out.append((complex(detour_re, exit_), OFF))
        out.append((complex(0.0, exit_), tag_for(exit_)))
        floor = exit_
    for h in heights:
        if h < floor - 1e-12:
            out.append((complex(0.0, h), tag_for(h)))
    last = out[-1][0]
    if abs(last.imag - im_target) > 1e-12 or abs(last.real) > _AXIS_TOL:
        out.append((complex(0.0, im_target), tag_for(im_target)))
    dedup = [out[0]]
    for item in out[1:]:
        if abs(item[0] - dedup[-1][0]) > 1e-12:
            dedup.append(item)
    return dedup


def _a_over_h(table, lam, side):
    pt = ContourPoint(lam, side)
    s = compute_ab(pt, table.scenario)
    aux = h_eval(pt, table)
    rel = aux.quadrature_error / max(abs(aux.h), 1e-300)
    return s.a / aux.h, s.a, max(s.est_error, 0.0) + rel


def _chain_to(table, re, side, im_target):
    """A continuity-tracked chain from i infinity ending exactly at
    (re, im_target).

    The master descent per ray is cached and extended downward; a target
    interior to an already deeper descent is reached by branching off the
    deepest cached sample above it, with the same endpoint-detour waypoint
    construction as the master walk.
    """
    key = (_table_key(table), round(re, 12),
           (MINUS if side == MINUS else PLUS) if abs(re) <= _AXIS_TOL
           else OFF)
    master = _RAY_CACHE.get(key)
    pieces = [(m.lo, m.hi) for m in table.pieces]
    side_eff = MINUS if side == MINUS else PLUS

    def tag_for(h):
        for lo, hi in pieces:
            if lo + 1e-12 < h < hi - 1e-12:
                return side_eff
        return OFF

    if master is None:
        master = []
        for lam, tag in _ray_waypoints(table, re, im_target, side):
            if not master:
                v, a_val, err = _a_over_h(table, lam, tag)
                root = cmath.sqrt(v)
                # normalization a1 e^{-i dx0 lambda} -> 1 at i infinity
                target = cmath.exp(1j * table.delta_x0 * lam)
                if abs(-root - target) < abs(root - target):
                    root = -root
                master.append((lam, v, root, a_val, err))
                continue
            master = _extend(table, master, lam, tag, tag_for, 0)
        _RAY_CACHE[key] = master
        return master

    if im_target > master[0][0].imag + 1e-12:
        # above the cached descent start, hence above every contour:
        # seed directly by the asymptotic normalization, as the master does
        lam = complex(re, im_target)
        v, a_val, err = _a_over_h(table, lam, OFF)
        root = cmath.sqrt(v)
        target = cmath.exp(1j * table.delta_x0 * lam)
        if abs(-root - target) < abs(root - target):
            root = -root
        return [(lam, v, root, a_val, err)]

    want = complex(re, im_target)
    if im_target < master[-1][0].imag - 1e-12:
        top = master[-1][0].imag
        for lam, tag in _ray_waypoints(table, re, im_target, side):
            if lam.imag < top - 1e-12:
                master = _extend(table, master, lam, tag, tag_for, 0)
        _RAY_CACHE[key] = master
    for i in range(len(master) - 1, -1, -1):
        if abs(master[i][0] - want) < 1e-9:
            return master[:i + 1]
    branch = [rec for rec in master if rec[0].imag >= im_target - 1e-12]
    if not branch:
        raise BranchError(f"branch ray did not reach the target {want}")
    top = branch[-1][0].imag
    for lam, tag in _ray_waypoints(table, re, im_target, side):
        if lam.imag < top - 1e-12:
            branch = _extend(table, branch, lam, tag, tag_for, 0)
    if abs(branch[-1][0] - want) > 1e-9:
        raise BranchError(f"branch ray did not reach the target {want}")
    return branch


def _extend(table, chain, lam, tag, tag_for, depth):
    try:
        v, a_val, err = _a_over_h(table, lam, tag)
    except (ProximityError, ResolutionError, RegionError) as exc:
        raise BranchError(
            f"cannot sample the branch ray at {lam}: {exc}") from exc
    return _settle(table, chain, lam, tag, v, a_val, err, tag_for, depth)


def _settle(table, chain, lam, tag, v, a_val, err, tag_for, depth):
    prev_lam, prev_v, prev_root = chain[-1][0], chain[-1][1], chain[-1][2]
    if abs(cmath.phase(v / prev_v)) > 0.5 * math.pi:
        if depth >= 14:
            raise BranchError(
                f"a/h phase step > pi/2 persists after bisection between "
                f"{prev_lam} and {lam}")
        mid = 0.5 * (prev_lam + lam)
        mid_tag = OFF if abs(mid.real) > _AXIS_TOL else tag_for(mid.imag)
        chain = _extend(table, chain, mid, mid_tag, tag_for, depth + 1)
        return _settle(table, chain, lam, tag, v, a_val, err, tag_for,
                       depth + 1)
    root = cmath.sqrt(v)
    if abs(root + prev_root) < abs(root - prev_root):
        root = -root
    chain.append((lam, v, root, a_val, err))
    return chain


def _ray_record(table, re, side, im_target):
    """The (lam, a/h, a1, a, err) record at height im_target on the ray."""
    side_key = ((MINUS if side == MINUS else PLUS)
                if abs(re) <= _AXIS_TOL else OFF)
    pkey = (_table_key(table), round(re, 12), side_key, round(im_target, 12))
    hit = _POINT_CACHE.get(pkey)
    if hit is None:
        hit = _chain_to(table, re, side, im_target)[-1]
        _POINT_CACHE[pkey] = hit
    return hit


_LANDING_MARGIN = 0.05


def _real_landing(table, re):
    """Track the branch to a real target closer to the origin than a
    vertical ray can pass the band stack.

    The vertical descent lands on the real axis at the margin abscissa
    (its bisections bottom out well above the off-contour clearance) and
    then walks along the axis: the upper boundary values of both a and h
    are continuous there, so plain continuity tracking applies, and the
    on-axis Plemelj evaluation stays resolved arbitrarily close to the
    origin window.
    """
    pkey = (_table_key(table), "land", round(re, 12))
    hit = _POINT_CACHE.get(pkey)
    if hit is not None:
        return hit
    sgn = 1.0 if re > 0 else -1.0
    chain = list(_chain_to(table, sgn * _LANDING_MARGIN, OFF, 0.0))

    def tag_off(_h):
        return OFF

    cur = _LANDING_MARGIN
    while cur > abs(re) * 1.6:
        cur *= 0.6
        chain = _extend(table, chain, complex(sgn * cur, 0.0), OFF,
                        tag_off, 0)
    chain = _extend(table, chain, complex(re, 0.0), OFF, tag_off, 0)
    _POINT_CACHE[pkey] = chain[-1]
    return chain[-1]


def factor_a1a2(pt: ContourPoint, table: ScatteringTable) -> FactorPair:
    """a1 = (a/h)^{1/2} and a2 = a/a1 at pt, branch from i infinity.

    The branch is carried down the vertical ray through pt; a point on a
    band piece keeps its side tag for the whole descent (an on-axis ray
    through a band without a side tag descends on the Re < 0 side).
    a1 a2 reproduces the sampled a exactly by construction.
    """
    if not isinstance(table, CauchyTable):
        raise TypeError("factor_a1a2 needs the table from build_cauchy_table")
    if not isinstance(pt, ContourPoint):
        pt = ContourPoint(complex(pt))
    lam = complex(pt.lam)
    scale = max(1.0, abs(lam))

    if lam.imag < -_AXIS_TOL * scale:
        raise RegionError("a1 and a2 live on the closed upper half plane")
    if table.trivial:
        a1 = cmath.exp(1j * table.delta_x0 * lam)
        s = compute_ab(pt, table.scenario)
        return FactorPair(pt, a1, s.a / a1, s.est_error)

    on_axis_v = abs(lam.real) <= _AXIS_TOL * scale
    on_axis_h = abs(lam.imag) <= _AXIS_TOL * scale
    if not on_axis_v and not on_axis_h and abs(lam.real) < _CONTOUR_CLEAR:
        raise ResolutionError(
            "off-axis evaluation closer than 1e-3 to the imaginary axis")

    if on_axis_h and not on_axis_v and abs(lam.real) < _LANDING_MARGIN:
        rec = _real_landing(table, lam.real)
    else:
        re = 0.0 if (on_axis_v and not on_axis_h) else lam.real
        rec = _ray_record(table, re, pt.side if re == 0.0 else OFF, lam.imag)
    _clam, _v, root, a_val, err = rec
    return FactorPair(pt, root, a_val / root,
                      float(err) * max(abs(root), abs(a_val)))


# -- reflection coefficients --------------------------------------------------


def reflection_coeffs(pt: ContourPoint,
                      table: ScatteringTable) -> ReflectionSample:
    """r1, r2 and rho at pt, whichever the region defines.

    r1 lives on Sigma_1^l and r2 on Sigma_1^r (both on the band
    intersection); each flips sign between the two sides of the oriented
    contour, the minus side carrying minus the plus-side value.  rho lives
    on the real axis and is side-free.  Points on Sigma_2 or off the
    contour are rejected (the Sigma_2 values are Schwarz conjugates of the
    upper-band ones).
    """
    if not isinstance(table, CauchyTable):
        raise TypeError("reflection_coeffs needs the table from "
                        "build_cauchy_table")
    if not isinstance(pt, ContourPoint):
        pt = ContourPoint(complex(pt))
    scn = table.scenario
    region = classify_region(pt, scn)
    lam = complex(pt.lam)
    x0r = scn.right.x0

    if region == "real_line":
        s = compute_ab(pt, scn)
        f = factor_a1a2(pt, table)
        rho = s.b * cmath.exp(-2j * x0r * lam) / (f.a1 * np.conj(f.a2))
        return ReflectionSample(pt, rho=complex(rho),
                                est_error=s.est_error + f.est_error)
    if region not in ("sigma1l_only", "sigma1r_only", "band_intersection"):
        raise RegionError(
            f"no reflection coefficient is defined in region {region}")

    sm = compute_ab(ContourPoint(lam, MINUS), scn)
    fm = factor_a1a2(ContourPoint(lam, MINUS), table)
    fp = factor_a1a2(ContourPoint(lam, PLUS), table)
    err = sm.est_error + fm.est_error + fp.est_error
    sgn = 1.0 if pt.side == PLUS else -1.0

    r1 = r2 = None
    if region in ("sigma1l_only", "band_intersection"):
        den = fm.a2 * fp.a1 - 1j * sm.b1_star
        if abs(den) < 1e-10 * max(1.0, abs(fm.a2 * fp.a1)):
            raise DegenerateFactorizationError(
                f"r1 denominator vanishes at lambda = {lam}")
        r1 = sgn * (fm.a2 / fm.a1) * cmath.exp(-2j * x0r * lam) / den
    if region in ("sigma1r_only", "band_intersection"):
        den = fm.a1 * fp.a2 + 1j * sm.b1
        if abs(den) < 1e-10 * max(1.0, abs(fm.a1 * fp.a2)):
            raise DegenerateFactorizationError(
                f"r2 denominator vanishes at lambda = {lam}")
        r2 = sgn * (fm.a1 / fm.a2) * cmath.exp(2j * x0r * lam) / den
    return ReflectionSample(pt, r1=r1, r2=r2, est_error=err)


# -- jump matrices of the row problem ----------------------------------------


def jump_matrix_X(phase: PhaseTheta, pt: ContourPoint,
                  refl: ReflectionSample) -> np.ndarray:
    """The 2x2 jump V^(X) at pt for the phase theta(x, t; lambda).

    refl must be the reflection sample at pt itself (upper band pieces,
    real axis) or at the mirror point conj(lambda) with the same geometric
    side (Sigma_2 pieces, whose coefficients are the Schwarz conjugates of
    the upper ones).  Raises DegenerateFactorizationError when 1 + r1 r2
    vanishes on the intersection.
    """
    if not isinstance(pt, ContourPoint):
        pt = ContourPoint(complex(pt))
    lam = complex(pt.lam)
    th = phase(lam)
    e_p = cmath.exp(2j * th)
    e_m = cmath.exp(-2j * th)

    if abs(lam.imag) <= _AXIS_TOL * max(1.0, abs(lam)):
        if refl.rho is None or abs(complex(refl.lam.lam) - lam) > 1e-12:
            raise ValueError("refl does not carry rho at this real point")
        rho = refl.rho
        return np.array([[1.0 - abs(rho) ** 2, -np.conj(rho) * e_m],
                         [rho * e_p, 1.0]], dtype=complex)

    mirror = lam.imag < 0
    want = lam.conjugate() if mirror else lam
    if abs(complex(refl.lam.lam) - want) > 1e-12:
        raise ValueError(
            "refl must be sampled at the point itself (upper pieces) or at "
            "the mirror point conj(lambda) (Sigma_2 pieces)")

    def sided(z):
        if z is None:
            return None
        v = z if refl.lam.side == pt.side else -z
        return complex(np.conj(v)) if mirror else v

    r1, r2 = sided(refl.r1), sided(refl.r2)

    if r1 is not None and r2 is not None:
        kappa = r1 * r2
        if abs(1.0 + kappa) < 1e-10 * max(1.0, abs(kappa)):
            raise DegenerateFactorizationError(
                f"1 + r1 r2 = {1.0 + kappa} at lambda = {lam}: the "
                "intersection jump does not factor at this point")
        d = (1.0 - kappa) / (1.0 + kappa)
        if not mirror:
            return np.array([[d, -2j * r2 * e_m / (1.0 + kappa)],
                             [-2j * r1 * e_p / (1.0 + kappa), d]],
                            dtype=complex)
        return np.array([[d, 2j * r1 * e_m / (1.0 + kappa)],
                         [2j * r2 * e_p / (1.0 + kappa), d]], dtype=complex)
    if r2 is not None:
        if not mirror:   # Sigma_1^r \ Sigma_1^l
            return np.array([[1.0, -2j * r2 * e_m], [0.0, 1.0]],
                            dtype=complex)
        return np.array([[1.0, 0.0], [2j * r2 * e_p, 1.0]], dtype=complex)
    if r1 is not None:
        if not mirror:   # Sigma_1^l \ Sigma_1^r
            return np.array([[1.0, 0.0], [-2j * r1 * e_p, 1.0]],
                            dtype=complex)
        return np.array([[1.0, 2j * r1 * e_m], [0.0, 1.0]], dtype=complex)
    raise ValueError("refl carries neither r1 nor r2")


# -- direct verification of the matrix problem -------------------------------


def _m_columns(scn, x, pt, half):
    """Columns of M at one point from forward Jost solves.

    half = '+' uses (Phi_1^l / a, Phi_2^r) e^{i Lambda sigma_3}; half =
    '-' uses (Phi_1^r, Phi_2^l / a*) e^{i Lambda sigma_3}, with Lambda =
    (x - x_0^r) lambda.
    """
    lam = complex(pt.lam)
    ex = cmath.exp(1j * (x - scn.right.x0) * lam)
    errs = []

    def col(side, j):
        v, e = jost_phi_column(side, j, x, pt, scn)
        errs.append(e)
        return v

    if half == "+":
        l1 = col("left", 0)
        r2 = col("right", 1)
        a = l1[0] * r2[1] - l1[1] * r2[0]
        M = np.column_stack([l1 / a * ex, r2 / ex])
    else:
        r1 = col("right", 0)
        l2 = col("left", 1)
        a_star = r1[0] * l2[1] - r1[1] * l2[0]
        M = np.column_stack([r1 * ex, l2 / a_star / ex])
    return M, max(errs)


def _v_matrix_M(scn, x, lam, tag):
    """The jump V^(M) on one piece, from one-sided scattering solves."""
    ex_p = cmath.exp(2j * (x - scn.right.x0) * lam)
    ex_m = 1.0 / ex_p
    if tag == "real_line":
        s = compute_ab(ContourPoint(lam), scn)
        a, b = s.a, s.b
        return np.array([[1.0 / (a * np.conj(a)),
                          -np.conj(b) / np.conj(a) * ex_m],
                         [b / a * ex_p, 1.0]], dtype=complex)
    sm = compute_ab(ContourPoint(lam, MINUS), scn)
    if tag == "sigma1r_only":
        return np.array([[sm.a / (1j * sm.b1), -1j * ex_m],
                         [0.0, 1j * sm.b1 / sm.a]], dtype=complex)
    if tag == "sigma1l_only":
        sp = compute_ab(ContourPoint(lam, PLUS), scn)
        return np.array([[-1j * sm.b1_star / sp.a, 0.0],
                         [-1j * ex_p / (sp.a * sm.a), 1.0]], dtype=complex)
    if tag == "band_intersection" and lam.imag > 0:
        sp = compute_ab(ContourPoint(lam, PLUS), scn)
        return np.array([[-1j * sm.b1_star / sp.a, -1j * ex_m],
                         [-1j * ex_p / (sp.a * sm.a),
                          1j * sm.b1 / sm.a]], dtype=complex)
    if tag == "sigma2l_only":
        sp = compute_ab(ContourPoint(lam, PLUS), scn)
        return np.array([[1.0, 1j * ex_m / (sp.a_star * sm.a_star)],
                         [0.0, 1j * sm.b1 / sp.a_star]], dtype=complex)
    if tag == "sigma2r_only":
        return np.array([[-1j * sm.b1_star / sm.a_star, 0.0],
                         [1j * ex_p, 1j * sm.a_star / sm.b1_star]],
                        dtype=complex)
    # the Sigma_2 band intersection
    sp = compute_ab(ContourPoint(lam, PLUS), scn)
    return np.array([[-1j * sm.b1_star / sm.a_star,
                      1j * ex_m / (sp.a_star * sm.a_star)],
                     [1j * ex_p, 1j * sm.b1 / sp.a_star]], dtype=complex)


@dataclass
class MJumpReport:
    """Max residuals of M_+ = M_- V^(M) per jump piece at one x."""

    scenario_hash: str
    x: float
    pieces: list = field(default_factory=list)  # (tag, lo, hi, n, residual)
    m_infinity_residual: float = float("nan")
    trivial_identity_residual: Optional[float] = None

    @property
    def max_residual(self) -> float:
        return max((p[4] for p in self.pieces), default=0.0)

    def to_json(self) -> str:
        doc = {
            "scenario": self.scenario_hash,
            "kind": "m_jump_report",
            "x": self.x,
            "pieces": [
                {"piece": tag, "lo": lo, "hi": hi, "n_points": n,
                 "max_residual": res}
                for tag, lo, hi, n, res in self.pieces
            ],
            "m_infinity_residual": self.m_infinity_residual,
        }
        if self.trivial_identity_residual is not None:
            doc["trivial_identity_residual"] = self.trivial_identity_residual
        return json.dumps(doc, indent=2, sort_keys=True)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")


def verify_M_jumps(x: float, scn: Scenario,
                   n_per_piece: int = 8) -> MJumpReport:
    """Residuals of M_+ = M_- V^(M) from forward solves on every piece.

    Upper band pieces compare the two one-sided boundary values of the
    upper-half-plane formula for M, Sigma_2 pieces those of the lower
    formula, and the real axis compares the upper formula against the
    lower one.  Also reports |M(x; 50i) - I| and, for a trivial junction,
    the deviation of the real-axis jump from the identity.
    """
    geom = band_geometry(scn)
    report = MJumpReport(scenario_hash=scn.scenario_hash, x=float(x))

    def resid_at(lam, tag):
        if tag == "real_line":
            Mp, _ = _m_columns(scn, x, ContourPoint(lam), "+")
            Mm, _ = _m_columns(scn, x, ContourPoint(lam), "-")
        else:
            half = "+" if lam.imag > 0 else "-"
            Mp, _ = _m_columns(scn, x, ContourPoint(lam, PLUS), half)
            Mm, _ = _m_columns(scn, x, ContourPoint(lam, MINUS), half)
        V = _v_matrix_M(scn, x, lam, tag)
        return float(np.max(np.abs(Mp - Mm @ V))
                     / max(1.0, float(np.max(np.abs(Mp)))))

    for tag, (lo, hi) in geom.pieces():
        vals = []
        for k in range(n_per_piece):
            t = lo + (k + 0.5) * (hi - lo) / n_per_piece
            vals.append(resid_at(1j * t, tag))
        report.pieces.append((tag, float(lo), float(hi), n_per_piece,
                              float(max(vals))))

    lam_max = 3.0 * max(scn.left.eta2, scn.right.eta2)
    vals = []
    for lam in np.linspace(0.4, 0.8 * lam_max, max(1, n_per_piece // 2)):
        vals.append(resid_at(complex(lam), "real_line"))
        vals.append(resid_at(complex(-lam), "real_line"))
    report.pieces.append(("real_line", 0.0, 0.0, len(vals),
                          float(max(vals))))

    M_inf, _ = _m_columns(scn, x, ContourPoint(50j), "+")
    report.m_infinity_residual = float(np.max(np.abs(M_inf - np.eye(2))))

    if scn.is_trivial("left"):
        vals = []
        for lam in (0.7, 1.7, -1.1):
            Mp, _ = _m_columns(scn, x, ContourPoint(complex(lam)), "+")
            Mm, _ = _m_columns(scn, x, ContourPoint(complex(lam)), "-")
            V = _v_matrix_M(scn, x, complex(lam), "real_line")
            vals.append(float(np.max(np.abs(V - np.eye(2)))))
            vals.append(float(np.max(np.abs(Mp - Mm))))
        report.trivial_identity_residual = float(max(vals))
    return report


# -- reconstruction of the datum ----------------------------------------------

_TABLE_CACHE: dict = {}


def _default_table(scn):
    table = _TABLE_CACHE.get(scn.scenario_hash)
    if table is None:
        table = build_cauchy_table(scn)
        _TABLE_CACHE[scn.scenario_hash] = table
    return table


def _row_limit(scn, table, x, lam_levels, route, a_cache):
    """lambda (X_j - 1), Richardson-extrapolated over the doubling ladder.

    Route 1 evaluates X_1 = rowsum(Phi_1^l) e^{i(x - x_0^r) lambda} / a1;
    route 2 evaluates X_2 = rowsum(Phi_2^r) e^{-i(x - x_0^r) lambda} / a2.
    """
    fs = []
    for L in lam_levels:
        lam = 1j * L
        if L not in a_cache:
            f = factor_a1a2(ContourPoint(lam), table)
            a_cache[L] = (f.a1, f.a2)
        a1, a2 = a_cache[L]
        if route == 1:
            v, _ = jost_phi_column("left", 0, x, ContourPoint(lam), scn)
            X = (v[0] + v[1]) * cmath.exp(
                1j * (x - scn.right.x0) * lam) / a1
        else:
            v, _ = jost_phi_column("right", 1, x, ContourPoint(lam), scn)
            X = (v[0] + v[1]) * cmath.exp(
                -1j * (x - scn.right.x0) * lam) / a2
        fs.append(lam * (X - 1.0))
    f1, f2, f4 = fs
    g2 = 2.0 * f2 - f1
    g4 = 2.0 * f4 - f2
    return (4.0 * g4 - g2) / 3.0, abs(g4 - g2) / 3.0


def reconstruct_u(x: float, scn: Scenario,
                  table: Optional[CauchyTable] = None, *, route: int = 1,
                  lam_levels=(40.0, 80.0, 160.0),
                  fd_step: float = 0.02) -> float:
    """u0(x) from the large-lambda asymptotics of the row problem.

    u = -2i d/dx lim lambda (X_1 - 1) (route 1), or +2i d/dx of the X_2
    limit (route 2).  The limit runs a two-stage Richardson ladder over
    i lam_levels (doubling kills the lambda^{-1} and lambda^{-2} terms)
    and d/dx a five-point stencil of spacing fd_step.  Raises
    AsymptoticsError when the ladder has not settled or the result keeps
    an imaginary part.
    """
    if route not in (1, 2):
        raise ValueError("route must be 1 or 2")
    if table is None:
        table = _default_table(scn)
    a_cache: dict = {}
    vals = {}
    spread = 0.0
    for k in (-2, -1, 0, 1, 2):
        c1, sp = _row_limit(scn, table, x + k * fd_step, lam_levels, route,
                            a_cache)
        vals[k] = c1
        spread = max(spread, sp)
    d = (vals[-2] - 8.0 * vals[-1] + 8.0 * vals[1] - vals[2]) \
        / (12.0 * fd_step)
    u = (-2j if route == 1 else 2j) * d
    scale = max(1.0, abs(u))
    if spread > 2e-3 * scale:
        raise AsymptoticsError(
            f"Richardson ladder spread {spread:.2e} has not settled at "
            f"x = {x:g}; extend lam_levels")
    if abs(u.imag) > 5e-3 * scale:
        raise AsymptoticsError(
            f"reconstructed u(x = {x:g}) keeps an imaginary part "
            f"{u.imag:.2e}")
    return float(u.real)


# -- exports ------------------------------------------------------------------


def reflection_to_csv(samples, path, scenario_hash, extra_header=""):
    hdr = f"# scenario={scenario_hash} kind=reflection"
    if extra_header:
        hdr += " " + extra_header
    lines = [hdr, ",".join(_REFL_COLUMNS)]
    lines += [",".join(s.to_row()) for s in samples]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def jumps_to_csv(samples, path, scenario_hash, extra_header=""):
    hdr = f"# scenario={scenario_hash} kind=jump"
    if extra_header:
        hdr += " " + extra_header
    lines = [hdr, ",".join(_JUMP_COLUMNS)]
    lines += [",".join(s.to_row()) for s in samples]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
