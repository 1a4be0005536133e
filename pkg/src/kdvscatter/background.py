"""Closed-form objects of one periodic one-gap background.

For band edges 0 < eta1 < eta2 with modulus m = eta1/eta2, phase shift x0,
and frequencies Omega1, Omega2 (B-periods of dp, dq), set

    Omega := -x Omega1 - t Omega2,   Delta := x0 Omega1,
    w     := (Omega + Delta) / (2 pi).

The vector Bloch solution (row vector, analytic off [-i eta2, i eta2]) is

    m(lam) = gamma(lam) th3(0;2tau)/th3(w;2tau)
             * [ th3(2J + w - 1/2; 2tau) / th3(2J - 1/2; 2tau),
                 th3(-2J + w - 1/2; 2tau) / th3(-2J - 1/2; 2tau) ],

with J(lam) the Abel map and gamma the fourth-root factor.  Its jumps are
-i sigma1 on the upper band, +i sigma1 on the lower band, and
exp(i(Omega+Delta) sigma3) on the gap; m -> [1, 1] at infinity.

The dressing matrix (det O = 1, O -> I, simple pole at lam = 0)

    O = 1/2 [[ (1+p/lam) m1 - dx(m1)/(i lam),  (1-p/lam) m2 - dx(m2)/(i lam) ],
             [ (1-p/lam) m1 + dx(m1)/(i lam),  (1+p/lam) m2 + dx(m2)/(i lam) ]]

feeds the Baker-Akhiezer matrix

    Psi0 = [[1, 1], [-i lam, i lam]] O exp(-i[(x - x0) p + t q] sigma3),

which satisfies the matrix Lax pair Psi_x = L Psi, Psi_t = A Psi with

    L = [[0, 1], [u - lam^2, 0]],
    A = [[-u_x, 4 lam^2 + 2u], [(u - lam^2)(4 lam^2 + 2u) - u_xx, u_x]],

and det Psi0 = 2 i lam.  The background field itself has two closed forms,

    u = eta2^2 - eta1^2
        - 2 eta2^2 dn^2(eta2 [x - 2(eta1^2+eta2^2) t - x0] + K(m) | m)
      = -2 p1 - 2 d^2/dx^2 log th3(w; 2 tau),

whose agreement is asserted at every evaluation.  x-derivatives of the theta
quotients are exact (term-wise differentiation, chain rule dw/dx = -Omega1/2pi);
finite differences appear only in tests.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .special import jacobi_sn_cn_dn, theta3, theta3_dz, theta3_dz2
from .surface import OFF, PLUS, MINUS, ContourPoint, SurfaceData, locate

__all__ = [
    "PoleError",
    "ConsistencyError",
    "PhaseState",
    "BlochVector",
    "phase_state",
    "bloch_m",
    "bloch_m_dx",
    "O_matrix",
    "psi0",
    "u_background",
    "u_theta_form",
    "u_dn_form",
    "u_derivatives",
    "kdv_residual",
    "lax_L",
    "lax_A",
    "rhp_jump_matrix",
    "verify_rhp_jumps",
]

_POLE_RADIUS = 1e-3
_DUAL_FORM_TOL = 1e-8


class PoleError(ArithmeticError):
    """Evaluation at a pole (lam = 0 of O, or a vanishing theta denominator)."""


class ConsistencyError(AssertionError):
    """The two closed forms of the background field disagree."""


@dataclass(frozen=True)
class PhaseState:
    """Phases of one background at a spacetime point.

    Omega = -x Omega1 - t Omega2 and Delta = x0 Omega1 are stored explicitly
    so downstream formulas never recompute them inconsistently.
    """

    x: float
    t: float
    Omega: float
    Delta: float


def phase_state(s: SurfaceData, x: float, t: float) -> PhaseState:
    return PhaseState(x=float(x), t=float(t),
                      Omega=-x * s.Omega1 - t * s.Omega2,
                      Delta=s.bands.x0 * s.Omega1)


@dataclass(frozen=True)
class BlochVector:
    m1: complex
    m2: complex

    def as_row(self):
        return np.array([self.m1, self.m2], dtype=complex)


def _w_of(state: PhaseState) -> float:
    return (state.Omega + state.Delta) / (2.0 * math.pi)


def _theta_pieces(state: PhaseState, pt: ContourPoint, s: SurfaceData):
    """Shared theta evaluations for m and dx(m).

    Returns (C, a1, a2, D1, D2, w) with m_j = C * th3(a_j; 2tau) / D_j and
    C = gamma * th3(0)/th3(w); D_j are x-independent.
    """
    locate(pt.lam, s)  # branch points are genuine singularities of m
    tt = 2.0 * s.tau
    w = _w_of(state)
    J = s.J(pt)
    a1 = 2.0 * J + w - 0.5
    a2 = -2.0 * J + w - 0.5
    D1 = theta3(2.0 * J - 0.5, tt)
    D2 = theta3(-2.0 * J - 0.5, tt)
    thw = theta3(w, tt)
    for name, val in (("th3(2J-1/2)", D1), ("th3(-2J-1/2)", D2), ("th3(w)", thw)):
        if abs(val) < 1e-12:
            raise PoleError(f"theta denominator {name} vanishes at lambda = {pt.lam}")
    C = s.gamma(pt) * theta3(0.0, tt) / thw
    return C, a1, a2, D1, D2, w, thw, tt


def bloch_m(state: PhaseState, pt: ContourPoint, s: SurfaceData) -> BlochVector:
    C, a1, a2, D1, D2, _, _, tt = _theta_pieces(state, pt, s)
    return BlochVector(m1=C * theta3(a1, tt) / D1, m2=C * theta3(a2, tt) / D2)


def bloch_m_dx(state: PhaseState, pt: ContourPoint, s: SurfaceData):
    """(dx m1, dx m2) by exact differentiation of the theta quotient.

    m_j depends on x only through w, dw/dx = -Omega1/(2 pi); both the a_j
    arguments and the th3(w) normalization carry the w dependence.
    """
    C, a1, a2, D1, D2, _, thw, tt = _theta_pieces(state, pt, s)
    dw_dx = -s.Omega1 / (2.0 * math.pi)
    lw = theta3_dz(_w_of(state), tt) / thw
    d1 = C * (theta3_dz(a1, tt) - theta3(a1, tt) * lw) / D1
    d2 = C * (theta3_dz(a2, tt) - theta3(a2, tt) * lw) / D2
    return dw_dx * d1, dw_dx * d2


def O_matrix(state: PhaseState, pt: ContourPoint, s: SurfaceData):
    lam = complex(pt.lam)
    if abs(lam) < _POLE_RADIUS:
        raise PoleError(f"O has a simple pole at lambda = 0 (|lambda| = {abs(lam):.2e})")
    mv = bloch_m(state, pt, s)
    dm1, dm2 = bloch_m_dx(state, pt, s)
    p = s.p(pt)
    pp, pm = 1.0 + p / lam, 1.0 - p / lam
    il = 1j * lam
    return 0.5 * np.array(
        [[pp * mv.m1 - dm1 / il, pm * mv.m2 - dm2 / il],
         [pm * mv.m1 + dm1 / il, pp * mv.m2 + dm2 / il]], dtype=complex)


def psi0(state: PhaseState, pt: ContourPoint, s: SurfaceData):
    lam = complex(pt.lam)
    O = O_matrix(state, pt, s)
    x0 = state.Delta / s.Omega1
    phase = (state.x - x0) * s.p(pt) + state.t * s.q(pt)
    E = np.diag([cmath.exp(-1j * phase), cmath.exp(1j * phase)])
    pref = np.array([[1.0, 1.0], [-1j * lam, 1j * lam]], dtype=complex)
    return pref @ O @ E


# ---------------------------------------------------------------------------
# the background field and its derivatives


def _dn_argument(state: PhaseState, s: SurfaceData) -> float:
    e1s, e2s = s.bands.eta1 ** 2, s.bands.eta2 ** 2
    x0 = state.Delta / s.Omega1
    return s.bands.eta2 * (state.x - 2.0 * (e1s + e2s) * state.t - x0) + s.em.K


def u_dn_form(state: PhaseState, s: SurfaceData) -> float:
    e1s, e2s = s.bands.eta1 ** 2, s.bands.eta2 ** 2
    _, _, dn = jacobi_sn_cn_dn(_dn_argument(state, s), s.bands.modulus)
    return e2s - e1s - 2.0 * e2s * dn * dn


def u_theta_form(state: PhaseState, s: SurfaceData) -> float:
    tt = 2.0 * s.tau
    w = _w_of(state)
    th, dth, ddth = theta3(w, tt), theta3_dz(w, tt), theta3_dz2(w, tt)
    if abs(th) < 1e-12:
        raise PoleError("th3(w) vanishes; background phase at a theta zero")
    d2log = (ddth * th - dth * dth) / (th * th)
    u = -2.0 * s.p1 - 2.0 * (s.Omega1 / (2.0 * math.pi)) ** 2 * d2log
    return float(np.real(u))


def u_background(state: PhaseState, s: SurfaceData) -> float:
    u_dn = u_dn_form(state, s)
    u_th = u_theta_form(state, s)
    if abs(u_dn - u_th) > _DUAL_FORM_TOL * max(1.0, abs(u_dn)):
        raise ConsistencyError(
            f"background field forms disagree at (x,t)=({state.x},{state.t}): "
            f"dn {u_dn!r} vs theta {u_th!r}")
    return u_dn


def u_derivatives(state: PhaseState, s: SurfaceData):
    """(u, u_x, u_xx, u_xxx, u_t), all exact in terms of sn, cn, dn.

    With f = dn^2(z), z = eta2 (x - 2(eta1^2+eta2^2) t - x0) + K:
        f'   = -2 m^2 sn cn dn
        f''  = -2 m^2 (cn^2 dn^2 - sn^2 dn^2 - m^2 sn^2 cn^2)
        f''' =  8 m^2 sn cn dn (dn^2 + m^2 cn^2 - m^2 sn^2)
    and u = eta2^2 - eta1^2 - 2 eta2^2 f, d/dx = eta2 d/dz, d/dt = -c eta2 d/dz.
    """
    e1s, e2s = s.bands.eta1 ** 2, s.bands.eta2 ** 2
    mm = s.bands.modulus ** 2
    e2 = s.bands.eta2
    sn, cn, dn = jacobi_sn_cn_dn(_dn_argument(state, s), s.bands.modulus)
    f = dn * dn
    f1 = -2.0 * mm * sn * cn * dn
    f2 = -2.0 * mm * (cn * cn * dn * dn - sn * sn * dn * dn - mm * sn * sn * cn * cn)
    f3 = 8.0 * mm * sn * cn * dn * (dn * dn + mm * cn * cn - mm * sn * sn)
    B = 2.0 * e2s
    c = 2.0 * (e1s + e2s)
    u = e2s - e1s - B * f
    u_x = -B * e2 * f1
    u_xx = -B * e2 ** 2 * f2
    u_xxx = -B * e2 ** 3 * f3
    u_t = B * c * e2 * f1
    return u, u_x, u_xx, u_xxx, u_t


def kdv_residual(state: PhaseState, s: SurfaceData) -> float:
    u, u_x, _, u_xxx, u_t = u_derivatives(state, s)
    return abs(u_t - 6.0 * u * u_x + u_xxx)


def lax_L(lam, u):
    return np.array([[0.0, 1.0], [u - lam * lam, 0.0]], dtype=complex)


def lax_A(lam, u, u_x, u_xx):
    q = 4.0 * lam * lam + 2.0 * u
    return np.array([[-u_x, q], [(u - lam * lam) * q - u_xx, u_x]], dtype=complex)


# ---------------------------------------------------------------------------
# jump verification


def rhp_jump_matrix(state: PhaseState, region: str):
    """Jump matrix of the Bloch vector on the named piece of the cut."""
    if region == "band1":
        return np.array([[0.0, -1j], [-1j, 0.0]])
    if region == "band2":
        return np.array([[0.0, 1j], [1j, 0.0]])
    if region == "gap":
        ph = state.Omega + state.Delta
        return np.diag([cmath.exp(1j * ph), cmath.exp(-1j * ph)])
    raise ValueError(f"no jump on region {region!r}")


def verify_rhp_jumps(state: PhaseState, s: SurfaceData, n_per_piece: int = 20):
    """Max relative jump residual of m on each cut piece (one-sided values).

    Sample points avoid the edges by 2% of each piece's length; residual is
    ||m_+ - m_- V|| / max(1, ||m_-||) in the sup norm.
    """
    e1, e2 = s.bands.eta1, s.bands.eta2
    pieces = {
        "band1": np.linspace(e1, e2, n_per_piece + 2)[1:-1] * 1j,
        "band2": -np.linspace(e1, e2, n_per_piece + 2)[1:-1] * 1j,
        "gap": np.linspace(-e1, e1, n_per_piece + 2)[1:-1] * 1j,
    }
    out = {}
    for region, lams in pieces.items():
        V = rhp_jump_matrix(state, region)
        worst = 0.0
        for lam in lams:
            mp = bloch_m(state, ContourPoint(complex(lam), PLUS), s).as_row()
            mm = bloch_m(state, ContourPoint(complex(lam), MINUS), s).as_row()
            res = np.max(np.abs(mp - mm @ V)) / max(1.0, np.max(np.abs(mm)))
            worst = max(worst, res)
        out[region] = worst
    return out
