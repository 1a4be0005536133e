"""Elliptic integrals, Jacobi elliptic functions, and the third theta function.

Convention: the modulus m enters integrands squared, i.e.

    K(m) = int_0^{pi/2} dtheta / sqrt(1 - m^2 sin^2 theta),
    E(m) = int_0^{pi/2} sqrt(1 - m^2 sin^2 theta) dtheta,

so the argument of K, E here is the *modulus* (scipy's ellipk takes m^2).
The complementary integrals use the complementary modulus m' = sqrt(1 - m^2).

theta3 is the unit-period series

    theta3(z; tau) = sum_{n in Z} exp(2 pi i n z + pi i n^2 tau),  Im tau > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ellip_K",
    "ellip_E",
    "EllipticModulus",
    "jacobi_sn_cn_dn",
    "jacobi_sn",
    "jacobi_cn",
    "jacobi_dn",
    "ThetaParams",
    "theta_nmax",
    "theta3",
    "theta3_dz",
    "theta3_dz2",
]


def _agm_chain(m):
    """AGM sequence for modulus m: lists (a_n, b_n, c_n) down to c_N ~ 0."""
    a, b, c = 1.0, math.sqrt((1.0 - m) * (1.0 + m)), m
    chain = [(a, b, c)]
    for _ in range(64):
        if abs(c) <= 1e-17 * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        chain.append((a, b, c))
    return chain


def ellip_K(m):
    """Complete elliptic integral of the first kind, modulus argument."""
    if not 0.0 <= m < 1.0:
        raise ValueError("modulus m must lie in [0, 1)")
    chain = _agm_chain(m)
    return math.pi / (2.0 * chain[-1][0])


def ellip_E(m):
    """Complete elliptic integral of the second kind, modulus argument."""
    if not 0.0 <= m <= 1.0:
        raise ValueError("modulus m must lie in [0, 1]")
    if m == 1.0:
        return 1.0
    chain = _agm_chain(m)
    # E = K (1 - sum_{n>=0} 2^{n-1} c_n^2)
    csum = 0.0
    for n, (_, _, c) in enumerate(chain):
        csum += 2.0 ** (n - 1) * c * c
    K = math.pi / (2.0 * chain[-1][0])
    return K * (1.0 - csum)


@dataclass(frozen=True)
class EllipticModulus:
    """Modulus m with its cached integrals; Kc, Ec at the complementary modulus."""

    m: float
    K: float
    E: float
    Kc: float
    Ec: float

    @classmethod
    def from_m(cls, m: float) -> "EllipticModulus":
        if not 0.0 <= m < 1.0:
            raise ValueError("modulus m must lie in [0, 1)")
        mc = math.sqrt((1.0 - m) * (1.0 + m))
        Kc = math.inf if m == 0.0 else ellip_K(mc)
        return cls(m=m, K=ellip_K(m), E=ellip_E(m), Kc=Kc, Ec=ellip_E(mc))

    def legendre_defect(self) -> float:
        return self.E * self.Kc + self.Ec * self.K - self.K * self.Kc - math.pi / 2.0


def jacobi_sn_cn_dn(u, m):
    """sn, cn, dn by the descending Landen (Gauss) transformation.

    u may be a scalar or array; m is the modulus in [0, 1).
    """
    if not 0.0 <= m < 1.0:
        raise ValueError("modulus m must lie in [0, 1)")
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    if m == 0.0:
        sn, cn, dn = np.sin(u), np.cos(u), np.ones_like(u)
    else:
        chain = _agm_chain(m)
        K = math.pi / (2.0 * chain[-1][0])
        # reduce modulo the common real period 4K to keep phi_N small
        ured = u - 4.0 * K * np.round(u / (4.0 * K))
        N = len(chain) - 1
        phi = (2.0 ** N) * chain[-1][0] * ured
        for n in range(N, 0, -1):
            a_n, _, c_n = chain[n]
            phi = 0.5 * (phi + np.arcsin(np.clip(c_n / a_n * np.sin(phi), -1.0, 1.0)))
        sn = np.sin(phi)
        cn = np.cos(phi)
        # dn >= sqrt(1-m^2) > 0, so the root is single-signed
        dn = np.sqrt(np.maximum(1.0 - (m * sn) ** 2, 0.0))
    if scalar:
        return float(sn[0]), float(cn[0]), float(dn[0])
    return sn, cn, dn


def jacobi_sn(u, m):
    return jacobi_sn_cn_dn(u, m)[0]


def jacobi_cn(u, m):
    return jacobi_sn_cn_dn(u, m)[1]


def jacobi_dn(u, m):
    return jacobi_sn_cn_dn(u, m)[2]


def theta_nmax(tau, z_imag_max=0.0):
    """Series cutoff keeping the discarded theta tail below e^-40.

    For evaluation at |Im z| <= Y the |n|-th term is exp(-pi T n^2 + 2 pi n Y),
    T = Im tau; the cutoff solves pi T n^2 - 2 pi n Y = 40.  At Y = 0 this is
    the ceil(sqrt(40/(pi T))) rule, padded by 4 and clamped to >= 8.
    """
    T = float(np.imag(tau))
    if T <= 0.0:
        raise ValueError("Im tau must be positive")
    Y = abs(float(z_imag_max))
    n = (Y + math.sqrt(Y * Y + 40.0 * T / math.pi)) / T
    return max(8, int(math.ceil(n)) + 4)


@dataclass(frozen=True)
class ThetaParams:
    """tau in the upper half plane plus the truncation order for theta3."""

    tau: complex
    n_max: int

    @classmethod
    def for_tau(cls, tau: complex, z_imag_max: float = 0.0) -> "ThetaParams":
        return cls(tau=complex(tau), n_max=theta_nmax(tau, z_imag_max))


def _theta3_sum(z, tau, n_max, order):
    """sum_n (2 pi i n)^order exp(2 pi i n z + pi i n^2 tau), n = -n_max..n_max."""
    tau = complex(tau)
    if tau.imag <= 0.0:
        raise ValueError("Im tau must be positive")
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    zf = np.atleast_1d(z).ravel()
    if n_max is None:
        n_max = theta_nmax(tau, np.max(np.abs(zf.imag)) if zf.size else 0.0)
    n = np.arange(1, n_max + 1, dtype=float)
    quad = 1j * math.pi * tau * n * n
    # exponents assembled before exponentiating so large Im z cannot overflow
    ep = np.exp(quad[:, None] + 2j * math.pi * n[:, None] * zf[None, :])
    em = np.exp(quad[:, None] - 2j * math.pi * n[:, None] * zf[None, :])
    if order == 0:
        total = 1.0 + np.sum(ep + em, axis=0)
    else:
        fac = (2j * math.pi * n) ** order
        total = np.sum(fac[:, None] * (ep + (-1.0) ** order * em), axis=0)
    total = total.reshape(np.atleast_1d(z).shape)
    return complex(total[0]) if scalar else total


def theta3(z, tau, n_max=None):
    """theta3(z; tau) for scalar or array z."""
    return _theta3_sum(z, tau, n_max, 0)


def theta3_dz(z, tau, n_max=None):
    """d/dz theta3(z; tau)."""
    return _theta3_sum(z, tau, n_max, 1)


def theta3_dz2(z, tau, n_max=None):
    """d^2/dz^2 theta3(z; tau)."""
    return _theta3_sum(z, tau, n_max, 2)
