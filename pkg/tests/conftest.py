"""Session-scoped fixtures shared across test modules.

Building a Cauchy quadrature table costs one forward solve per node
(about two minutes for a three-piece band pattern on one core), so the
tables are built once per session and shared by every module that
consumes h, the factorization, the reflection coefficients, or the
acceptance checks.  The scenario parameters mirror the inline fixtures
of test_scattering so solver behavior stays comparable across modules.

Table builds are timed into ``build_clock`` so the acceptance sweep can
charge them against its runtime budgets even when another module
triggered the build first.
"""

import time

import pytest

from kdvscatter.jost import Perturbation, TruncationPolicy
from kdvscatter.reflection import build_cauchy_table
from kdvscatter.scenario import Scenario
from kdvscatter.surface import BandParams

BUMP = Perturbation("gaussian_bump", 0.05, -1.0, 0.5)


@pytest.fixture(scope="session")
def build_clock():
    # seconds spent building each session table, keyed by fixture name
    return {}


def _timed_build(clock, key, scn):
    t0 = time.monotonic()
    table = build_cauchy_table(scn)
    clock[key] = time.monotonic() - t0
    return table


@pytest.fixture(scope="session")
def scn_iii():
    # partial overlap, left band lower: (i, 2i) against (1.2i, 2.4i)
    return Scenario(left=BandParams(1.0, 2.0, 0.0),
                    right=BandParams(1.2, 2.4, 0.0, side="right"),
                    perturbation=BUMP)


@pytest.fixture(scope="session")
def table_iii(scn_iii, build_clock):
    return _timed_build(build_clock, "table_iii", scn_iii)


@pytest.fixture(scope="session")
def scn_triv():
    return Scenario(left=BandParams(1.0, 2.0, 0.3),
                    right=BandParams(1.0, 2.0, 0.3))


@pytest.fixture(scope="session")
def table_triv(scn_triv, build_clock):
    return _timed_build(build_clock, "table_triv", scn_triv)


@pytest.fixture(scope="session")
def scn_i():
    # disjoint bands, left band lower: (0.8i, 1.5i) against (2i, 3i)
    return Scenario(left=BandParams(0.8, 1.5, 0.0),
                    right=BandParams(2.0, 3.0, 0.0, side="right"),
                    perturbation=BUMP)


@pytest.fixture(scope="session")
def table_i(scn_i, build_clock):
    return _timed_build(build_clock, "table_i", scn_i)


@pytest.fixture(scope="session")
def scn_iv():
    # partial overlap mirrored, right band lower: (1.2i, 2.4i) against (i, 2i)
    return Scenario(left=BandParams(1.2, 2.4, 0.0),
                    right=BandParams(1.0, 2.0, 0.0, side="right"),
                    perturbation=BUMP)


@pytest.fixture(scope="session")
def table_iv(scn_iv, build_clock):
    return _timed_build(build_clock, "table_iv", scn_iv)


@pytest.fixture(scope="session")
def scn_smooth():
    # identical backgrounds under a C^2 compact bump: b decays like
    # lambda^{-5}, fast enough to resolve two decades of |rho| decay
    # above the noise floor of the stiff solver
    return Scenario(left=BandParams(1.0, 2.0, 0.3),
                    right=BandParams(1.0, 2.0, 0.3),
                    perturbation=Perturbation("compact_spline", 0.4,
                                              -1.0, 1.1),
                    truncation=TruncationPolicy(X_far=4.0, ode_tol=1e-13))
