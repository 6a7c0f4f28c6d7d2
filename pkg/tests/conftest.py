"""Shared fixtures.

Everything heavy is session-scoped: the two star geometries take seconds
each to trace, the surface frame carries cached periods and quadrature
state, and the n=15 bundle is reused by the surface, ode and pade tests.
Tests must not mutate any of these (all the package types are frozen
dataclasses, so accidental mutation fails loudly anyway).
"""

from fractions import Fraction

import pytest

from starpade.branching import BranchConfig
from starpade.geometry import build_star
from starpade.precision import PrecisionPolicy
from starpade import pade
from starpade import surface as surf


@pytest.fixture(scope="session")
def pol60():
    return PrecisionPolicy(decimal_digits=60)


@pytest.fixture(scope="session")
def pol40():
    return PrecisionPolicy(decimal_digits=40)


@pytest.fixture(scope="session")
def cube_cfg():
    """Cube roots of unity; alpha = (1/3, 1/3, -2/3)."""
    from mpmath import mp
    with mp.workdps(120):
        om = mp.exp(2j * mp.pi / 3)
        pts = (mp.mpc(1), om, om ** 2)
    return BranchConfig.make(pts, (Fraction(1, 3), Fraction(1, 3),
                                   Fraction(-2, 3)))


@pytest.fixture(scope="session")
def cube_geom(cube_cfg, pol60):
    return build_star(cube_cfg, pol60)


@pytest.fixture(scope="session")
def asym_cfg():
    """Deliberately unsymmetric configuration used across the suite."""
    return BranchConfig.make((0, 1, 1j),
                             (Fraction(1, 4), Fraction(1, 4),
                              Fraction(-1, 2)))


@pytest.fixture(scope="session")
def asym_geom(asym_cfg, pol60):
    return build_star(asym_cfg, pol60)


@pytest.fixture(scope="session")
def asym_frame(asym_geom, pol60):
    return surf.build_surface(asym_geom, pol60)


@pytest.fixture(scope="session")
def asym_cache(asym_cfg, pol60):
    return pade.CoefficientCache(asym_cfg, pol60)


@pytest.fixture(scope="session")
def asym_bundle15(asym_frame, pol60):
    return surf.build_bundle(asym_frame, 15, pol60)


@pytest.fixture(scope="session")
def asym_triple15(asym_cfg, pol60, asym_cache):
    return pade.frobenius_solve(asym_cfg, 15, pol60, cache=asym_cache,
                                n_remainder=24)


@pytest.fixture(scope="session")
def fig1_cfg():
    pts = ((Fraction(-6, 5), Fraction(0)),
           (Fraction(7, 10), Fraction(7, 4)),
           (Fraction(1), Fraction(4, 5)))
    return BranchConfig.make(pts, (Fraction(-3, 7), Fraction(1, 7),
                                   Fraction(2, 7)))
