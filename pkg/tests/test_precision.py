from fractions import Fraction

import pytest
from mpmath import mp

from starpade.precision import PrecisionPolicy, default_digits, mpc_of


def test_default_digits_floor():
    assert default_digits(0) == 50
    assert default_digits(5) == 50
    assert default_digits(40) == 180
    assert default_digits(72) == 308


def test_policy_context_scopes_dps():
    pol = PrecisionPolicy(decimal_digits=80)
    before = mp.dps
    with pol.context():
        assert mp.dps >= 80
    assert mp.dps == before


def test_policy_context_extra_digits():
    pol = PrecisionPolicy(decimal_digits=60)
    with pol.context(extra_digits=15):
        assert mp.dps >= 75


def test_derived_tolerances():
    pol = PrecisionPolicy(decimal_digits=60)
    assert 0 < pol.quad_rel_tol <= 1e-6
    assert 0 < pol.newton_tol <= 1e-6
    assert pol.trim_threshold == mp.mpf(10) ** -30


def test_very_high_digit_policy_constructs():
    # derived tolerances are floats; the exponent clamp keeps them nonzero
    pol = PrecisionPolicy(decimal_digits=340)
    assert pol.quad_rel_tol > 0
    assert pol.newton_tol > 0


def test_rejects_low_digits():
    with pytest.raises(ValueError):
        PrecisionPolicy(decimal_digits=10)


def test_with_digits_doubles():
    pol = PrecisionPolicy(decimal_digits=60)
    pol2 = pol.with_digits(120)
    assert pol2.decimal_digits == 120
    assert pol2.quad_rel_tol < pol.quad_rel_tol


def test_mpc_of_fraction():
    with mp.workdps(40):
        v = mpc_of(Fraction(1, 3))
        assert abs(v - mp.mpf(1) / 3) < mp.mpf(10) ** -38


def test_mpc_of_complex():
    v = mpc_of(1 + 2j)
    assert v.real == 1 and v.imag == 2
