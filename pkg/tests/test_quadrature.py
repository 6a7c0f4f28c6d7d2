import math

from hypothesis import given, settings, strategies as st
from mpmath import mp

from starpade.precision import PrecisionPolicy
from starpade.quadrature import Contour, integrate, integrate_with_error


def test_cauchy_circle(pol60):
    with pol60.context():
        c = Contour.circle(0, 1)
        val = integrate(lambda z: 1 / z, c, pol60)
        assert abs(val - 2j * mp.pi) < mp.mpf(10) ** -50


def test_arcsine_weight(pol60):
    # int_{-1}^{1} dx / sqrt(1 - x^2) = pi, square-root at both endpoints
    with pol60.context():
        c = Contour.line(-1, 1, q_start=2, q_end=2)
        val = integrate(lambda z: 1 / mp.sqrt(1 - z * z), c, pol60)
        assert abs(val - mp.pi) < mp.mpf(10) ** -50


def test_endpoint_singularity_series_oracle(pol60):
    # int_0^1 t^(-1/2) e^t dt = sum_k 1 / (k! (k + 1/2))
    with pol60.context():
        c = Contour.line(0, 1, q_start=2)
        val = integrate(lambda z: mp.exp(z) / mp.sqrt(z), c, pol60)
        target = mp.nsum(lambda k: 1 / (mp.factorial(k) * (k + mp.mpf(1) / 2)),
                         [0, mp.inf])
        assert abs(val - target) < mp.mpf(10) ** -50


def test_error_estimate_reported(pol60):
    with pol60.context():
        c = Contour.line(0, 1)
        val, err = integrate_with_error(lambda z: mp.exp(z), c, pol60)
        assert abs(val - (mp.e - 1)) < mp.mpf(10) ** -50
        assert err < mp.mpf(10) ** -50


def test_reversal(pol60):
    with pol60.context():
        c = Contour.line(0, 1 + 1j)
        fwd = integrate(lambda z: z * z, c, pol60)
        bwd = integrate(lambda z: z * z, c.reversed_(), pol60)
        assert abs(fwd + bwd) < mp.mpf(10) ** -50


def test_polyline_splits_match_line(pol60):
    with pol60.context():
        f = mp.cos
        whole = integrate(f, Contour.line(0, 2), pol60)
        split = integrate(f, Contour.polyline([0, mp.mpf("0.7"), 2]), pol60)
        assert abs(whole - split) < mp.mpf(10) ** -50


def test_vector_integrand(pol60):
    with pol60.context():
        c = Contour.line(0, 1)
        vals = integrate(lambda z: [mp.mpf(1), z, z * z], c, pol60)
        assert abs(vals[0] - 1) < mp.mpf(10) ** -50
        assert abs(vals[1] - mp.mpf(1) / 2) < mp.mpf(10) ** -50
        assert abs(vals[2] - mp.mpf(1) / 3) < mp.mpf(10) ** -50


def test_digit_doubling_consistency():
    lo = PrecisionPolicy(decimal_digits=40)
    hi = PrecisionPolicy(decimal_digits=80)
    with hi.context():
        c = Contour.line(-1, 1, q_start=2, q_end=2)

        def f(z):
            return mp.exp(z) / mp.sqrt(1 - z * z)

        a = integrate(f, c, lo)
        b = integrate(f, c, hi)
        assert abs(a - b) < mp.mpf(10) ** -35


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6))
def test_linearity(i, j):
    pol = PrecisionPolicy(decimal_digits=40)
    with pol.context():
        c = Contour.line(-1, 2)

        def mono(k):
            return integrate(lambda z, k=k: z ** k, c, pol)

        both = integrate(lambda z: z ** i + 3 * z ** j, c, pol)
        assert abs(both - (mono(i) + 3 * mono(j))) < mp.mpf(10) ** -30


def test_exactness_reference():
    # plain float cross-check on a smooth integral
    pol = PrecisionPolicy(decimal_digits=40)
    with pol.context():
        val = integrate(lambda z: mp.sin(z), Contour.line(0, math.pi), pol)
        assert abs(val - 2) < mp.mpf(10) ** -30
