from fractions import Fraction

from hypothesis import given, settings, strategies as st
from mpmath import mp

from starpade.polys import ComplexPoly, poly_roots
from starpade.precision import PrecisionPolicy


def test_quadratic_pm_i(pol60):
    with pol60.context():
        p = ComplexPoly.make([1, 0, 1], pol60)     # z^2 + 1
        roots = poly_roots(p, pol60)
        roots = sorted(roots, key=lambda r: mp.im(r))
        assert abs(roots[0] + 1j) < mp.mpf(10) ** -55
        assert abs(roots[1] - 1j) < mp.mpf(10) ** -55


def test_triple_root(pol60):
    with pol60.context():
        p = ComplexPoly.from_roots([2, 2, 2], pol60)
        roots = poly_roots(p, pol60)
        assert len(roots) == 3
        # a triple root is only determined to a third of working precision
        assert all(abs(r - 2) < mp.mpf(10) ** -15 for r in roots)


def test_clustered_real_roots(pol60):
    with pol60.context():
        true = [mp.mpf(k) / 10 for k in range(1, 11)]
        p = ComplexPoly.from_roots(true, pol60)
        roots = sorted(poly_roots(p, pol60), key=mp.re)
        for r, t in zip(roots, true):
            assert abs(r - t) < mp.mpf(10) ** -30


def test_eval_matches_horner(pol60):
    with pol60.context():
        p = ComplexPoly.make([3, -2, 1], pol60)   # 3 - 2z + z^2
        z = mp.mpc(2, 1)
        assert abs(p(z) - (3 - 2 * z + z * z)) < mp.mpf(10) ** -55


def test_derivative_and_monic(pol60):
    with pol60.context():
        p = ComplexPoly.make([1, 4, 2], pol60)
        d = p.derivative()
        assert d.degree == 1
        assert abs(d(mp.mpc(0)) - 4) < mp.mpf(10) ** -55
        m = p.scale(5).monic()
        assert abs(m.coeffs[-1] - 1) == 0


def test_mul_add_consistency(pol60):
    with pol60.context():
        a = ComplexPoly.make([1, 1], pol60)
        b = ComplexPoly.make([-1, 1], pol60)
        prod = a.mul(b)                            # z^2 - 1
        z = mp.mpc("0.7", "0.3")
        assert abs(prod(z) - (z * z - 1)) < mp.mpf(10) ** -55
        s = a.add(b)
        assert abs(s(z) - 2 * z) < mp.mpf(10) ** -55


@settings(max_examples=15, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)),
                min_size=1, max_size=6))
def test_roots_roundtrip(int_roots):
    pol = PrecisionPolicy(decimal_digits=50)
    with pol.context():
        true = [mp.mpc(a, b) for a, b in int_roots]
        p = ComplexPoly.from_roots(true, pol)
        found = poly_roots(p, pol)
        assert len(found) == len(true)
        # greedy matching: multiplicity m clusters resolve to ~50/m digits
        left = list(found)
        for t in true:
            best = min(left, key=lambda r: abs(r - t))
            assert abs(best - t) < mp.mpf(10) ** -5
            left.remove(best)
