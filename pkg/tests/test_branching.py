from fractions import Fraction

import pytest
import sympy
from mpmath import mp

from starpade.branching import (BranchConfig, ConfigError, eval_f,
                                taylor_at_infinity)
from starpade.quadrature import Contour, integrate


HALF = Fraction(1, 2)


def as_mpc(c):
    """Exact configs give complex-rational coefficients; coerce for math."""
    return c.to_mpc() if hasattr(c, "to_mpc") else c


def test_rejects_nonzero_sum():
    with pytest.raises(ConfigError):
        BranchConfig.make((0, 1), (HALF, HALF))


def test_rejects_integer_exponent():
    with pytest.raises(ConfigError):
        BranchConfig.make((0, 1, 2j), (Fraction(1), Fraction(1, 2),
                                       Fraction(-3, 2)))


def test_rejects_exponent_at_minus_one():
    with pytest.raises(ConfigError):
        BranchConfig.make((0, 1, 2j), (Fraction(-1), HALF, HALF))


def test_rejects_integer_subset():
    # 1/2 + 1/2 = 1 splits off a two-point factor
    with pytest.raises(ConfigError):
        BranchConfig.make((0, 1, 2j, 5), (HALF, HALF, HALF, Fraction(-3, 2)))


def test_rejects_collinear_triple():
    with pytest.raises(ConfigError):
        BranchConfig.make((0, 1, 2), (Fraction(1, 4), Fraction(1, 4),
                                      Fraction(-1, 2)))


def test_rejects_duplicate_points():
    with pytest.raises(ConfigError):
        BranchConfig.make((1, 1), (HALF, -HALF))


def test_first_coefficient_formula(asym_cfg, pol60):
    # f_1 = -sum alpha_j a_j
    with pol60.context():
        coeffs = [as_mpc(c) for c in taylor_at_infinity(asym_cfg, 3, pol60)]
        target = -mp.fsum(mp.mpf(a.numerator) / a.denominator * p
                          for a, p in zip(asym_cfg.exponents,
                                          asym_cfg.points))
        assert abs(coeffs[1] - target) < mp.mpf(10) ** -55


def test_two_point_closed_form(pol60):
    # (z-1)^(1/2) (z+1)^(-1/2) = 1 - 1/z + (1/2)/z^2 + ...
    cfg = BranchConfig.make((1, -1), (HALF, -HALF))
    with pol60.context():
        coeffs = [as_mpc(c) for c in taylor_at_infinity(cfg, 3, pol60)]
        assert abs(coeffs[0] - 1) < mp.mpf(10) ** -55
        assert abs(coeffs[1] + 1) < mp.mpf(10) ** -55
        assert abs(coeffs[2] - mp.mpf(1) / 2) < mp.mpf(10) ** -55


def test_contour_coefficient_oracle(fig1_cfg, pol60):
    """f_k = (1/2 pi i) oint f(z) z^(k-1) dz on a circle outside the cuts,
    an independent route to the same coefficients as the recurrence."""
    K = 40
    with pol60.context():
        cen = fig1_cfg.centroid()
        rad = 2 * max(abs(p - cen) for p in fig1_cfg.points) + 1
        circ = Contour.circle(cen, rad, vertices=16)

        # scale the powers by rad^(1-k) so every component stays O(1)
        def integrand(z):
            f = eval_f(fig1_cfg, z, pol60)
            u = z / rad
            out = []
            acc = f / u
            for _ in range(K):
                acc = acc * u
                out.append(acc)
            return out

        vals = integrate(integrand, circ, pol60)
        series = taylor_at_infinity(fig1_cfg, K, pol60)
        tol = mp.mpf(10) ** -(pol60.decimal_digits // 3)
        for k in range(1, K + 1):
            oracle = vals[k - 1] / (2j * mp.pi) * rad ** (k - 1)
            sk = as_mpc(series[k])
            scale = max(mp.mpf(1), abs(sk))
            assert abs(oracle - sk) / scale < tol, f"k={k}"


def test_poly_b_constant_for_symmetric_pair(pol60):
    cfg = BranchConfig.make((1, -1), (HALF, -HALF))
    B = cfg.poly_B(pol60)
    assert B.degree == 0
    assert abs(B.coeffs[0] - 1) < mp.mpf(10) ** -55


def test_poly_b_cube_degree(cube_cfg, pol60):
    assert cube_cfg.poly_B(pol60).degree <= 1


def test_poly_b_exact_oracle(fig1_cfg, pol60):
    # B = sum_j alpha_j prod_{k != j} (z - a_k), expanded exactly
    z = sympy.symbols("z")
    pts = [sympy.Rational(-6, 5),
           sympy.Rational(7, 10) + sympy.Rational(7, 4) * sympy.I,
           sympy.Integer(1) + sympy.Rational(4, 5) * sympy.I]
    alphas = [sympy.Rational(-3, 7), sympy.Rational(1, 7),
              sympy.Rational(2, 7)]
    B_sym = sympy.expand(sum(a * sympy.prod([z - p for k2, p in enumerate(pts)
                                             if k2 != j])
                             for j, (a, _) in enumerate(zip(alphas, pts))))
    B = fig1_cfg.poly_B(pol60)
    with pol60.context():
        for k, c in enumerate(B.coeffs):
            cf = B_sym.coeff(z, k)
            re, im = sympy.re(cf), sympy.im(cf)
            want = mp.mpc(mp.mpf(int(re.p)) / int(re.q),
                          mp.mpf(int(im.p)) / int(im.q))
            assert abs(c - want) < mp.mpf(10) ** -40


def test_eval_matches_series_far_out(asym_cfg, pol60):
    with pol60.context():
        z = 10 * max(abs(p) for p in asym_cfg.points) * mp.exp(mp.mpc(0, 1))
        K = 30
        series = [as_mpc(c) for c in taylor_at_infinity(asym_cfg, K, pol60)]
        s = mp.fsum(series[k] * z ** (-k) for k in range(K + 1))
        direct = eval_f(asym_cfg, z, pol60)
        assert abs(direct - s) < mp.mpf(10) ** -10


def test_path_independence(asym_cfg, pol60):
    with pol60.context():
        z = mp.mpc(3, -2)
        a = eval_f(asym_cfg, z, pol60)
        b = eval_f(asym_cfg, z, pol60, waypoints=(mp.mpc(5, 3), mp.mpc(-4, 4),
                                                  mp.mpc(-4, -4)))
        assert abs(a - b) < mp.mpf(10) ** -50


def test_closed_loop_returns_same_branch(asym_cfg, pol60):
    # a loop around the whole configuration is trivial since sum alpha = 0
    with pol60.context():
        z = mp.mpc(4, 1)
        loop = (mp.mpc(0, 5), mp.mpc(-5, 0), mp.mpc(0, -5), mp.mpc(4, -3))
        a = eval_f(asym_cfg, z, pol60)
        b = eval_f(asym_cfg, z, pol60, waypoints=loop)
        assert abs(a - b) < mp.mpf(10) ** -50


def test_reciprocal_exponents(asym_cfg, pol60):
    neg = BranchConfig.make(asym_cfg.points,
                            tuple(-a for a in asym_cfg.exponents))
    with pol60.context():
        z = mp.mpc(2, 2)
        prod = eval_f(asym_cfg, z, pol60) * eval_f(neg, z, pol60)
        assert abs(prod - 1) < mp.mpf(10) ** -50
