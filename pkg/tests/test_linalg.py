import random

import pytest
from mpmath import mp

from starpade.linalg import SingularMatrix, residual_inf, solve_dense
from starpade.precision import PrecisionPolicy


def test_identity_solve(pol60):
    with pol60.context():
        m = [[mp.mpc(1 if i == j else 0) for j in range(4)] for i in range(4)]
        rhs = [mp.mpc(k + 1) for k in range(4)]
        x = solve_dense(m, rhs, pol60)
        assert all(abs(x[k] - rhs[k]) == 0 for k in range(4))


def test_swap_matrix(pol60):
    with pol60.context():
        m = [[mp.mpc(0), mp.mpc(1)], [mp.mpc(1), mp.mpc(0)]]
        x = solve_dense(m, [mp.mpc(1), mp.mpc(2)], pol60)
        assert abs(x[0] - 2) < mp.mpf(10) ** -55
        assert abs(x[1] - 1) < mp.mpf(10) ** -55


def test_random_20x20_residual(pol60):
    rng = random.Random(20240817)
    with pol60.context():
        n = 20
        m = [[mp.mpc(rng.uniform(-1, 1), rng.uniform(-1, 1))
              for _ in range(n)] for _ in range(n)]
        rhs = [mp.mpc(rng.uniform(-1, 1), rng.uniform(-1, 1))
               for _ in range(n)]
        x = solve_dense(m, rhs, pol60)
        res = residual_inf(m, x, rhs, pol60)
        assert res < mp.mpf(10) ** -40


def test_singular_raises(pol60):
    with pol60.context():
        m = [[mp.mpc(1), mp.mpc(2)], [mp.mpc(2), mp.mpc(4)]]
        with pytest.raises(SingularMatrix):
            solve_dense(m, [mp.mpc(1), mp.mpc(0)], pol60)


def test_stats_pivot_extremes(pol60):
    with pol60.context():
        m = [[mp.mpc(4), mp.mpc(1)], [mp.mpc(1), mp.mpc(3)]]
        stats = {}
        solve_dense(m, [mp.mpc(1), mp.mpc(1)], pol60, stats=stats)
        assert 0 < stats["pivot_min"] <= stats["pivot_max"]


def test_higher_digits_tighter_residual():
    rng = random.Random(7)
    pol = PrecisionPolicy(decimal_digits=120)
    with pol.context():
        n = 10
        m = [[mp.mpc(rng.uniform(-1, 1), rng.uniform(-1, 1))
              for _ in range(n)] for _ in range(n)]
        rhs = [mp.mpc(1) for _ in range(n)]
        x = solve_dense(m, rhs, pol)
        assert residual_inf(m, x, rhs, pol) < mp.mpf(10) ** -100
