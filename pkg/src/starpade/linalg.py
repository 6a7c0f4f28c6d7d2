"""Dense complex linear solve at working precision.

LU with partial pivoting on plain lists of mpc. mpmath's own lu_solve only
raises on an exactly-zero pivot; the contract here needs a relative pivot
threshold so nearly-singular Frobenius systems fail loudly instead of
returning garbage.
"""

from __future__ import annotations

import mpmath as mp

from .precision import PrecisionPolicy, mpc_of


class SingularMatrix(Exception):
    """Pivot fell below the relative threshold during elimination."""


def solve_dense(matrix, rhs, policy: PrecisionPolicy, stats=None):
    """Solve A x = b. Returns list of mpc; raises SingularMatrix.

    A pivot counts as zero when its magnitude is below
    10^(-digits+5) * max|A_ij|.  When stats is a dict it receives
    pivot_max and pivot_min (a cheap conditioning hint).
    """
    n = len(matrix)
    if n == 0:
        if stats is not None:
            stats["pivot_max"] = stats["pivot_min"] = mp.mpf(1)
        return []
    if any(len(row) != n for row in matrix):
        raise ValueError("matrix must be square")
    if len(rhs) != n:
        raise ValueError("rhs length does not match matrix")

    with policy.context(extra_digits=10):
        a = [[mpc_of(matrix[i][j]) for j in range(n)] for i in range(n)]
        b = [mpc_of(rhs[i]) for i in range(n)]
        anorm = max((abs(a[i][j]) for i in range(n) for j in range(n)),
                    default=mp.mpf(0))
        if anorm == 0:
            raise SingularMatrix("zero matrix")
        pivot_floor = anorm * mp.mpf(10) ** (-policy.decimal_digits + 5)

        piv_lo = piv_hi = None
        for col in range(n):
            piv_row = max(range(col, n), key=lambda r: abs(a[r][col]))
            if abs(a[piv_row][col]) <= pivot_floor:
                raise SingularMatrix(
                    f"pivot {abs(a[piv_row][col])} below floor at column {col}")
            mag = abs(a[piv_row][col])
            piv_lo = mag if piv_lo is None else min(piv_lo, mag)
            piv_hi = mag if piv_hi is None else max(piv_hi, mag)
            if piv_row != col:
                a[col], a[piv_row] = a[piv_row], a[col]
                b[col], b[piv_row] = b[piv_row], b[col]
            inv_piv = 1 / a[col][col]
            for r in range(col + 1, n):
                factor = a[r][col] * inv_piv
                if factor != 0:
                    a[r][col] = mp.mpc(0)
                    for c in range(col + 1, n):
                        a[r][c] -= factor * a[col][c]
                    b[r] -= factor * b[col]

        x = [mp.mpc(0)] * n
        for r in range(n - 1, -1, -1):
            s = b[r]
            for c in range(r + 1, n):
                s -= a[r][c] * x[c]
            x[r] = s / a[r][r]
        if stats is not None:
            stats["pivot_max"] = piv_hi
            stats["pivot_min"] = piv_lo
    return x


def residual_inf(matrix, x, rhs, policy: PrecisionPolicy):
    """max_i |A x - b|_i, evaluated with guard digits."""
    n = len(matrix)
    with policy.context(extra_digits=10):
        worst = mp.mpf(0)
        for i in range(n):
            s = -mpc_of(rhs[i])
            for j in range(n):
                s += mpc_of(matrix[i][j]) * mpc_of(x[j])
            worst = max(worst, abs(s))
    return worst
