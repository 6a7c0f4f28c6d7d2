"""Working-precision policy and mpmath context helpers.

Everything downstream receives a PrecisionPolicy and runs inside
``with policy.context():`` so that a single experiment is consistent even
when callers keep different global mpmath settings.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

import mpmath as mp


def default_digits(n_max: int) -> int:
    """Working decimal digits for a sweep whose largest Pade index is n_max.

    The Frobenius system's conditioning grows geometrically in n, so the
    digit budget grows linearly: max(50, 4n + 20).
    """
    return max(50, 4 * n_max + 20)


@dataclass(frozen=True)
class PrecisionPolicy:
    """Numeric knobs shared by every operation in one experiment.

    decimal_digits: working precision for mpmath.
    quad_rel_tol: relative tolerance for adaptive quadrature.
    newton_tol: absolute tolerance (relative to natural scale) for Newton
        solves and root polishing.
    max_iter: iteration cap for Newton loops and Aberth sweeps.
    """

    decimal_digits: int = 50
    quad_rel_tol: float = field(default=0.0)  # 0 -> derived from digits
    newton_tol: float = field(default=0.0)    # 0 -> derived from digits
    max_iter: int = 400

    def __post_init__(self):
        if self.decimal_digits < 30:
            raise ValueError("decimal_digits must be >= 30")
        # Derived tolerances are stored as machine floats, which bottom out
        # near 1e-308; clamp the exponent so very-high-digit policies still
        # construct (quadrature tighter than 1e-300 is unreachable anyway).
        if self.quad_rel_tol == 0.0:
            object.__setattr__(self, "quad_rel_tol",
                               10.0 ** (-min(self.decimal_digits - 10, 300)))
        if self.newton_tol == 0.0:
            object.__setattr__(self, "newton_tol",
                               10.0 ** (-min(self.decimal_digits // 2, 300)))
        if not (0.0 < self.quad_rel_tol <= 1e-6):
            raise ValueError("quad_rel_tol must lie in (0, 1e-6]")
        if not (0.0 < self.newton_tol <= 1e-6):
            raise ValueError("newton_tol must lie in (0, 1e-6]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")

    @contextlib.contextmanager
    def context(self, extra_digits: int = 0):
        """Run a block at this policy's precision (optionally padded)."""
        with mp.workdps(self.decimal_digits + extra_digits):
            yield mp.mp

    def with_digits(self, decimal_digits: int) -> "PrecisionPolicy":
        return PrecisionPolicy(decimal_digits=decimal_digits,
                               max_iter=self.max_iter)

    @property
    def trim_threshold(self) -> float:
        """Relative magnitude below which polynomial coefficients trim."""
        return 10.0 ** (-(self.decimal_digits // 2))


def mpc_of(x) -> mp.mpc:
    """Coerce ints/floats/Fractions/complex/mp types to mpc losslessly."""
    if isinstance(x, mp.mpc):
        return x
    if isinstance(x, complex):
        return mp.mpc(x.real, x.imag)
    if hasattr(x, "numerator") and hasattr(x, "denominator"):
        return mp.mpc(mp.mpf(x.numerator) / mp.mpf(x.denominator))
    return mp.mpc(x)
