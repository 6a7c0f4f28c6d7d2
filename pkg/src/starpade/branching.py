"""The algebraic function f(z) = prod (z - a_j)^(alpha_j) with sum alpha = 0.

Everything here is about evaluating the branch of f that tends to 1 at
infinity: its Taylor coefficients in 1/z (exact rational arithmetic when
the data is rational, guarded mpc otherwise), and point evaluation by
analytic continuation along polylines with per-factor argument tracking.

Argument tracking along a straight step needs no subdivision: the angle a
segment subtends at any point not on it is strictly below pi, so the
principal argument of the endpoint ratio is the exact argument increment.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath as mp

from .polys import ComplexPoly
from .precision import PrecisionPolicy, mpc_of


class ConfigError(ValueError):
    pass


class EvalDomainError(Exception):
    """Evaluation point collided with a branch point."""


@dataclass(frozen=True)
class CR:
    """Complex number with exact rational parts."""

    re: Fraction
    im: Fraction

    def __add__(self, other):
        return CR(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return CR(self.re - other.re, self.im - other.im)

    def __neg__(self):
        return CR(-self.re, -self.im)

    def __mul__(self, other):
        if isinstance(other, CR):
            return CR(self.re * other.re - self.im * other.im,
                      self.re * other.im + self.im * other.re)
        q = Fraction(other)
        return CR(self.re * q, self.im * q)

    __rmul__ = __mul__

    def is_zero(self):
        return self.re == 0 and self.im == 0

    def to_mpc(self):
        return mp.mpc(mp.mpf(self.re.numerator) / self.re.denominator,
                      mp.mpf(self.im.numerator) / self.im.denominator)

    @staticmethod
    def zero():
        return CR(Fraction(0), Fraction(0))

    @staticmethod
    def one():
        return CR(Fraction(1), Fraction(0))


def _try_exact(point):
    """CR form of a point given as Fraction, int, or (re, im) pair of them."""
    if isinstance(point, CR):
        return point
    if isinstance(point, (int, Fraction)):
        return CR(Fraction(point), Fraction(0))
    if isinstance(point, tuple) and len(point) == 2:
        try:
            return CR(Fraction(point[0]), Fraction(point[1]))
        except (TypeError, ValueError):
            return None
    return None


@dataclass(frozen=True)
class BranchConfig:
    """Branch points with rational exponents summing to zero.

    Points may be given as mpc/complex/float (numeric), or exactly as
    Fraction/int/(Fraction, Fraction) pairs; when every point is exact the
    Taylor recurrence below runs in exact rational arithmetic.
    """

    points: tuple
    exponents: tuple
    exact_points: tuple = None

    @staticmethod
    def make(points: Sequence, exponents: Sequence) -> "BranchConfig":
        alphas = tuple(Fraction(e) for e in exponents)
        exact = tuple(_try_exact(p) for p in points)
        if any(e is None for e in exact):
            exact = None
        if exact is not None:
            # materialize well past any working precision used downstream
            with mp.workdps(500):
                pts = tuple(e.to_mpc() for e in exact)
        else:
            pts = tuple(mpc_of(p) for p in points)
        cfg = BranchConfig(pts, alphas, exact)
        cfg._validate()
        return cfg

    def _validate(self):
        p = len(self.points)
        if p < 2:
            raise ConfigError("need at least two branch points")
        if len(self.exponents) != p:
            raise ConfigError("points and exponents must pair up")
        if sum(self.exponents) != 0:
            raise ConfigError("exponents must sum to zero exactly")
        for j, a in enumerate(self.exponents):
            if a.denominator == 1:
                raise ConfigError(f"exponent {a} at position {j} is an integer;"
                                  " that point is not a branch point")
            if a <= -1:
                raise ConfigError(f"exponent {a} must exceed -1")
        for size in range(2, p):
            for combo in itertools.combinations(self.exponents, size):
                s = sum(combo)
                if s.denominator == 1:
                    raise ConfigError(
                        f"exponent subset {combo} sums to the integer {s}; "
                        "the function would split over a smaller cut system")
        for i in range(p):
            for j in range(i + 1, p):
                if abs(self.points[i] - self.points[j]) == 0:
                    raise ConfigError("branch points must be distinct")
        if p == 3:
            u = self.points[1] - self.points[0]
            w = self.points[2] - self.points[0]
            cross = abs(mp.im(u * mp.conj(w)))
            if cross < mp.mpf("1e-25") * max(abs(u), abs(w)) ** 2:
                raise ConfigError("three branch points must not be collinear")

    @property
    def degree(self) -> int:
        return len(self.points)

    def centroid(self):
        return mp.fsum(self.points) / len(self.points)

    def spread(self):
        c = self.centroid()
        return max(abs(a - c) for a in self.points)

    def base_point(self):
        """Anchor far to the right; the ray from here to +infinity stays in
        the half-plane Re(z - a_j) > 0 for every j, so principal logs give
        the branch of f tending to 1."""
        return self.centroid() + 8 * self.spread() + 1

    def alphas_mpf(self):
        return tuple(mp.mpf(a.numerator) / a.denominator for a in self.exponents)

    def poly_A(self, policy: PrecisionPolicy) -> ComplexPoly:
        """Monic prod (z - a_j)."""
        return ComplexPoly.from_roots(self.points, policy)

    def poly_B(self, policy: PrecisionPolicy) -> ComplexPoly:
        """Numerator of f'/f = B/A; degree at most p - 2 since sum alpha = 0."""
        total = None
        for j, aj in enumerate(self.alphas_mpf()):
            others = [a for k, a in enumerate(self.points) if k != j]
            term = ComplexPoly.from_roots(others, policy).scale(aj)
            total = term if total is None else total.add(term)
        cs = list(total.coeffs)
        while len(cs) > len(self.points) - 1 and abs(cs[-1]) < mp.mpf(10) ** (
                -(policy.decimal_digits // 2)):
            cs.pop()
        return ComplexPoly(tuple(cs))


def _poly_from_roots_exact(roots):
    cs = [CR.one()]
    for r in roots:
        cs = [CR.zero()] + cs
        for i in range(len(cs) - 1):
            cs[i] = cs[i] - r * cs[i + 1]
    return cs


def taylor_at_infinity(cfg: BranchConfig, count: int, policy: PrecisionPolicy):
    """f_0 .. f_count of f(z) = sum f_m z^(-m), the branch with f -> 1.

    From A f' = B f with A = prod (z - a_j) and B = sum_j alpha_j
    prod_{k != j} (z - a_k):

        f_{n+1} = -[ sum_{i<p} (n+1+i-p) A_i f_{n+1+i-p}
                   + sum_{i<=p-2} B_i f_{n+2+i-p} ] / (n + 1)

    with out-of-range indices dropped.  Exact rational arithmetic when the
    branch points are exact; otherwise mpc with guard digits sized to the
    recurrence length (the recurrence only mixes p recent terms with O(n)
    multipliers, so the loss is gentle; tests pin it down by re-running
    with doubled guards).
    """
    p = cfg.degree
    if cfg.exact_points is not None:
        A = _poly_from_roots_exact(cfg.exact_points)
        B = [CR.zero()] * p
        for j, alpha in enumerate(cfg.exponents):
            others = [a for k, a in enumerate(cfg.exact_points) if k != j]
            cs = _poly_from_roots_exact(others)
            for i, c in enumerate(cs):
                B[i] = B[i] + c * alpha
        if not B[-1].is_zero():
            raise AssertionError("leading coefficient of B must cancel")
        B = B[:-1]
        f = [CR.one()]
        for n in range(count):
            acc = CR.zero()
            for i in range(p):
                m = n + 1 + i - p
                if 1 <= m <= n:
                    acc = acc + (A[i] * f[m]) * m
            for i in range(p - 1):
                m2 = n + 2 + i - p
                if 0 <= m2 <= n:
                    acc = acc + B[i] * f[m2]
            f.append(acc * Fraction(-1, n + 1))
        return f  # exact, no rounding step
    extra = 20 + count // 2
    with policy.context(extra_digits=extra):
        A = [mpc_of(c) for c in cfg.poly_A(policy.with_digits(
            policy.decimal_digits + extra)).coeffs]
        Bp = cfg.poly_B(policy.with_digits(policy.decimal_digits + extra))
        B = list(Bp.coeffs) + [mp.mpc(0)] * (p - 1 - len(Bp.coeffs))
        f = [mp.mpc(1)]
        for n in range(count):
            acc = mp.mpc(0)
            for i in range(p):
                m = n + 1 + i - p
                if 1 <= m <= n:
                    acc += m * A[i] * f[m]
            for i in range(p - 1):
                m2 = n + 2 + i - p
                if 0 <= m2 <= n:
                    acc += B[i] * f[m2]
            f.append(-acc / (n + 1))
    with policy.context():
        return [+c for c in f]


@dataclass(frozen=True)
class TrackState:
    """A point together with continuously tracked arguments of z - c_k."""

    z: object
    thetas: tuple


class TrackedProduct:
    """Continuation of prod (z - c_k)^(e_k) along polylines.

    The exponent vector is fixed; states carry the tracked argument of
    every factor, so chaining continue_to calls continues the same branch.
    """

    def __init__(self, centers, exponents, policy: PrecisionPolicy):
        self.centers = [mpc_of(c) for c in centers]
        self.exponents = [mp.mpf(e.numerator) / e.denominator
                          if isinstance(e, Fraction) else mpc_of(e)
                          for e in exponents]
        self.policy = policy
        scale = max(abs(c) for c in self.centers) + 1
        self._floor = mp.mpf(10) ** (-2 * policy.decimal_digits) * scale

    def _check(self, z):
        for c in self.centers:
            if abs(z - c) <= self._floor:
                raise EvalDomainError(
                    f"point {mp.nstr(mp.mpc(z))} is on a product center")

    def start(self, z0) -> TrackState:
        """State at z0 with principal arguments for every factor."""
        z0 = mpc_of(z0)
        self._check(z0)
        return TrackState(z0, tuple(mp.arg(z0 - c) for c in self.centers))

    def continue_to(self, state: TrackState, z1) -> TrackState:
        """State at z1 continued along the straight segment from state.z."""
        z1 = mpc_of(z1)
        if z1 == state.z:
            return state
        self._check(z1)
        thetas = []
        for c, th in zip(self.centers, state.thetas):
            ratio = (z1 - c) / (state.z - c)
            thetas.append(th + mp.arg(ratio))
        return TrackState(z1, tuple(thetas))

    def along(self, points) -> TrackState:
        """State at the last vertex, continued along the whole polyline."""
        it = iter(points)
        state = self.start(next(it))
        for z in it:
            state = self.continue_to(state, z)
        return state

    def value(self, state: TrackState):
        acc = mp.mpc(0)
        for c, e, th in zip(self.centers, self.exponents, state.thetas):
            acc += e * mp.mpc(mp.log(abs(state.z - c)), th)
        return mp.exp(acc)

    def log_value(self, state: TrackState):
        acc = mp.mpc(0)
        for c, e, th in zip(self.centers, self.exponents, state.thetas):
            acc += e * mp.mpc(mp.log(abs(state.z - c)), th)
        return acc

    def value_with(self, state: TrackState, exponents):
        """Product over the same centers with a different exponent vector.

        Useful when several branches of related functions (say a square
        root field and its reciprocal times a polynomial) share the same
        tracked arguments."""
        acc = mp.mpc(0)
        for c, e, th in zip(self.centers, exponents, state.thetas):
            acc += mpc_of(e) * mp.mpc(mp.log(abs(state.z - c)), th)
        return mp.exp(acc)


def f_product(cfg: BranchConfig, policy: PrecisionPolicy) -> TrackedProduct:
    return TrackedProduct(cfg.points, cfg.exponents, policy)


def eval_f(cfg: BranchConfig, z, policy: PrecisionPolicy, waypoints=()):
    """f(z) on the branch that tends to 1 at infinity.

    Continuation runs from the far-right anchor through the given
    waypoints; the caller is responsible for choosing waypoints so the
    polyline avoids the cut system (see geometry.StarGeometry.route).
    Without waypoints this is the straight-chord continuation, which is
    the star-cut branch whenever the chord does not cross the cuts.
    """
    with policy.context(extra_digits=10):
        tp = f_product(cfg, policy)
        state = tp.along([cfg.base_point(), *waypoints, z])
        return tp.value(state)
