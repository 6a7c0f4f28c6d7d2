"""Adaptive Gauss-Legendre quadrature along polyline contours.

Contours are polylines of mpc vertices.  The first and last vertex may be
flagged as algebraic endpoints with an integer exponent q: the affected
segment is then integrated in the variable s with t = vertex + (other -
vertex) * s**q, which turns any branching of the integrand in powers of
(t - vertex)**(k/q) into an analytic function of s and restores geometric
convergence of the Gauss rule.  Integrands that only blow up like an
inverse square root use q = 2; more general rational exponents p/q need
the denominator q.

Integrands may return a single mpc or a list of mpc (one quadrature pass
shared by many integrands); convergence is then judged on the worst
component.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import mpmath as mp

from .precision import PrecisionPolicy, mpc_of


class QuadratureError(Exception):
    pass


class ToleranceNotReached(QuadratureError):
    """Carries the best value and error estimate reached before giving up."""

    def __init__(self, message, value, error):
        super().__init__(message)
        self.value = value
        self.error = error


class SingularInterior(QuadratureError):
    """Integrand returned a non-finite value away from flagged endpoints."""


_NODE_CACHE: dict = {}

_ORDERS = (32, 64, 128, 256)
_MAX_SPLIT_DEPTH = 48


def legendre_nodes(order: int, dps: int):
    """Nodes and weights of the order-point Gauss-Legendre rule on [-1, 1].

    Newton on the Legendre recurrence from the Tricomi estimate; only the
    non-negative half is solved, the rest mirrored.  Cached per (order, dps).
    """
    key = (order, dps)
    hit = _NODE_CACHE.get(key)
    if hit is not None:
        return hit
    with mp.workdps(dps + 10):
        stop = mp.mpf(10) ** (-(dps + 5))

        def legendre_pair(x):
            p0, p1 = mp.mpf(1), x
            for j in range(2, order + 1):
                p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
            dp = order * (x * p1 - p0) / (x * x - 1)
            return p1, dp

        half = []
        for k in range(1, order // 2 + 1):
            x = mp.cos(mp.pi * (k - mp.mpf(1) / 4) / (order + mp.mpf(1) / 2))
            for _ in range(100):
                p, dp = legendre_pair(x)
                dx = p / dp
                x -= dx
                if abs(dx) < stop:
                    break
            _, dp = legendre_pair(x)
            w = 2 / ((1 - x * x) * dp * dp)
            half.append((x, w))
        pairs = [(-x, w) for x, w in half]
        if order % 2 == 1:
            _, dp = legendre_pair(mp.mpf(0))
            pairs.append((mp.mpf(0), 2 / (dp * dp)))
        pairs.extend((x, w) for x, w in reversed(half))
    _NODE_CACHE[key] = pairs
    return pairs


@dataclass(frozen=True)
class Contour:
    """Oriented polyline with optional algebraic endpoint exponents."""

    points: tuple
    q_start: int = 1
    q_end: int = 1

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("a contour needs at least two vertices")
        if self.q_start < 1 or self.q_end < 1:
            raise ValueError("endpoint exponents must be positive integers")

    @staticmethod
    def line(a, b, q_start: int = 1, q_end: int = 1) -> "Contour":
        return Contour((mpc_of(a), mpc_of(b)), q_start, q_end)

    @staticmethod
    def polyline(points: Sequence, q_start: int = 1, q_end: int = 1) -> "Contour":
        return Contour(tuple(mpc_of(p) for p in points), q_start, q_end)

    @staticmethod
    def circle(center, radius, vertices: int = 24) -> "Contour":
        """Closed positively oriented polygon inscribed in the circle.

        Exact only for integrands analytic in a neighbourhood of the
        annulus swept between polygon and circle (every use here), by
        deformation of the path.
        """
        c = mpc_of(center)
        r = mpc_of(radius)
        pts = [c + r * mp.exp(mp.mpc(0, 2 * mp.pi * k / vertices))
               for k in range(vertices)]
        pts.append(pts[0])
        return Contour(tuple(pts))

    def reversed_(self) -> "Contour":
        return Contour(tuple(reversed(self.points)), self.q_end, self.q_start)

    @property
    def start(self):
        return self.points[0]

    @property
    def end(self):
        return self.points[-1]

    def length(self):
        return mp.fsum(abs(b - a) for a, b in zip(self.points, self.points[1:]))


def _is_vector(val):
    return isinstance(val, (list, tuple))


def _vadd(a, b):
    if _is_vector(a):
        return [x + y for x, y in zip(a, b)]
    return a + b


def _vneg(a):
    if _is_vector(a):
        return [-x for x in a]
    return -a


def _vmag(a):
    if _is_vector(a):
        return max(abs(x) for x in a) if a else mp.mpf(0)
    return abs(a)


def _vfinite(a):
    vals = a if _is_vector(a) else [a]
    for x in vals:
        x = mp.mpc(x)
        for part in (x.real, x.imag):
            if mp.isnan(part) or mp.isinf(part):
                return False
    return True


def _gauss_piece(f, a, b, q, lo, hi, order, dps):
    """Gauss sum of f(t) dt, t = a + (b-a) s**q, over s in [lo, hi].

    Nodes are mapped to t at boosted precision so that a later t - a
    inside the integrand recovers (b-a) s**q to full relative accuracy
    despite the cancellation.
    """
    pairs = legendre_nodes(order, dps)
    half = (hi - lo) / 2
    mid = (lo + hi) / 2
    boost = 0
    if q > 1:
        smallest = mid + half * pairs[0][0]
        if smallest > 0:
            boost = int(q * mp.log10(1 / smallest)) + 8
    ba = b - a
    total = None
    for x, w in pairs:
        with mp.workdps(dps + max(boost, 0)):
            s = mid + half * x
            if q == 1:
                t = a + ba * s
                jac = ba
            else:
                sq = s ** (q - 1)
                t = a + ba * (sq * s)
                jac = q * ba * sq
        val = f(t)
        if not _vfinite(val):
            raise SingularInterior(
                f"integrand not finite at t = {mp.nstr(mp.mpc(t))}")
        if _is_vector(val):
            contrib = [v * (w * half) * jac for v in val]
        else:
            contrib = val * (w * half) * jac
        total = contrib if total is None else _vadd(total, contrib)
    return total


def _adaptive_01(f, a, b, q, lo, hi, tol_abs, dps, depth):
    prev = None
    for order in _ORDERS:
        cur = _gauss_piece(f, a, b, q, lo, hi, order, dps)
        if prev is not None:
            err = _vmag(_vadd(cur, _vneg(prev)))
            if err <= tol_abs:
                return cur, err
        prev = cur
    if depth >= _MAX_SPLIT_DEPTH:
        raise ToleranceNotReached(
            f"quadrature stalled at depth {depth} with error ~{mp.nstr(err)}",
            cur, err)
    mid = (lo + hi) / 2
    left, el = _adaptive_01(f, a, b, q, lo, mid, tol_abs / 2, dps, depth + 1)
    right, er = _adaptive_01(f, a, b, q, mid, hi, tol_abs / 2, dps, depth + 1)
    return _vadd(left, right), el + er


def _segment_jobs(contour: Contour):
    """Split the polyline into (a, b, q, sign) straight jobs.

    End-flagged segments are integrated reversed (so the flagged vertex is
    the s = 0 end) and negated; a single segment flagged at both ends is
    cut at its midpoint first.
    """
    pts = contour.points
    jobs = []
    last = len(pts) - 2
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        if a == b:
            continue
        qs = contour.q_start if i == 0 else 1
        qe = contour.q_end if i == last else 1
        if qs > 1 and qe > 1:
            m = (a + b) / 2
            jobs.append((a, m, qs, 1))
            jobs.append((b, m, qe, -1))
        elif qe > 1:
            jobs.append((b, a, qe, -1))
        else:
            jobs.append((a, b, qs, 1))
    return jobs


def integrate_with_error(f: Callable, contour: Contour, policy: PrecisionPolicy,
                         extra_digits: int = 0):
    """Integral of f along the contour and an error estimate.

    Tolerance is policy.quad_rel_tol relative to the L1 sum of the piece
    magnitudes (so cancellation between pieces can reduce the achieved
    relative accuracy of the total; all tolerances in this package leave
    room for that).
    """
    dps = policy.decimal_digits + 10 + extra_digits
    with mp.workdps(dps):
        jobs = _segment_jobs(contour)
        if not jobs:
            return mp.mpc(0), mp.mpf(0)
        coarse = []
        scale = mp.mpf(0)
        for a, b, q, sign in jobs:
            est = _gauss_piece(f, a, b, q, mp.mpf(0), mp.mpf(1), _ORDERS[0], dps)
            coarse.append(est)
            scale += _vmag(est)
        scale = max(scale, mp.mpf(10) ** (-(policy.decimal_digits // 2)))
        tol_abs = mp.mpf(policy.quad_rel_tol) * scale / len(jobs)
        total = None
        err_total = mp.mpf(0)
        for (a, b, q, sign), est in zip(jobs, coarse):
            val, err = _adaptive_01(f, a, b, q, mp.mpf(0), mp.mpf(1),
                                    tol_abs, dps, 0)
            if sign < 0:
                val = _vneg(val)
            total = val if total is None else _vadd(total, val)
            err_total += err
        return total, err_total


def integrate(f: Callable, contour: Contour, policy: PrecisionPolicy,
              extra_digits: int = 0):
    """Integral of f along the contour (see integrate_with_error)."""
    value, _ = integrate_with_error(f, contour, policy, extra_digits)
    return value
