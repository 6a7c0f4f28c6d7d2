"""Diagonal Pade approximants to the star-branching function.

The [n/n] approximant P_n/Q_n is pinned down by Q_n f - P_n = O(z^(-n-1))
with deg Q_n <= n.  Matching the powers z^(-1) .. z^(-n) of Q_n f gives a
Hankel-structured linear system in the denominator coefficients; the
numerator is then read off from the nonnegative powers.  The denominator
coefficients double as complex orthogonality relations against the jump
weight rho = f_- - f_+ on the minimal-capacity star, which is what
``check_orthogonality`` verifies independently of the solver path.

Everything here consumes the expansion coefficients of f at infinity
(exact rationals when the branch points are exact) and the solved star
geometry; nothing feeds back, so distinct indices n can be computed
concurrently from one shared coefficient cache.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import mpmath as mp

from .branching import BranchConfig
from .geometry import StarGeometry
from .linalg import SingularMatrix, solve_dense
from .polys import ComplexPoly, poly_roots
from .precision import PrecisionPolicy, mpc_of


class NonNormalIndex(UserWarning):
    """A Pade index where the full-degree monic ansatz degenerates.

    Issued as a warning, never an error: the triple still comes back,
    with ``normal=False`` and the minimal-degree denominator that the
    retry chain found.  Downstream consumers must check the flag.
    """


class OnCut(ValueError):
    """Remainder evaluation was asked for a point on the cut system."""


class CoefficientCache:
    """Write-once cache of the expansion coefficients of f at infinity.

    ``first(count)`` returns [f_0, .., f_{count-1}].  Extending the cache
    recomputes the recurrence from scratch (it is O(count) and cheap) but
    already-published entries are never replaced, so concurrent readers
    holding earlier prefixes stay consistent.
    """

    def __init__(self, cfg: BranchConfig, policy: PrecisionPolicy):
        self.cfg = cfg
        self.policy = policy
        self._vals = []

    def first(self, count: int) -> list:
        if count > len(self._vals):
            from .branching import taylor_at_infinity
            fresh = taylor_at_infinity(self.cfg, count - 1, self.policy)
            self._vals = self._vals + fresh[len(self._vals):]
        return self._vals[:count]


@dataclass(frozen=True)
class PadeTriple:
    """One diagonal approximant: monic denominator, numerator, and the
    leading expansion coefficients of the remainder R_n = Q_n f - P_n
    at infinity (starting at z^(-n-1))."""

    n: int
    Q: ComplexPoly
    P: ComplexPoly
    remainder_coeffs: tuple
    normal: bool
    fixed_index: int          # which ansatz coefficient was pinned to 1
    pivot_ratio: float        # max/min |pivot| of the solve, conditioning hint

    def pi_at(self, z):
        return self.P(z) / self.Q(z)


SPURIOUS = "SPURIOUS"


@dataclass(frozen=True)
class ZeroReport:
    """Zeros of Q_n with their distance to the star and an arc label.

    ``entries`` rows are (zero, distance_to_star, label) with label an
    arc index or SPURIOUS; eps is the classification threshold used.
    """

    n: int
    eps: float
    entries: tuple

    def spurious(self):
        return [e for e in self.entries if e[2] == SPURIOUS]

    def per_arc_counts(self):
        counts = [0, 0, 0]
        for _, _, lab in self.entries:
            if lab != SPURIOUS:
                counts[lab] += 1
        return counts


def _coeffs_mpc(cfg, count, policy, cache=None):
    if cache is not None:
        raw = cache.first(count)
    else:
        from .branching import taylor_at_infinity
        raw = taylor_at_infinity(cfg, count - 1, policy)
    out = []
    for c in raw:
        out.append(c.to_mpc() if hasattr(c, "to_mpc") else mpc_of(c))
    return out


def frobenius_solve(cfg: BranchConfig, n: int, policy: PrecisionPolicy,
                    cache: CoefficientCache | None = None,
                    n_remainder: int = 4) -> PadeTriple:
    """Solve the power-matching system for the [n/n] approximant.

    The homogeneous conditions sum_{i=0}^{n} q_i f_{i+l} = 0, l = 1..n,
    are squared up by pinning q_n = 1; if that system is singular the
    next-lower coefficient is pinned instead (and so on), the result is
    re-normalized monic, and the index is flagged non-normal.  The flag
    also trips when the contact order overshoots: the z^(-2n-1)
    coefficient of the remainder sits below the cancellation floor of
    its defining sum.
    """
    extra = 15 + n // 4
    with policy.context(extra_digits=extra):
        f = _coeffs_mpc(cfg, 2 * n + n_remainder + 1, policy, cache)
        if n == 0:
            rem = tuple(f[1:1 + n_remainder])
            return PadeTriple(0, ComplexPoly.make([1], policy),
                              ComplexPoly.make([1], policy),
                              rem, True, 0, 1.0)
        sol = None
        for fix in range(n, -1, -1):
            cols = [i for i in range(n + 1) if i != fix]
            M = [[f[i + el] for i in cols] for el in range(1, n + 1)]
            rhs = [-f[fix + el] for el in range(1, n + 1)]
            stats = {}
            try:
                sol = solve_dense(M, rhs, policy, stats=stats)
            except SingularMatrix:
                continue
            break
        if sol is None:
            raise SingularMatrix(
                f"every pinned column left the n={n} system singular")
        q = list(sol)
        q.insert(fix, mp.mpc(1))
        normal = fix == n
        # monic renormalization (the retry chain can leave junk above the
        # true degree)
        qmax = max(abs(c) for c in q)
        floor = mp.mpf(10) ** (-(policy.decimal_digits // 2)) * qmax
        top = max(i for i, c in enumerate(q) if abs(c) > floor)
        q = [c / q[top] for c in q[:top + 1]]
        if top != n:
            normal = False
        # numerator: nonnegative powers of Q f
        p = [mp.fsum(q[i] * f[i - j] for i in range(j, top + 1))
             for j in range(top + 1)]
        # remainder coefficients r_l, l = n+1 .. n+n_remainder, with the
        # cancellation floor of the leading one deciding extra contact
        rem = []
        lead_scale = mp.mpf(0)
        for el in range(n + 1, n + 1 + n_remainder):
            terms = [q[i] * f[i + el] for i in range(top + 1)]
            rem.append(mp.fsum(terms))
            if el == n + 1:
                lead_scale = max(abs(t) for t in terms) + mp.mpf(1e-300)
        if abs(rem[0]) <= mp.mpf(10) ** (
                -(policy.decimal_digits // 2)) * lead_scale:
            normal = False
        pivot_ratio = float(stats["pivot_max"] / stats["pivot_min"]) \
            if stats else float("inf")
        if not normal:
            warnings.warn(f"index n={n} is not normal (fixed ansatz "
                          f"coefficient {fix}, degree {top})",
                          NonNormalIndex, stacklevel=2)
        return PadeTriple(n, ComplexPoly.make(q, policy),
                          ComplexPoly.make(p, policy), tuple(rem),
                          normal, fix, pivot_ratio)


def contact_residuals(triple: PadeTriple, cfg: BranchConfig,
                      policy: PrecisionPolicy,
                      cache: CoefficientCache | None = None):
    """Coefficients of z^(-1)..z^(-n) of Q f - P, normalized by the size
    of their defining sums.  A definition-level check independent of the
    solver path: all of them must vanish to working tolerance."""
    n = triple.n
    with policy.context(extra_digits=15 + n // 4):
        f = _coeffs_mpc(cfg, 2 * n + 1, policy, cache)
        q = triple.Q.coeffs
        out = []
        for el in range(1, n + 1):
            terms = [q[i] * f[i + el] for i in range(len(q))]
            scale = max(abs(t) for t in terms) + mp.mpf(1e-300)
            out.append(float(abs(mp.fsum(terms)) / scale))
        return out


# -- orthogonality against the jump weight ------------------------------

class MomentTable:
    """Weight moments mu_m = int_Gamma t^m rho(t) dt, rho = f_+ - f_-.

    The sign convention follows the package's Plemelj bookkeeping (arcs
    oriented a_j -> v, + on the left): with this rho the Cauchy
    transform of rho reproduces f - 1.  One adaptive pass per arc side
    carries every power at once (the integrand is a vector), so a whole
    n-sweep of orthogonality checks costs six quadratures total.
    ``abs_values`` carries the companion scale integrals
    int |t|^m |f| |dt| at ten digits, used only to normalize residuals.
    """

    def __init__(self, geom: StarGeometry, policy: PrecisionPolicy):
        self.geom = geom
        self.policy = policy
        self.count = 0
        self.values = []
        self.abs_values = []

    def _q_flags(self, arc_id):
        alpha = self.geom.cfg.exponents[arc_id]
        return alpha.denominator, 1

    def extend(self, count: int):
        if count <= self.count:
            return
        geom = self.geom
        with self.policy.context(extra_digits=10):
            vals = [mp.mpc(0)] * count
            avals = [mp.mpf(0)] * count
            loose = PrecisionPolicy(decimal_digits=self.policy.decimal_digits,
                                    quad_rel_tol=1e-10,
                                    max_iter=self.policy.max_iter)
            for j in range(3):
                q_a, q_v = self._q_flags(j)
                sw_m = geom.sweep("f", j, -1)
                sw_p = geom.sweep("f", j, +1)

                def mk(sign, sw):
                    def make_vals(t, st, sign=sign, sw=sw):
                        base = sw.tp.value(st)
                        out = [None] * count
                        acc = sign * base
                        out[0] = acc
                        for m in range(1, count):
                            acc = acc * t
                            out[m] = acc
                        return out
                    return make_vals

                vm, _ = sw_m.integrate(mk(-1, sw_m), q_a=q_a, q_v=q_v)
                vp, _ = sw_p.integrate(mk(+1, sw_p), q_a=q_a, q_v=q_v)
                for m in range(count):
                    vals[m] += vm[m] + vp[m]

                # scale integrals: |f_+| = |f_-| on the arc (the sides
                # differ by a unimodular factor), so one side's |f| is a
                # factor-two envelope of |rho|; ten digits suffice for a
                # denominator
                def abs_vals(t, st, count=count, sw_m=sw_m):
                    base = abs(sw_m.tp.value(st))
                    out = [None] * count
                    acc = base
                    out[0] = acc
                    at = abs(t)
                    for m in range(1, count):
                        acc = acc * at
                        out[m] = acc
                    return out

                va, _ = sw_m.integrate(abs_vals, q_a=q_a, q_v=q_v,
                                       policy=loose, arclength=True)
                for m in range(count):
                    avals[m] += abs(va[m])
            self.values = vals
            self.abs_values = avals
            self.count = count


def check_orthogonality(triple: PadeTriple, cfg: BranchConfig,
                        geom: StarGeometry, policy: PrecisionPolicy,
                        moments: MomentTable | None = None) -> float:
    """Max over k = 0..n-1 of |int t^k Q_n rho dt| / (absolute scale).

    The scale for power k is sum_i |q_i| abs_mu_{k+i}: the absolute-value
    moments of the weight against |t|^m, so a residual of 1e-d certifies
    d digits of genuine cancellation in the orthogonality relation.
    """
    n = triple.n
    if n == 0:
        return 0.0
    if moments is None:
        moments = MomentTable(geom, policy)
    moments.extend(2 * n)
    q = triple.Q.coeffs
    with policy.context(extra_digits=10):
        worst = mp.mpf(0)
        for k in range(n):
            num = abs(mp.fsum(q[i] * moments.values[k + i]
                              for i in range(len(q))))
            den = mp.fsum(abs(q[i]) * moments.abs_values[k + i]
                          for i in range(len(q)))
            worst = max(worst, num / den)
        return float(worst)


def eval_remainder(triple: PadeTriple, cfg: BranchConfig,
                   geom: StarGeometry, z, policy: PrecisionPolicy):
    """R_n(z) = (1/2 pi i) int Q_n(t) rho(t)/(t - z) dt, rho = f_+ - f_-.

    Adaptive bisection of each arc-side quadrature already resolves the
    kernel's variation as z approaches the star (each halving shortens
    the segments the kernel sees), so no extra splitting pass is needed;
    z within the endpoint-degeneracy band raises OnCut instead.
    """
    z = mpc_of(z)
    dist, _ = geom.distance_to_arcs(z)
    if dist < 1e-12 * float(geom.R_star):
        raise OnCut("remainder evaluation on the cut system")
    with policy.context(extra_digits=10):
        total = mp.mpc(0)
        for j in range(3):
            alpha = cfg.exponents[j]
            q_a, q_v = alpha.denominator, 1
            for side, sign in ((-1, -1), (+1, +1)):
                sw = geom.sweep("f", j, side)

                def vals(t, st, sign=sign, sw=sw):
                    return sign * triple.Q(t) * sw.tp.value(st) / (t - z)

                part, _ = sw.integrate(vals, q_a=q_a, q_v=q_v)
                total += part
        return total / (2 * mp.pi * mp.mpc(0, 1))


def eval_remainder_series(triple: PadeTriple, z):
    """R_n(z) from its stored expansion coefficients at infinity.

    Needs the triple to have been solved with enough remainder terms
    (``n_remainder`` in frobenius_solve) for the tail at this z to be
    negligible; the estimated truncation bound is returned alongside the
    value.  Raises ValueError when the terms are not visibly decaying,
    i.e. z is too close to the expansion's divergence radius.
    """
    z = mpc_of(z)
    zi = 1 / z
    acc = mp.mpc(0)
    mags = []
    power = zi ** (triple.n + 1)
    for c in triple.remainder_coeffs:
        term = c * power
        acc += term
        mags.append(abs(term))
        power *= zi
    tail = mags[-min(8, len(mags)):]
    ratio = mp.mpf(0)
    for a, b in zip(tail, tail[1:]):
        if a > 0:
            ratio = max(ratio, b / a)
    if ratio >= mp.mpf("0.8") or len(mags) < 2:
        raise ValueError(
            "remainder series is not decaying at this point; evaluate "
            "closer to infinity or store more coefficients")
    bound = mags[-1] * ratio / (1 - ratio) if ratio > 0 else mags[-1]
    return acc, bound


def classify_zeros(triple: PadeTriple, geom: StarGeometry,
                   policy: PrecisionPolicy, eps=None,
                   root_seed=None) -> ZeroReport:
    """Locate the zeros of Q_n and label each by nearest arc or SPURIOUS.

    eps defaults to 0.05 * diameter(star).  root_seed warm-starts the
    root finder (pass the previous index's zeros during an n-sweep).
    """
    with policy.context(extra_digits=10):
        if eps is None:
            eps = mp.mpf("0.05") * geom.diameter()
        zeros = poly_roots(triple.Q, policy, initial=root_seed)
        entries = []
        for z in zeros:
            dist, arc = geom.distance_to_arcs(z)
            lab = arc if dist <= eps else SPURIOUS
            entries.append((z, float(dist), lab))
        return ZeroReport(triple.n, float(eps), tuple(entries))
