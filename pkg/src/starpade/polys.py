"""Polynomials over mpc and the Aberth-Ehrlich simultaneous root finder."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import mpmath as mp

from .precision import PrecisionPolicy, mpc_of


class NonConvergence(Exception):
    """Aberth sweeps exhausted max_iter without meeting tolerance."""


@dataclass(frozen=True)
class ComplexPoly:
    """Coefficients ascending by degree, trimmed so the leader is nonzero.

    Trimming is relative: coefficients below 10^(-digits/2) times the max
    magnitude are treated as zero when deciding the degree. A genuinely
    tiny leading coefficient therefore *lowers* the degree, which is the
    signal the Pade engine uses for non-normal indices.
    """

    coeffs: tuple

    @staticmethod
    def make(coeffs: Sequence, policy: PrecisionPolicy) -> "ComplexPoly":
        cs = [mpc_of(c) for c in coeffs]
        if not cs:
            return ComplexPoly((mp.mpc(0),))
        top = max(abs(c) for c in cs)
        if top == 0:
            return ComplexPoly((mp.mpc(0),))
        floor = top * mp.mpf(10) ** (-(policy.decimal_digits // 2))
        last = 0
        for i, c in enumerate(cs):
            if abs(c) > floor:
                last = i
        return ComplexPoly(tuple(cs[:last + 1]))

    @staticmethod
    def from_roots(roots: Sequence, policy: PrecisionPolicy) -> "ComplexPoly":
        cs = [mp.mpc(1)]
        for r in roots:
            r = mpc_of(r)
            cs = [mp.mpc(0)] + cs
            for i in range(len(cs) - 1):
                cs[i] -= r * cs[i + 1]
        return ComplexPoly.make(cs, policy)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        z = mpc_of(z)
        acc = mp.mpc(0)
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    def derivative(self) -> "ComplexPoly":
        if self.degree == 0:
            return ComplexPoly((mp.mpc(0),))
        return ComplexPoly(tuple(k * c for k, c in enumerate(self.coeffs) if k > 0))

    def scale(self, s) -> "ComplexPoly":
        s = mpc_of(s)
        return ComplexPoly(tuple(s * c for c in self.coeffs))

    def monic(self) -> "ComplexPoly":
        lead = self.coeffs[-1]
        if lead == 0:
            raise ZeroDivisionError("zero polynomial has no monic form")
        return ComplexPoly(tuple(c / lead for c in self.coeffs))

    def mul(self, other: "ComplexPoly") -> "ComplexPoly":
        out = [mp.mpc(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return ComplexPoly(tuple(out))

    def add(self, other: "ComplexPoly") -> "ComplexPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        out = [mp.mpc(0)] * n
        for i, a in enumerate(self.coeffs):
            out[i] += a
        for i, b in enumerate(other.coeffs):
            out[i] += b
        return ComplexPoly(tuple(out))


def _initial_circle(coeffs, deg):
    """Cauchy-bound radius estimate with slightly irrational spacing."""
    lead = abs(coeffs[-1])
    r = mp.mpf(0)
    for c in coeffs[:-1]:
        r = max(r, (abs(c) / lead) ** (mp.mpf(1) / deg))
    r = max(r, mp.mpf("0.5"))
    two_pi = 2 * mp.pi
    return [mp.mpc(r) * mp.exp(mp.mpc(0, two_pi * k / deg + mp.mpf("0.4")))
            for k in range(deg)]


def poly_roots(p: ComplexPoly, policy: PrecisionPolicy, initial=None):
    """All roots with multiplicity by deflation-free Aberth-Ehrlich.

    Multiple roots converge only linearly and stall at the conditioning
    floor (a cluster of radius ~eps^(1/m)), so besides the newton_tol stop
    there is a stagnation stop: once the worst correction stops shrinking
    and is already below the cluster floor 10^(-digits/3), accept.
    """
    deg = p.degree
    if deg < 1:
        raise ValueError("degree must be >= 1")
    with policy.context(extra_digits=10):
        coeffs = [mpc_of(c) for c in p.coeffs]
        dcoeffs = [k * c for k, c in enumerate(coeffs) if k > 0]

        def horner(cs, z):
            acc = mp.mpc(0)
            for c in reversed(cs):
                acc = acc * z + c
            return acc

        if initial is not None and len(initial) == deg:
            zs = [mpc_of(z) for z in initial]
        else:
            zs = _initial_circle(coeffs, deg)

        scale = max(max(abs(z) for z in zs), mp.mpf(1))
        tol = mp.mpf(policy.newton_tol) * scale
        stall_floor = mp.mpf(10) ** (-(policy.decimal_digits // 3)) * scale
        best = mp.inf
        best_zs = list(zs)
        since_best = 0
        worst = mp.inf
        for _ in range(policy.max_iter):
            worst = mp.mpf(0)
            for i in range(deg):
                zi = zs[i]
                pv = horner(coeffs, zi)
                if pv == 0:
                    continue
                dv = horner(dcoeffs, zi)
                newton = dv / pv  # reciprocal Newton correction
                rep = mp.mpc(0)
                for j in range(deg):
                    if j != i:
                        dz = zi - zs[j]
                        if dz == 0:
                            dz = mp.mpf(10) ** (-policy.decimal_digits) * scale
                        rep += 1 / dz
                denom = newton - rep
                if denom == 0:
                    step = mp.mpc(tol)
                else:
                    step = 1 / denom
                zs[i] = zi - step
                worst = max(worst, abs(step))
            if worst < tol:
                return [mp.mpc(z) for z in zs]
            if worst < best * mp.mpf("0.9"):
                best = worst
                best_zs = list(zs)
                since_best = 0
            else:
                since_best += 1
            if since_best >= 12 and best < stall_floor:
                return [mp.mpc(z) for z in best_zs]
        raise NonConvergence(
            f"Aberth did not converge in {policy.max_iter} sweeps "
            f"(last correction {mp.nstr(worst)})")
