"""Minimal-capacity star geometry for three branch points.

The square-root field T(z) = ((z - v)/A(z))^(1/2) with zT -> 1 at infinity
drives everything: the center v is fixed by Re int_{a_j}^{v} T dt = 0 on
straight segments, the three arcs are traced as level curves Re h = 0 of
h(z) = int_{a_j}^{z} T dt, and the rays Im h = 0 from the center and from
the branch points organize the complement (they are not cuts of any
function here, so paths may cross them freely; only the arcs are cuts).

Positions coming out of the tracer are good to far more than the widths
of any tolerance used downstream, but they are deliberately not computed
to full working precision: integrals along the traced polylines equal the
integrals along the true arcs exactly, by deformation inside the strip
where every integrand is analytic, because the polylines share the exact
endpoints a_j and v.  Tracing therefore runs at reduced precision while
boundary sweeps and quadratures run at full precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp

from .branching import BranchConfig, TrackedProduct, TrackState
from .precision import PrecisionPolicy, mpc_of
from .quadrature import Contour, integrate_with_error, legendre_nodes

HALF = Fraction(1, 2)


class CollinearPoints(Exception):
    pass


class NewtonDiverged(Exception):
    pass


class StepCollapse(Exception):
    pass


class RoutingError(Exception):
    pass


def sqrt_field_product(points, v, policy: PrecisionPolicy) -> TrackedProduct:
    """Tracked product over centers [v, a_1, a_2, a_3].

    With exponents (1/2, -1/2, -1/2, -1/2) its value is T; the companion
    exponent vectors below give w = (A * (z - v))^(1/2) and friends off
    the same tracked arguments."""
    return TrackedProduct([v, *points], [HALF, -HALF, -HALF, -HALF], policy)


T_EXPS = (HALF, -HALF, -HALF, -HALF)
W_EXPS = (HALF, HALF, HALF, HALF)
INV_W_EXPS = (-HALF, -HALF, -HALF, -HALF)


def _seg_center_residual(a, vg, points, policy):
    """(F, dF/dv) with F = int_a^{vg} T dt on the straight segment.

    The branch is anchored at the segment midpoint with principal
    arguments; a global sign flip changes F and dF/dv together, so the
    Newton step for Re F = 0 is unaffected.  dF/dv = -int dt/(2w) because
    T vanishes at the moving endpoint."""
    tp = TrackedProduct([vg, *points], list(T_EXPS), policy)
    anchor = tp.start((mpc_of(a) + mpc_of(vg)) / 2)

    def vals(t):
        st = tp.continue_to(anchor, t)
        tv = tp.value(st)
        inv_w = tp.value_with(st, INV_W_EXPS)
        return [tv, -inv_w / 2]

    contour = Contour.line(a, vg, q_start=2, q_end=2)
    (F, Fp), _ = integrate_with_error(vals, contour, policy)
    return F, Fp


def solve_center(cfg: BranchConfig, policy: PrecisionPolicy):
    """The point v with Re int_{a_j}^{v} T dt = 0 for all three j.

    Newton on the first two conditions (the third is checked afterwards),
    seeded at the centroid with a ring of fallback seeds.  A coarse pass
    at reduced precision localizes v; polish iterations at full precision
    finish it, each one roughly doubling the correct digits."""
    if cfg.degree != 3:
        raise CollinearPoints("the star geometry needs exactly three branch points")
    pts = cfg.points
    centroid = cfg.centroid()
    R = cfg.spread()
    seeds = [centroid]
    for k in range(8):
        seeds.append(centroid + mp.mpf("0.45") * R *
                     mp.exp(mp.mpc(0, 2 * mp.pi * k / 8 + mp.mpf("0.35"))))

    coarse = policy.with_digits(40)

    def newton(v0, pol, tol_step, iters):
        v = mpc_of(v0)
        with pol.context(extra_digits=10):
            tol = mp.mpf(tol_step) * R
            for _ in range(iters):
                F1, F1p = _seg_center_residual(pts[0], v, pts, pol)
                F2, F2p = _seg_center_residual(pts[1], v, pts, pol)
                g1, g2 = mp.re(F1), mp.re(F2)
                j11, j12 = mp.re(F1p), -mp.im(F1p)
                j21, j22 = mp.re(F2p), -mp.im(F2p)
                det = j11 * j22 - j12 * j21
                if abs(det) < mp.mpf(10) ** (-2 * pol.decimal_digits):
                    return None
                dx = -(g1 * j22 - g2 * j12) / det
                dy = -(j11 * g2 - j21 * g1) / det
                v = v + mp.mpc(dx, dy)
                if mp.hypot(dx, dy) < tol:
                    return v
        return None

    for seed in seeds:
        v = newton(seed, coarse, mp.mpf(10) ** (-30), 60)
        if v is None:
            continue
        v = newton(v, policy, mp.mpf(10) ** (-(policy.decimal_digits - 8)), 25)
        if v is None:
            continue
        if abs(v - centroid) > 2 * R:
            continue
        if min(abs(v - a) for a in pts) < mp.mpf("1e-10") * R:
            continue
        with policy.context(extra_digits=10):
            F3, _ = _seg_center_residual(pts[2], v, pts, policy)
            third = abs(mp.re(F3))
            if third < mp.mpf(10) ** (-(policy.decimal_digits - 25)) * (
                    1 + abs(F3)):
                return v
    raise NewtonDiverged("no seed produced a center meeting all three"
                         " zero-real-period conditions")


@dataclass
class TracedArc:
    vertices: list        # exact a_j first, exact v last
    h_end: object         # int_{a_j}^{v} T dt along the arc, tracer branch


def _mini_T(tp, state_from: TrackState, z_to, dps, order=16):
    """GL integral of T dt from state_from.z to z_to on the straight hop."""
    a = state_from.z
    z_to = mpc_of(z_to)
    if z_to == a:
        return mp.mpc(0), state_from
    half = (z_to - a) / 2
    mid = (a + z_to) / 2
    tot = mp.mpc(0)
    for x, w in legendre_nodes(order, dps):
        st = tp.continue_to(state_from, mid + half * x)
        tot += w * tp.value(st)
    return tot * half, tp.continue_to(state_from, z_to)


def _trace_level(tp, z0, state0, H0, dir0, mode, stop, policy, scale,
                 h_cap=None):
    """Predictor-corrector tracing of Re (mode 'arc') or Im ('ray') of the
    running integral H = H0 + int T dt held at zero.

    Unit tangent is i/T (arc) or 1/T (ray) with sign continuity; the
    corrector moves along the gradient direction of the held functional.
    h_cap(z), when given, bounds the step length; callers use it to keep
    steps short compared to the distance to the nearest square-root point
    so that the per-step Gauss rule keeps the running integral at full
    accuracy (the level line would otherwise inherit the quadrature error
    of the early steps, where T blows up like distance^(-1/2)).
    Returns (vertices from z0 on, H at last vertex, state at last vertex).
    """
    dps = policy.decimal_digits + 10
    sel = mp.re if mode == "arc" else mp.im
    rot = mp.mpc(0, 1) if mode == "arc" else mp.mpc(1)
    grad_rot = mp.mpc(1) if mode == "arc" else mp.mpc(0, 1)
    ctol = mp.mpf(10) ** (-(policy.decimal_digits // 2)) * scale
    h = scale / 50
    h_min = scale * mp.mpf("1e-8")
    h_max = scale / 22
    max_turn = mp.mpf("0.09")
    z, state, H = mpc_of(z0), state0, H0
    prev_dir = mpc_of(dir0)
    verts = [z]
    Hs = [H]
    for _ in range(8000):
        h_eff = h if h_cap is None else min(h, h_cap(z))
        done, r_cap = stop(z, h_eff)
        if done:
            return verts, Hs, state
        Tz = tp.value(state)
        u = rot / Tz
        u = u / abs(u)
        if mp.re(u * mp.conj(prev_dir)) < 0:
            u = -u
        # shrink steps until the tangent turn over the step is small
        tries = 0
        while True:
            z_pred = z + h_eff * u
            st_pred = tp.continue_to(state, z_pred)
            u1 = rot / tp.value(st_pred)
            u1 = u1 / abs(u1)
            if mp.re(u1 * mp.conj(u)) < 0:
                u1 = -u1
            turn = abs(mp.arg(u1 / u))
            if turn <= max_turn or h_eff <= h_min:
                break
            h_eff = h_eff / 2
            h = min(h, h_eff)
            tries += 1
            if tries > 60:
                raise StepCollapse("tangent turn would not settle")
        if turn > max_turn and h_eff <= h_min:
            raise StepCollapse(f"step collapsed near {mp.nstr(mp.mpc(z))}")
        dH, st_new = _mini_T(tp, state, z_pred, dps)
        z_new = z_pred
        for _ in range(4):
            drift = sel(H + dH)
            if abs(drift) < ctol:
                break
            Tn = tp.value(st_new)
            eps = -drift / abs(Tn)
            z_corr = z_new + eps * grad_rot * mp.conj(Tn) / abs(Tn)
            dcorr, st_new = _mini_T(tp, st_new, z_corr, dps, order=8)
            dH += dcorr
            z_new = z_corr
        prev_dir = (z_new - z) / abs(z_new - z)
        z, state, H = z_new, st_new, H + dH
        verts.append(z)
        Hs.append(H)
        if turn < mp.mpf("0.025") and h < h_max:
            h = min(h * mp.mpf("1.3"), h_max)
    raise StepCollapse("tracer exceeded its step budget")


def _arc_seed(cfg, v, j):
    """(c_j, psi_j): local coefficient T ~ c_j (z - a_j)^(-1/2) and the
    launch direction psi = pi - 2 arg c_j of the arc toward the center."""
    a = cfg.points[j]
    Aj = mp.mpc(1)
    for k, b in enumerate(cfg.points):
        if k != j:
            Aj *= (a - b)
    c = mp.sqrt((a - v) / Aj)
    return c, mp.pi - 2 * mp.arg(c)


def trace_arcs(cfg: BranchConfig, v, policy: PrecisionPolicy):
    """The three arcs as polylines from a_j (exact) to v (exact).

    Tracing runs at reduced precision (see module docstring); endpoints
    stay exact so downstream integrals are deformation-exact."""
    work = policy.with_digits(min(policy.decimal_digits, 60))
    arcs = []
    with work.context(extra_digits=5):
        for j in range(3):
            a = cfg.points[j]
            Rj = abs(a - v)
            c, psi = _arc_seed(cfg, v, j)
            delta = Rj * mp.mpf("1e-3")
            z0 = a + delta * mp.exp(mp.mpc(0, psi))
            tp = sqrt_field_product(cfg.points, v, work)
            st0 = tp.start(z0)

            def head(t, tp=tp, st0=st0):
                return tp.value(tp.continue_to(st0, t))

            H0, _ = integrate_with_error(
                head, Contour.line(a, z0, q_start=2), work)
            r_cap = Rj * mp.mpf("0.015")

            def stop(z, h, v=v, r_cap=r_cap):
                return abs(z - v) <= max(r_cap, mp.mpf("1.2") * h), r_cap

            def h_cap(z, a=a, v=v):
                return mp.mpf("0.2") * min(abs(z - a), abs(z - v))

            verts, Hs, st_end = _trace_level(
                tp, z0, st0, H0, mp.exp(mp.mpc(0, psi)), "arc", stop, work,
                Rj, h_cap)

            def tail(t, tp=tp, st=st_end):
                return tp.value(tp.continue_to(st, t))

            Hbridge, _ = integrate_with_error(
                tail, Contour.line(verts[-1], v, q_end=2), work)
            arcs.append(TracedArc([mpc_of(a)] + verts + [mpc_of(v)],
                                  Hs[-1] + Hbridge))
    return arcs


def _center_ray_dirs(cfg, v):
    """The three directions at v where Im int_v^z T dt vanishes."""
    Av = mp.mpc(1)
    for b in cfg.points:
        Av *= (v - b)
    cv = mp.sqrt(1 / Av)
    return [mp.mpf(2) / 3 * (k * mp.pi - mp.arg(cv)) for k in range(3)]


def _wrap_angle(x):
    return mp.atan2(mp.sin(x), mp.cos(x))


def trace_rays(cfg: BranchConfig, v, arcs, policy: PrecisionPolicy, r_out):
    """Center rays (Im int_v = 0, one opposite each arc) and outer rays
    (Im int_{a_j} = 0 leaving a_j away from its arc), as polylines.

    Returned as (center_rays, outer_rays), both indexed like the arcs:
    center_rays[j] starts at v and is the ray opposite arc j."""
    work = policy.with_digits(min(policy.decimal_digits, 60))
    center_rays = [None] * 3
    outer_rays = []
    with work.context(extra_digits=5):
        R = max(abs(a - v) for a in cfg.points)
        dirs = _center_ray_dirs(cfg, v)
        arc_dirs = [mp.arg(arc.vertices[-2] - v) for arc in arcs]
        used = set()
        for j in range(3):
            want = arc_dirs[j] + mp.pi
            k = min((kk for kk in range(3) if kk not in used),
                    key=lambda kk: abs(_wrap_angle(dirs[kk] - want)))
            used.add(k)
            if abs(_wrap_angle(dirs[k] - want)) > mp.mpf("0.6"):
                raise RoutingError("no center ray opposite an arc; the star"
                                   " geometry looks wrong")
            theta = dirs[k]
            delta = R * mp.mpf("1e-3")
            z0 = v + delta * mp.exp(mp.mpc(0, theta))
            tp = sqrt_field_product(cfg.points, v, work)
            st0 = tp.start(z0)

            def head(t, tp=tp, st0=st0):
                return tp.value(tp.continue_to(st0, t))

            H0, _ = integrate_with_error(
                head, Contour.line(v, z0, q_start=2), work)

            def stop(z, h, v=v, r_out=r_out):
                return abs(z - v) >= r_out, 0

            def h_cap(z, v=v):
                return mp.mpf("0.2") * abs(z - v)

            verts, _, _ = _trace_level(
                tp, z0, st0, H0, mp.exp(mp.mpc(0, theta)), "ray", stop,
                work, R, h_cap)
            center_rays[j] = [mpc_of(v)] + verts
        for j in range(3):
            a = cfg.points[j]
            c, psi = _arc_seed(cfg, v, j)
            theta = psi - mp.pi
            delta = abs(a - v) * mp.mpf("1e-3")
            z0 = a + delta * mp.exp(mp.mpc(0, theta))
            tp = sqrt_field_product(cfg.points, v, work)
            st0 = tp.start(z0)

            def head(t, tp=tp, st0=st0):
                return tp.value(tp.continue_to(st0, t))

            H0, _ = integrate_with_error(
                head, Contour.line(a, z0, q_start=2), work)

            def stop(z, h, v=v, r_out=r_out):
                return abs(z - v) >= r_out, 0

            def h_cap(z, a=a):
                return mp.mpf("0.2") * abs(z - a)

            verts, _, _ = _trace_level(
                tp, z0, st0, H0, mp.exp(mp.mpc(0, theta)), "ray", stop,
                work, abs(a - v), h_cap)
            outer_rays.append([mpc_of(a)] + verts)
    return center_rays, outer_rays


def _seg_cross(p1, p2, q1, q2):
    """Whether segments [p1,p2] and [q1,q2] properly intersect (floats).

    Returns None when the configuration is too close to degenerate to
    call; callers then perturb and retry."""
    d1 = p2 - p1
    d2 = q2 - q1
    den = d1.real * d2.imag - d1.imag * d2.real
    scale = max(abs(d1), abs(d2), 1e-300)
    if abs(den) < 1e-14 * scale * scale:
        rel = q1 - p1
        if abs(rel.real * d1.imag - rel.imag * d1.real) < 1e-12 * scale * scale:
            return None
        return False
    rel = q1 - p1
    t = (rel.real * d2.imag - rel.imag * d2.real) / den
    s = (rel.real * d1.imag - rel.imag * d1.real) / den
    eps = 1e-12
    if -eps < t < eps or 1 - eps < t < 1 + eps or \
       -eps < s < eps or 1 - eps < s < 1 + eps:
        if -eps <= t <= 1 + eps and -eps <= s <= 1 + eps:
            return None
        return False
    return (0 < t < 1) and (0 < s < 1)


def _point_seg_dist(z, a, b):
    d = b - a
    L2 = d.real * d.real + d.imag * d.imag
    if L2 == 0:
        return abs(z - a)
    t = ((z - a).real * d.real + (z - a).imag * d.imag) / L2
    t = min(1.0, max(0.0, t))
    return abs(z - (a + t * d))


class BoundarySweep:
    """Boundary values of a tracked product along one side of an arc.

    Holds the continued states at every polyline vertex (None where the
    vertex is a center of the product) and integrates vertex-anchored
    integrands segment by segment, with algebraic substitutions at the
    arc ends."""

    def __init__(self, tp, vertices, states, policy):
        self.tp = tp
        self.vertices = vertices
        self.states = states
        self.policy = policy

    def integrate(self, make_vals, q_a=2, q_v=2, policy=None,
                  arclength=False):
        """Sum of integrals of make_vals(t, state) over the arc segments.

        make_vals may return a scalar or a list (shared-pass moments).
        arclength=True integrates against |dt| instead of dt (each
        segment is straight, so this is one unimodular factor per
        segment); pass a looser policy for scale-only integrals."""
        pol = policy if policy is not None else self.policy
        verts = self.vertices
        total = None
        err = mp.mpf(0)
        last = len(verts) - 2
        for i in range(len(verts) - 1):
            anchor = self.states[i] if self.states[i] is not None \
                else self.states[i + 1]

            def f(t, anchor=anchor):
                st = self.tp.continue_to(anchor, t)
                return make_vals(t, st)

            contour = Contour.line(verts[i], verts[i + 1],
                                   q_start=q_a if i == 0 else 1,
                                   q_end=q_v if i == last else 1)
            val, er = integrate_with_error(f, contour, pol)
            err += er
            if arclength:
                d = verts[i + 1] - verts[i]
                ph = abs(d) / d
                val = [ph * x for x in val] if isinstance(val, list) \
                    else ph * val
            if total is None:
                total = val
            elif isinstance(val, list):
                total = [x + y for x, y in zip(total, val)]
            else:
                total += val
        return total, err

    def value_at_vertex(self, i, exponents=None):
        st = self.states[i]
        if st is None:
            raise ValueError("vertex is a center of the product")
        if exponents is None:
            return self.tp.value(st)
        return self.tp.value_with(st, exponents)


class StarGeometry:
    """The star: center, arcs, rays, masses, and evaluation plumbing."""

    def __init__(self, cfg: BranchConfig, policy: PrecisionPolicy, v, arcs,
                 center_rays, outer_rays):
        self.cfg = cfg
        self.policy = policy
        self.v = v
        self.arcs = arcs
        self.center_rays = center_rays
        self.outer_rays = outer_rays
        self.base = cfg.base_point()
        self.R_star = max(max(abs(p - v) for p in arc.vertices)
                          for arc in arcs)
        self.r_route = mp.mpf("2.2") * self.R_star
        if self.r_route > mp.mpf("0.8") * abs(self.base - v):
            raise RoutingError("anchor point sits too close to the star")
        # float caches for crossing tests (arcs are the only cuts)
        self._arcs_f = [[complex(p) for p in arc.vertices] for arc in arcs]
        self._sweeps = {}
        self._masses = None
        self._highway = None
        self._logcap = None
        self._region_ref = None

    # -- products ---------------------------------------------------

    def sqrt_product(self, policy=None) -> TrackedProduct:
        return sqrt_field_product(self.cfg.points, self.v,
                                  policy or self.policy)

    def f_product(self, policy=None) -> TrackedProduct:
        pol = policy or self.policy
        return TrackedProduct(self.cfg.points, self.cfg.exponents, pol)

    # -- routing ----------------------------------------------------

    def _crosses_arcs(self, p, q):
        pf, qf = complex(p), complex(q)
        for poly in self._arcs_f:
            for a, b in zip(poly, poly[1:]):
                hit = _seg_cross(pf, qf, a, b)
                if hit is None:
                    return None
                if hit:
                    return True
        return False

    def _march_out(self, p, direction):
        """Farthest-point of the straight march from p along direction to
        the routing circle; None if it would cross an arc."""
        d = direction / abs(direction)
        # solve |p + L d - v| = r_route for the positive root
        w = p - self.v
        bq = mp.re(w * mp.conj(d))
        cq = abs(w) ** 2 - self.r_route ** 2
        disc = bq * bq - cq
        L = -bq + mp.sqrt(disc) if disc > 0 else self.r_route
        if L <= 0:
            L = self.r_route
        q = p + L * d
        hit = self._crosses_arcs(p, q)
        if hit is False:
            return q
        return None

    def _descent_path(self, p, outward=None):
        """Arc-free path from the routing circle down to p.

        The first vertex lies on the routing circle; the last is p.
        Straight escapes along rotated candidate directions are tried
        first, then descending along a center-ray highway."""
        p = mpc_of(p)
        dist, _ = self.distance_to_arcs(p)
        if dist < 1e-6 * float(self.R_star):
            # too close for the float crossing tests; hop out to a
            # macroscopic offset on the caller's side first, then take
            # one straight chord in (the chord is arc-free because the
            # offset is perpendicular on p's own side and much shorter
            # than the distance to every other piece of the star)
            if outward is None:
                raise RoutingError(
                    "near-arc evaluation needs an outward side hint")
            u = outward / abs(outward)
            dend = min(abs(p - q) for q in list(self.cfg.points) + [self.v])
            if dend < mp.mpf("1e-12") * self.R_star:
                raise RoutingError("cannot route to a star endpoint")
            delta = min(mp.mpf("0.02") * self.R_star, mp.mpf("0.5") * dend)
            return self._descent_path(p + delta * u, outward) + [p]
        if outward is None:
            if abs(p - self.v) < mp.mpf("1e-12") * self.R_star:
                outward = mp.mpc(1)
            else:
                outward = (p - self.v) / abs(p - self.v)
        for k in (0, 1, -1, 2, -2, 3, -3, 4, -4, 5, -5, 6, -6):
            cand = outward * mp.exp(mp.mpc(0, mp.mpf("0.26") * k))
            q = self._march_out(p, cand)
            if q is not None:
                return [q, p]
        # highway fallback: enter along a center ray, hop off near p
        best = None
        for ray in self.center_rays:
            for i in range(len(ray) - 1, 0, -1):
                r = ray[i]
                if self._crosses_arcs(r, p) is False:
                    d = abs(r - p)
                    if best is None or d < best[0]:
                        best = (d, ray, i)
                    break
        if best is None:
            raise RoutingError(f"no arc-free route to {mp.nstr(mp.mpc(p))}")
        _, ray, i = best
        far = ray[-1]
        th = mp.arg(far - self.v)
        circle_pt = self.v + self.r_route * mp.exp(mp.mpc(0, th))
        inward = [ray[k] for k in range(len(ray) - 1, i - 1, -1)]
        return [circle_pt, far] + inward + [p]

    def route_to(self, p, outward=None):
        """Waypoints from the far-right anchor to p avoiding the arcs.

        The returned list starts after the anchor and ends with p."""
        descent = self._descent_path(p, outward)
        walk = self._circle_walk(mp.arg(self.base - self.v),
                                 mp.arg(descent[0] - self.v))
        return walk + descent

    def _circle_walk(self, th_from, th_to):
        """Vertices along the routing circle between two angles, shorter
        way around, ending on the circle at th_to."""
        dth = _wrap_angle(th_to - th_from)
        steps = max(1, int(mp.ceil(abs(dth) / mp.mpf("0.6"))))
        pts = []
        for k in range(steps + 1):
            th = th_from + dth * k / steps
            pts.append(self.v + self.r_route * mp.exp(mp.mpc(0, th)))
        return pts

    def eval_routed(self, tp: TrackedProduct, z, outward=None) -> TrackState:
        """State of tp at z, continued from the anchor along a routed path."""
        return tp.along([self.base] + self.route_to(z, outward))

    # -- boundary sweeps ---------------------------------------------

    def sweep(self, which: str, arc_id: int, side: int) -> BoundarySweep:
        """Boundary states along arc arc_id from side +1 (left of the
        a_j -> v orientation) or -1.  which is 'sqrt' or 'f'."""
        key = (which, arc_id, side)
        hit = self._sweeps.get(key)
        if hit is not None:
            return hit
        if which == "sqrt":
            tp = self.sqrt_product()
            centers = [self.v] + list(self.cfg.points)
        elif which == "f":
            tp = self.f_product()
            centers = list(self.cfg.points)
        else:
            raise ValueError("which must be 'sqrt' or 'f'")
        verts = self.arcs[arc_id].vertices
        with self.policy.context(extra_digits=10):
            im = len(verts) // 2
            tangent = verts[im + 1] - verts[im - 1]
            tangent = tangent / abs(tangent)
            nu = side * mp.mpc(0, 1) * tangent
            dmin = min(_point_seg_dist(complex(verts[im]), a, b)
                       for k, poly in enumerate(self._arcs_f) if k != arc_id
                       for a, b in zip(poly, poly[1:]))
            delta = min(mp.mpf("0.05") * self.R_star,
                        mp.mpf("0.25") * mp.mpf(dmin))
            p = verts[im] + delta * nu
            st = self.eval_routed(tp, p, outward=nu)
            states = [None] * len(verts)
            states[im] = tp.continue_to(st, verts[im])
            for i in range(im + 1, len(verts)):
                if any(verts[i] == c for c in centers):
                    states[i] = None
                    continue
                states[i] = tp.continue_to(states[i - 1], verts[i])
            for i in range(im - 1, -1, -1):
                if any(verts[i] == c for c in centers):
                    states[i] = None
                    continue
                states[i] = tp.continue_to(states[i + 1], verts[i])
        sweep = BoundarySweep(tp, verts, states, self.policy)
        self._sweeps[key] = sweep
        return sweep

    # -- masses and jump constants -----------------------------------

    def masses(self):
        """Harmonic masses m_j = (1/(pi i)) int_{arc_j} T_- dt; they are
        positive and sum to 1."""
        if self._masses is not None:
            return self._masses
        out = []
        with self.policy.context(extra_digits=10):
            for j in range(3):
                sw = self.sweep("sqrt", j, -1)
                val, _ = sw.integrate(lambda t, st: sw.tp.value(st))
                out.append(val / (mp.pi * mp.mpc(0, 1)))
        self._masses = out
        return out

    def mass_checks(self):
        """(max |Im m_j|, |sum m_j - 1|) as floats, for validation."""
        ms = self.masses()
        with self.policy.context():
            return (float(max(abs(mp.im(m)) for m in ms)),
                    float(abs(mp.fsum(mp.re(m) for m in ms) - 1)))

    def kappas(self):
        """Jump constants of the outer potential across the three arcs:
        Phi_+ Phi_- = kappa_j on arc j."""
        m = self.masses()
        two_pi_i = 2 * mp.pi * mp.mpc(0, 1)
        with self.policy.context():
            return [mp.exp(two_pi_i * (m[2] - m[1])),
                    mp.exp(-two_pi_i * m[1]),
                    mp.exp(two_pi_i * m[2])]

    # -- outer potential and capacity ---------------------------------

    def _highway_table(self):
        """Cumulative int_v^{vertex} T dt along the first center ray,
        with continued states, at full precision."""
        if self._highway is not None:
            return self._highway
        ray = self.center_rays[0]
        with self.policy.context(extra_digits=10):
            tp = self.sqrt_product()
            # anchor the global branch at the far-right base and walk to
            # the ray's outer end along the routing circle
            far = ray[-1]
            walk = self._circle_walk(mp.arg(self.base - self.v),
                                     mp.arg(far - self.v))
            st = tp.along([self.base] + walk + [far])
            states = [None] * len(ray)
            states[-1] = st
            for i in range(len(ray) - 2, 0, -1):
                states[i] = tp.continue_to(states[i + 1], ray[i])
            H = [None] * len(ray)
            # H[i] = int_v^{ray[i]} T dt; first segment has the vanishing
            # square root at v
            def head(t, tp=tp, st=states[1]):
                return tp.value(tp.continue_to(st, t))
            h1, _ = integrate_with_error(
                head, Contour.line(self.v, ray[1], q_start=2), self.policy)
            H[1] = h1
            for i in range(1, len(ray) - 1):
                def seg(t, tp=tp, st=states[i]):
                    return tp.value(tp.continue_to(st, t))
                hseg, _ = integrate_with_error(
                    seg, Contour.line(ray[i], ray[i + 1]), self.policy)
                H[i + 1] = H[i] + hseg
        self._highway = (tp, ray, states, H)
        return self._highway

    def phi_log(self, z, outward=None):
        """log Phi(z) = int_v^z T dt along the canonical path: out the
        first center ray, around the routing circle, and down to z.  Phi
        itself is path independent on the cut complement (the only loop
        monodromy of the integral is 2 pi i), so the canonical path is
        just a convenient arc-free one."""
        tp, ray, states, H = self._highway_table()
        z = mpc_of(z)
        with self.policy.context(extra_digits=10):
            descent = self._descent_path(z, outward)
            far = ray[-1]
            th_far = mp.arg(far - self.v)
            # drop radially from the ray end onto the routing circle, walk
            # around to the descent angle, then descend
            walk = self._circle_walk(th_far, mp.arg(descent[0] - self.v))
            path = [far] + walk + descent
            st = states[-1]
            Hacc = H[-1]
            for i in range(len(path) - 1):
                def seg(t, tp=tp, st=st):
                    return tp.value(tp.continue_to(st, t))
                hseg, _ = integrate_with_error(
                    seg, Contour.line(path[i], path[i + 1]), self.policy)
                Hacc += hseg
                st = tp.continue_to(st, path[i + 1])
            return Hacc, st

    def phi_leading_log(self):
        """log of the leading constant L in Phi(z)/(z - v) -> L.

        |L| = 1/capacity: the Green's function of the star is
        log|Phi(z)| = log|z| - log cap + o(1).  arg L is the boundary
        phase of the exterior conformal map at the center and is in
        general not zero (for a mirror-symmetric star it is -pi).

        Uses log L = log Phi(z_R) - Log(z_R - v) + int (T - 1/(t-v)) dt
        over the ray t = v + (z_R - v)/sigma, sigma from 1 down to 0 (the
        shift by v is free: log z - log(z - v) -> 0 at infinity).  The
        integrand is evaluated through the exact reduction
            T (t-v) - 1 = x / (1 + sqrt(1+x)),
            x = ((t-v)^3 - A(t)) / A(t),
        whose numerator is a degree-two polynomial (the cubic terms cancel
        in exact arithmetic), so the far tail has no cancellation noise.
        The principal square root is the right branch: along the ray
        |a_j - v| / |t - v| <= 1/4, so arg((t-v)^3/A) stays within
        3 asin(1/4) of zero and never reaches the cut."""
        if self._logcap is not None:
            return self._logcap
        tp, ray, states, H = self._highway_table()
        with self.policy.context(extra_digits=10):
            zR = ray[-1]
            Hacc = H[-1]
            A = self.cfg.poly_A(self.policy)
            v = self.v
            # (t - v)^3 - A(t), reduced to its exact quadratic form
            n2 = -3 * v - A.coeffs[2]
            n1 = 3 * v * v - A.coeffs[1]
            n0 = -v ** 3 - A.coeffs[0]
            d = zR - v

            def tail(sigma, A=A, n2=n2, n1=n1, n0=n0, v=v, d=d):
                dd = d / sigma
                t = v + dd
                x = (n2 * t * t + n1 * t + n0) / A(t)
                g = x / ((1 + mp.sqrt(1 + x)) * dd)
                return g * d / (sigma * sigma)

            htail, _ = integrate_with_error(
                tail, Contour.line(mp.mpc(0), mp.mpc(1)), self.policy)
            self._logcap = Hacc + htail - mp.log(abs(d)) - \
                mp.mpc(0, 1) * mp.arg(d)
        return self._logcap

    def log_capacity(self):
        with self.policy.context():
            return -mp.re(self.phi_leading_log())

    def capacity(self):
        with self.policy.context():
            return mp.exp(self.log_capacity())

    # -- plane regions -----------------------------------------------

    def _divider_chain(self):
        """Float polyline of the cross-cut gamma_1 + arc_1 + arc_2 +
        gamma_2 (outer rays extended far), which splits the plane."""
        ext = 1e6 * float(self.R_star)
        g1 = [complex(p) for p in self.outer_rays[0]]
        g2 = [complex(p) for p in self.outer_rays[1]]
        d1 = g1[-1] - g1[-2]
        d1 /= abs(d1)
        d2 = g2[-1] - g2[-2]
        d2 /= abs(d2)
        chain = [g1[-1] + d1 * ext] + g1[::-1] + \
            self._arcs_f[0] + self._arcs_f[1][::-1] + g2 + [g2[-1] + d2 * ext]
        return chain

    def _parity(self, z, chain, far_dirs):
        zf = complex(z)
        for th in far_dirs:
            q = complex(self.v) + 3e4 * float(self.R_star) * \
                complex(mp.cos(th), mp.sin(th))
            count = 0
            ok = True
            for a, b in zip(chain, chain[1:]):
                hit = _seg_cross(zf, q, a, b)
                if hit is None:
                    ok = False
                    break
                if hit:
                    count += 1
            if ok:
                return count % 2
        raise RoutingError("parity test kept hitting degenerate crossings")

    def region_of(self, z):
        """'+' or '-' for the component of the plane split by the chain
        gamma_1 + arc_1 + arc_2 + gamma_2; the '+' side contains a_3."""
        chain = self._divider_chain()
        far_dirs = [mp.mpf(k) * mp.pi / 8 + mp.mpf("0.11") for k in range(16)]
        if self._region_ref is None:
            c, psi = _arc_seed(self.cfg, self.v, 2)
            ref = self.cfg.points[2] + self.R_star * mp.mpf("1e-3") * \
                mp.exp(mp.mpc(0, psi - mp.pi))
            self._region_ref = self._parity(ref, chain, far_dirs)
        par = self._parity(z, chain, far_dirs)
        return "+" if par == self._region_ref else "-"

    # -- distances and export ------------------------------------------

    def distance_to_arcs(self, z):
        zf = complex(z)
        best = (float("inf"), -1)
        for k, poly in enumerate(self._arcs_f):
            for a, b in zip(poly, poly[1:]):
                d = _point_seg_dist(zf, a, b)
                if d < best[0]:
                    best = (d, k)
        return best

    def diameter(self):
        pts = [p for poly in self._arcs_f for p in poly]
        return max(abs(a - b) for a in pts for b in pts)

    def arc_rows(self, samples_per_arc=None):
        """(arc_id, s, re, im) rows for every traced vertex."""
        rows = []
        for j, arc in enumerate(self.arcs):
            verts = arc.vertices
            lens = [abs(b - a) for a, b in zip(verts, verts[1:])]
            total = mp.fsum(lens)
            s = mp.mpf(0)
            rows.append((j, 0.0, float(mp.re(verts[0])),
                         float(mp.im(verts[0]))))
            for L, p in zip(lens, verts[1:]):
                s += L
                rows.append((j, float(s / total), float(mp.re(p)),
                             float(mp.im(p))))
        return rows


def build_star(cfg: BranchConfig, policy: PrecisionPolicy) -> StarGeometry:
    """Center, arcs, and rays for the three-point configuration."""
    v = solve_center(cfg, policy)
    arcs = trace_arcs(cfg, v, policy)
    r_out = 4 * max(max(abs(p - v) for p in arc.vertices) for arc in arcs)
    center_rays, outer_rays = trace_rays(cfg, v, arcs, policy, r_out)
    return StarGeometry(cfg, policy, v, arcs, center_rays, outer_rays)
