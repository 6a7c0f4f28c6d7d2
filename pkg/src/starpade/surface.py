"""Two-sheeted elliptic surface over the star and the outer model.

The algebraic function w^2 = A(z)(z - v), with A the monic cubic through
the branch points and v the star center, carries everything the strong
asymptotics need: period moments of the three arcs, homology cycles
through both sheets, the Abel map and its Newton inversion for the
moving pole index by index, a piecewise Szego factor, the third-kind
differential with poles at the moving point and at infinity, and the
2x2 outer matrix N whose arc jumps encode the weight constants.

One primitive sits underneath: tracked analytic continuation of the
square-root product along polylines (branching.TrackedProduct).  A
segment that crosses an arc lands on the other sheet automatically, so
cycle lifts, cut hops, and Newton paths need no side bookkeeping -- the
tracked value of w IS the lift.  Both open sheets are simply connected
off the cuts, so integrals of 1/w and of the eta differential along
arc-free paths are path independent (the eta residues are integers or
half-integers that the exponentials kill), and only the choice of the
arc a path crosses, not where it crosses, matters.

Conventions fixed here and used everywhere:

* sheet 1 carries w / z^2 -> 1 at infinity (w = A * T with the geometry
  module's branch of T);
* arcs keep their traced orientation a_j -> v, the '+' side lies to the
  left, and the weight jump is f_+ - f_- = (t_j / tau_j) f_+ with
  t_j = -2i sin(pi alpha_j);
* the homology cycles are polygons around {v, a_1} ('a') and {v, a_3}
  ('b'), oriented so the normalized holomorphic differential has
  b-period 2 pi i and a-period 2 pi i tau, Im tau < 0;
* paths to the second sheet cross arc 2 once, entering from the side of
  the plane region that does not contain a_3.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from mpmath import mp

from .geometry import (INV_W_EXPS, T_EXPS, W_EXPS, NewtonDiverged,
                       RoutingError, _point_seg_dist)
from .pade import OnCut
from .precision import PrecisionPolicy, mpc_of
from .quadrature import Contour, integrate_with_error, legendre_nodes


class NearBranchPoint(ValueError):
    """A constructed point sits numerically on top of a branch point."""


class AmbiguousBranch(RuntimeError):
    """The logarithm-branch bookkeeping of the inversion did not pin an
    integer pair."""


class PathologicalIndex(RuntimeError):
    """The moving pole sits at infinity, where the generic outer-model
    construction degenerates."""


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class SurfacePoint:
    """A point of the surface: planar position plus sheet (1 or 2).

    z is None for the two points over infinity."""

    z: object
    sheet: int

    def __post_init__(self):
        if self.sheet not in (1, 2):
            raise ValueError("sheet must be 1 or 2")

    @staticmethod
    def at_infinity(sheet):
        return SurfacePoint(None, sheet)

    @property
    def is_infinite(self):
        return self.z is None

    def key(self, digits=25):
        if self.is_infinite:
            return ("inf", self.sheet)
        return (mp.nstr(mpc_of(self.z), digits), self.sheet)


@dataclass(frozen=True)
class Periods:
    """Arc moments M[j][k] = -(1/2 pi i) int_{arc_j} t^k dt / w_+ and the
    derived modulus tau = M[0][0] / M[2][0], Im tau < 0."""

    M: tuple
    tau: object
    S: object            # half the sum of the four finite branch points
    a_periods: tuple     # -4 pi i M[0][k]: a-cycle periods of t^k dt / w
    b_periods: tuple     # -4 pi i M[2][k]
    nu0_scale: object    # -1 / (2 M[2][0]); d(Abel)/dz = nu0_scale / w
    checks: dict


@dataclass(frozen=True)
class IndexConstants:
    """Per-index jump data: tau_j = exp(-i pi alpha_j), the weight jump
    factor t_j with f_+ - f_- = (t_j / tau_j) f_+, and s_nj = t_j kappa_j^n."""

    n: int
    tau_j: tuple
    t_j: tuple
    s_nj: tuple


@dataclass(frozen=True)
class InversionResult:
    """Solution of the Abel-map equation for one index."""

    z_n: SurfacePoint
    w_n: object
    log_branch_choices: tuple   # (k1, k2) with A(z_n) = T00 - 2 pi i (k1 tau + k2)
    pathological: bool
    beta2_branch: int           # branch integer for beta_2, from the eta a-period
    target: object              # T00
    abel_value: object
    residual: float
    newton_steps: int


@dataclass(frozen=True)
class SzegoData:
    beta1: object
    beta2: object
    beta3: object
    Xi: object
    F: object             # callable (z, outward=None) -> F(z)
    F_infinity: object
    F_abelian: object     # same function through the Abel-integral formula


@dataclass(frozen=True)
class EtaData:
    """The differential with prescribed poles, as a planar integrand.

    evaluator(pt) returns d(eta)/dz at a SurfacePoint; star=True marks the
    degenerate case with the moving pole at infinity on sheet 1, where the
    differential reduces to the fixed-pole one."""

    delta1: object
    a_period: object
    evaluator: object
    pole: SurfacePoint
    star: bool


@dataclass(frozen=True)
class ParametrixData:
    n: int
    delta1: object
    q_coeffs: tuple       # (a, b) in q = a + b ((w + w_n)/(z - z_n) - z)
    C12: object           # lim z * N~_12(z)
    column_constant: object
    u1: object
    u2: object
    N: object             # callable (z, outward=None) -> ((N11, N12), (N21, N22))
    predicted_spurious: object


@dataclass(frozen=True)
class SurfaceBundle:
    n: int
    periods: Periods
    constants: IndexConstants
    inversion: InversionResult
    szego: object
    eta: object
    parametrix: object


# ---------------------------------------------------------------------------
# lattice helpers


def lattice_coords(value, tau):
    """(x, y) with value = 2 pi i (x tau + y), x and y real."""
    u = value / (2 * mp.pi * mp.mpc(0, 1))
    x = mp.im(u) / mp.im(tau)
    y = mp.re(u) - x * mp.re(tau)
    return x, y


def reduce_mod_lattice(value, tau):
    """Nearest-cell reduction mod the period lattice 2 pi i (Z tau + Z).

    Returns (reduced, (kx, ky)) with value = reduced + 2 pi i (kx tau + ky).
    """
    x, y = lattice_coords(value, tau)
    kx = int(mp.nint(x))
    ky = int(mp.nint(y))
    tpi = 2 * mp.pi * mp.mpc(0, 1)
    return value - tpi * (kx * tau + ky), (kx, ky)


# ---------------------------------------------------------------------------
# the surface frame


class _Cycle:
    def __init__(self, which, verts, states, orient, period_devs, crossings):
        self.which = which
        self.verts = verts
        self.states = states
        self.orient = orient
        self.period_devs = period_devs
        self.crossings = crossings


class SurfaceFrame:
    """Tracked square-root field w on the surface over a star geometry.

    Caches the pieces that do not depend on the index n: the tail
    integral of 1/w along the anchor ray, the hop through arc 2 to the
    second sheet, the Abel seed grid, and the homology cycle polygons.
    """

    def __init__(self, geom, policy=None):
        self.geom = geom
        self.policy = policy or geom.policy
        self.tp = geom.sqrt_product(self.policy)
        self._periods = None
        self._tail = None
        self._hop_cache = None
        self._prefix = None
        self._a2inf = None
        self._grid = None
        self._cycles = {}
        self._eta_cache = {}

    # -- basic evaluation ---------------------------------------------

    def state_at(self, z, outward=None):
        try:
            return self.geom.eval_routed(self.tp, z, outward)
        except RoutingError:
            if outward is not None:
                raise
            hint = self._near_arc_normal(z)
            if hint is None:
                raise
            return self.geom.eval_routed(self.tp, z, hint)

    def w_of(self, state):
        return self.tp.value_with(state, W_EXPS)

    def periods(self, policy=None):
        if self._periods is None:
            self._periods = _compute_periods(self, policy or self.policy)
        return self._periods

    def _near_arc_normal(self, z):
        """Unit normal of the nearest arc segment, pointing toward z, or
        None when z is comfortably far from every arc."""
        zf = complex(z)
        best = (float("inf"), None)
        for poly in self.geom._arcs_f:
            for a, b in zip(poly, poly[1:]):
                d = _point_seg_dist(zf, a, b)
                if d < best[0]:
                    best = (d, (a, b))
        if best[1] is None or best[0] > 1e-5 * float(self.geom.R_star):
            return None
        a, b = best[1]
        tang = (b - a) / abs(b - a)
        nd = 1j * tang
        side = (zf - a).real * nd.real + (zf - a).imag * nd.imag
        if side < 0:
            nd = -nd
        return mp.mpc(nd.real, nd.imag)

    # -- generic path integration --------------------------------------

    def _poly_integral(self, state, points, make_val, policy):
        """Integral of make_val(t, tracked state) along the polyline from
        state.z through points; returns (value, end state)."""
        total = mp.mpc(0)
        cur = state
        prev = state.z
        for p in points:
            if p == prev:
                continue

            def f(t, cur=cur):
                return make_val(t, self.tp.continue_to(cur, t))

            val, _ = integrate_with_error(f, Contour.line(prev, p), policy)
            total += val
            cur = self.tp.continue_to(cur, p)
            prev = p
        return total, cur

    def _inv_w(self, t, st):
        return self.tp.value_with(st, INV_W_EXPS)

    def _leg_invw(self, state, z_to, policy):
        return self._poly_integral(state, [z_to], self._inv_w, policy)

    # -- canonical pieces ----------------------------------------------

    def _tail_raw(self):
        """int_infinity^base dz/w along the anchor ray, sheet 1."""
        if self._tail is not None:
            return self._tail
        geom = self.geom
        with self.policy.context(extra_digits=10):
            d = geom.base - geom.v

            def f(sigma):
                t = geom.v + d / sigma
                st = self.tp.start(t)
                return self.tp.value_with(st, INV_W_EXPS) * (-d / sigma ** 2)

            val, _ = integrate_with_error(
                f, Contour.line(mp.mpf(0), mp.mpf(1)), self.policy)
            self._tail = val
        return self._tail

    def _hop(self):
        """Crossing points through the interior of arc 2: p1 on the side
        whose region does not contain a_3, p2 opposite, both delta off the
        parameter midpoint."""
        if self._hop_cache is not None:
            return self._hop_cache
        geom = self.geom
        with self.policy.context(extra_digits=10):
            verts = geom.arcs[1].vertices
            im = len(verts) // 2
            c2 = verts[im]
            tang = verts[im + 1] - verts[im - 1]
            tang = tang / abs(tang)
            nu = mp.mpc(0, 1) * tang
            dmin = min(_point_seg_dist(complex(c2), a, b)
                       for k, poly in enumerate(geom._arcs_f) if k != 1
                       for a, b in zip(poly, poly[1:]))
            delta = min(mp.mpf("0.05") * geom.R_star,
                        mp.mpf("0.25") * mp.mpf(dmin))
            if geom.region_of(c2 + delta * nu) != "-":
                nu = -nu
            self._hop_cache = (c2 + delta * nu, c2 - delta * nu, nu)
        return self._hop_cache

    def _sheet2_chain(self):
        """Polyline base -> (entry side of arc 2) -> through the cut ->
        back to base, now on sheet 2."""
        geom = self.geom
        p1, p2, nu = self._hop()
        fwd = geom.route_to(p1, outward=nu)
        back = [geom.base] + geom.route_to(p2, outward=-nu)
        return [geom.base] + fwd + [p2] + back[::-1][1:]

    def _sheet2_prefix(self):
        """(int of dz/w along the sheet-2 chain, tracked state at base on
        sheet 2)."""
        if self._prefix is not None:
            return self._prefix
        with self.policy.context(extra_digits=10):
            st0 = self.tp.start(self.geom.base)
            chain = self._sheet2_chain()
            val, st = self._poly_integral(st0, chain[1:], self._inv_w,
                                          self.policy)
            t0 = self.tp.value_with(st0, T_EXPS)
            t1 = self.tp.value_with(st, T_EXPS)
            if abs(t1 + t0) > mp.mpf("1e-10") * abs(t0):
                raise RuntimeError("sheet-2 chain did not change sheet")
            self._prefix = (val, st)
        return self._prefix

    def _a2inf_raw(self):
        """int_{infinity, sheet 1}^{infinity, sheet 2} dz/w, canonical path."""
        if self._a2inf is None:
            with self.policy.context(extra_digits=10):
                self._a2inf = 2 * self._tail_raw() + self._sheet2_prefix()[0]
        return self._a2inf

    def _abel_raw(self, target, policy=None, outward=None):
        """int dz/w from infinity on sheet 1 to the target along the
        canonical path (anchor-ray tail, then routed legs; a single hop
        through arc 2 when the target lies on sheet 2)."""
        pol = policy or self.policy
        if target.is_infinite:
            return mp.mpc(0) if target.sheet == 1 else self._a2inf_raw()
        with pol.context(extra_digits=10):
            z = mpc_of(target.z)
            if target.sheet == 1:
                st = self.tp.start(self.geom.base)
                pre = mp.mpc(0)
            else:
                pre, st = self._sheet2_prefix()
            poly = self.geom.route_to(z, outward)
            val, _ = self._poly_integral(st, poly, self._inv_w, pol)
            return self._tail_raw() + pre + val

    # -- homology cycles -------------------------------------------------

    def _circle_crossings(self, mf, rf):
        out = []
        for aid, poly in enumerate(self.geom._arcs_f):
            for p, q in zip(poly, poly[1:]):
                dp = p - mf
                dq = q - p
                a2 = dq.real ** 2 + dq.imag ** 2
                if a2 == 0:
                    continue
                a1 = 2 * (dq.real * dp.real + dq.imag * dp.imag)
                a0 = dp.real ** 2 + dp.imag ** 2 - rf * rf
                disc = a1 * a1 - 4 * a2 * a0
                if disc <= 0:
                    continue
                rt = disc ** 0.5
                for s in ((-a1 - rt) / (2 * a2), (-a1 + rt) / (2 * a2)):
                    if 0 <= s < 1:
                        x = p + s * dq
                        th = math.atan2((x - mf).imag, (x - mf).real)
                        out.append((th % (2 * math.pi), aid))
        return out

    def _cycle(self, which, per, avoid=None):
        akey = None if avoid is None else mp.nstr(mpc_of(avoid), 20)
        key = (which, akey)
        hit = self._cycles.get(key)
        if hit is not None:
            return hit
        geom = self.geom
        targets = per.a_periods if which == "a" else per.b_periods
        aj = geom.cfg.points[0] if which == "a" else geom.cfg.points[2]
        notes = []
        with self.policy.context(extra_digits=10):
            m = (geom.v + aj) / 2
            base_r = mp.mpf("0.65") * abs(geom.v - aj)
            mf = complex(m)
            for fac in ("1", "1.06", "1.13", "0.94", "1.2", "0.88"):
                R = base_r * mp.mpf(fac)
                rf = float(R)
                if avoid is not None and \
                        abs(abs(complex(avoid) - mf) - rf) < 0.04 * rf:
                    notes.append((fac, "avoid point too close to circle"))
                    continue
                cr = sorted(self._circle_crossings(mf, rf))
                if len(cr) != 2 or cr[0][1] == cr[1][1]:
                    notes.append((fac, f"crossings {cr}"))
                    continue
                th0, th1 = cr[0][0], cr[1][0]
                if min(th1 - th0, 2 * math.pi - (th1 - th0)) < 1e-4:
                    notes.append((fac, "crossings nearly tangent"))
                    continue
                clear = min(min(abs((mf + rf * complex(math.cos(t),
                                                       math.sin(t))) -
                                    complex(c))
                                for c in [geom.v] + list(geom.cfg.points))
                            for t, _ in cr)
                if clear < 0.05 * rf:
                    notes.append((fac, "crossing near a branch point"))
                    continue
                # seed angle: the farther-from-the-cuts gap midpoint
                gaps = [((th0 + th1) / 2, (th0, th1)),
                        (((th1 + th0 + 2 * math.pi) / 2) % (2 * math.pi),
                         (th1, th0 + 2 * math.pi))]
                best = None
                for thm, _ in gaps:
                    zm = mf + rf * complex(math.cos(thm), math.sin(thm))
                    d, _aid = geom.distance_to_arcs(zm)
                    if best is None or d > best[0]:
                        best = (d, thm)
                th_seed = best[1]
                # vertex angles: one full turn from the seed, crossings
                # inserted exactly, gaps subdivided below pi/32
                marks = sorted(((t - th_seed) % (2 * math.pi)
                                for t, _ in cr))
                angles = [0.0]
                prev = 0.0
                for nxt in marks + [2 * math.pi]:
                    span = nxt - prev
                    pieces = max(1, int(math.ceil(span / (math.pi / 32))))
                    for i in range(1, pieces + 1):
                        angles.append(prev + span * i / pieces)
                    prev = nxt
                verts = [m + R * mp.exp(mp.mpc(0, th_seed + a))
                         for a in angles]
                verts[-1] = verts[0]
                st0 = self.state_at(verts[0])
                states = [st0]
                for pnt in verts[1:]:
                    states.append(self.tp.continue_to(states[-1], pnt))
                t_open = self.tp.value_with(st0, T_EXPS)
                t_close = self.tp.value_with(states[-1], T_EXPS)
                if abs(t_close - t_open) > mp.mpf("1e-10") * abs(t_open):
                    notes.append((fac, "lift did not close"))
                    continue
                cyc = _Cycle(which, verts, states, 1, None, cr)

                def mk(t, st):
                    iw = self.tp.value_with(st, INV_W_EXPS)
                    return [iw, t * iw, t * t * iw]

                raws = self._cycle_integral(cyc, mk, self.policy)
                if abs(raws[0] - targets[0]) <= abs(raws[0] + targets[0]):
                    orient = 1
                else:
                    orient = -1
                devs = [float(abs(orient * raws[k] - targets[k]) /
                              abs(targets[k])) for k in range(3)]
                if max(devs) > 1e-9:
                    notes.append((fac, f"period deviations {devs}"))
                    continue
                cyc.orient = orient
                cyc.period_devs = devs
                self._cycles[key] = cyc
                return cyc
        raise RuntimeError(
            f"could not realize the {which}-cycle: {notes}")

    def _cycle_integral(self, cyc, make_val, policy):
        """Integral of make_val(t, state) once around the cycle polygon,
        oriented; scalar or list depending on make_val."""
        total = None
        for i in range(len(cyc.verts) - 1):

            def f(t, st=cyc.states[i]):
                return make_val(t, self.tp.continue_to(st, t))

            val, _ = integrate_with_error(
                f, Contour.line(cyc.verts[i], cyc.verts[i + 1]), policy)
            if total is None:
                total = val
            elif isinstance(val, list):
                total = [a + b for a, b in zip(total, val)]
            else:
                total += val
        if isinstance(total, list):
            return [cyc.orient * v for v in total]
        return cyc.orient * total

    # -- seed grid for the inversion -------------------------------------

    def _gl_chain(self, state, z_to, order=16):
        """Fixed-order Gauss integral of dz/w from state.z to z_to (split
        into subsegments of at most a twelfth of the star radius)."""
        pairs = legendre_nodes(order, mp.dps)
        span = z_to - state.z
        pieces = max(1, int(abs(span) / (float(self.geom.R_star) / 12)) + 1)
        total = mp.mpc(0)
        cur = state
        for i in range(pieces):
            a = state.z + span * mp.mpf(i) / pieces
            b = state.z + span * mp.mpf(i + 1) / pieces
            half = (b - a) / 2
            mid = (a + b) / 2
            for x, wt in pairs:
                st = self.tp.continue_to(cur, mid + half * x)
                total += wt * half * self.tp.value_with(st, INV_W_EXPS)
            cur = self.tp.continue_to(cur, b)
        return total, cur

    def _abel_grid(self):
        """Sheet-1 raw Abel values on a flood-filled grid plus outer rings,
        as a list of (complex point, raw value)."""
        if self._grid is not None:
            return self._grid
        from collections import deque
        geom = self.geom
        with self.policy.context(extra_digits=10):
            n = 64
            H = mp.mpf("2.2") * geom.R_star
            cell = 2 * H / (n - 1)
            block = 0.85 * float(cell)
            centers = [complex(c) for c in [geom.v] + list(geom.cfg.points)]

            def node_z(i, j):
                return mp.mpc(mp.re(geom.v) - H + cell * i,
                              mp.im(geom.v) - H + cell * j)

            blocked = {}
            for i in range(n):
                for j in range(n):
                    zf = complex(node_z(i, j))
                    d, _ = geom.distance_to_arcs(zf)
                    db = min(abs(zf - c) for c in centers)
                    blocked[(i, j)] = min(d, db) < block
            start = None
            for corner in ((0, 0), (0, n - 1), (n - 1, 0), (n - 1, n - 1)):
                if not blocked[corner]:
                    start = corner
                    break
            if start is None:
                raise RuntimeError("grid corners all blocked")
            z0 = node_z(*start)
            raw0 = self._abel_raw(SurfacePoint(z0, 1))
            st0 = self.state_at(z0)
            vals = {start: raw0}
            states = {start: st0}
            queue = deque([start])
            while queue:
                cur = queue.popleft()
                zc = node_z(*cur)
                for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    nb = (cur[0] + di, cur[1] + dj)
                    if not (0 <= nb[0] < n and 0 <= nb[1] < n):
                        continue
                    if nb in vals or blocked[nb]:
                        continue
                    zn = node_z(*nb)
                    if geom._crosses_arcs(zc, zn) is not False:
                        continue
                    seg, stn = self._gl_chain(states[cur], zn)
                    vals[nb] = vals[cur] + seg
                    states[nb] = stn
                    queue.append(nb)
            out = [(complex(node_z(*k)), v) for k, v in vals.items()]
            # outer rings, chained from the nearest flooded node
            ring_keys = list(vals.keys())
            for rad_fac in ("3.1", "4.4"):
                rad = mp.mpf(rad_fac) * geom.R_star
                for kk in range(36):
                    th = 2 * mp.pi * kk / 36 + mp.mpf("0.05")
                    zr = geom.v + rad * mp.exp(mp.mpc(0, th))
                    zrf = complex(zr)
                    near = min(ring_keys,
                               key=lambda k: abs(complex(node_z(*k)) - zrf))
                    zn = node_z(*near)
                    if geom._crosses_arcs(zn, zr) is not False:
                        continue
                    seg, _ = self._gl_chain(states[near], zr)
                    out.append((zrf, vals[near] + seg))
            self._grid = out
        return self._grid

    # -- sheet identification ---------------------------------------------

    def _sheet_of_state(self, state):
        """1 when the tracked value agrees with the planar branch at the
        state's position, else 2."""
        z = state.z
        hint = self._near_arc_normal(z)
        st_pl = self.state_at(z, outward=hint)
        t_tr = self.tp.value_with(state, T_EXPS)
        t_pl = self.tp.value_with(st_pl, T_EXPS)
        return 1 if abs(t_tr - t_pl) <= abs(t_tr + t_pl) else 2

    # -- detoured routing around the moving pole ---------------------------

    def _route_avoiding(self, z, pole, outward=None):
        """Routed waypoints from the anchor to z, bent around the planar
        position of the moving pole where the route passes too close."""
        geom = self.geom
        pts = [geom.base] + geom.route_to(z, outward)
        if pole is None:
            return pts
        pf = complex(pole)
        h = mp.mpf("0.05") * geom.R_star
        if abs(complex(z) - pf) < 2 * float(h):
            return pts
        out = [pts[0]]
        for a, b in zip(pts, pts[1:]):
            af, bf = complex(a), complex(b)
            d = _point_seg_dist(pf, af, bf)
            if d < 0.02 * float(geom.R_star) and abs(bf - af) > 0:
                dirv = (b - a) / abs(b - a)
                proj = mp.re((mpc_of(pole) - a) * mp.conj(dirv))
                proj = min(max(proj, mp.mpf(0)), abs(b - a))
                foot = a + dirv * proj
                nd = mp.mpc(0, 1) * dirv
                if mp.re((mpc_of(pole) - foot) * mp.conj(nd)) > 0:
                    nd = -nd
                p_in = foot - h * dirv + h * nd
                p_out = foot + h * dirv + h * nd
                out.extend([p_in, p_out])
            out.append(b)
        return out

    # -- eta pieces ---------------------------------------------------------

    def _ray_sigma_path(self, z_n):
        """Nodes in the sigma variable for tail integrals along the anchor
        ray, detoured into complex sigma when the pole sits on the ray."""
        geom = self.geom
        d = geom.base - geom.v
        path = [mp.mpf(0), mp.mpf(1)]
        if z_n is None:
            return path
        s0 = d / (mpc_of(z_n) - geom.v)   # sigma of the pole, if on the ray
        if not (0 < mp.re(s0) < 1) or abs(mp.im(s0)) > mp.mpf("1e-6"):
            return path
        sig = mp.re(s0)
        h = mp.mpf("1e-2") * min(sig, 1 - sig)
        return [mp.mpf(0), sig - h, sig - h + mp.mpc(0, 1) * h,
                sig + h + mp.mpc(0, 1) * h, sig + h, mp.mpf(1)]

    def _log_along_ray(self, z_n, sigma_path):
        """log(base - z_n) with the argument accumulated continuously from
        sigma -> 0 (where arg(z - z_n) -> arg(base - v)) to sigma = 1.

        March the normalized factor 1 - (z_n - v) sigma / d instead of the
        vector itself: it equals 1 exactly at sigma = 0, so no small-sigma
        seed is needed and the accumulated argument is exact up to the
        telescoping of per-step increments (each well below pi)."""
        geom = self.geom
        d = geom.base - geom.v
        zn = mpc_of(z_n)
        slope = (zn - geom.v) / d
        acc = mp.mpf(0)
        prev = mp.mpc(1)
        for k in range(len(sigma_path) - 1):
            a, b = sigma_path[k], sigma_path[k + 1]
            steps = 64
            for i in range(1, steps + 1):
                s = a + (b - a) * mp.mpf(i) / steps
                vec = 1 - slope * s
                acc += mp.arg(vec / prev)
                prev = vec
        return (mp.log(abs(geom.base - zn))
                + mp.mpc(0, 1) * (mp.arg(d) + acc))

    def _eta_pieces(self, per, pole, w_n, policy=None):
        """delta1, the a-period, the planar core of the differential with
        poles at the moving point and at infinity on sheet 2, the tail of
        its integral from infinity to the anchor, and the sheet-2 prefix.

        delta1 depends on the chosen homology representative through the
        pole's position relative to it; the beta_2 branch extracted from
        the same representative's a-period compensates, so any consistent
        pair gives the same outer matrix.
        """
        key = pole.key()
        hit = self._eta_cache.get(key)
        if hit is not None:
            return hit
        pol = policy or self.policy
        geom = self.geom
        with pol.context(extra_digits=10):
            z_n = mpc_of(pole.z)
            cents = [geom.v] + list(geom.cfg.points)

            def core_base(z, w):
                ld = mp.fsum(1 / (z - c) for c in cents)
                return (-ld / 4 + 1 / (2 * (z - z_n))
                        + w_n / (2 * w * (z - z_n)) + z / (2 * w))

            def mk(t, st):
                w = self.tp.value_with(st, W_EXPS)
                return [core_base(t, w), 1 / w]

            cyc_b = self._cycle("b", per, avoid=z_n)
            ib, jb = self._cycle_integral(cyc_b, mk, pol)
            delta1 = -ib / jb
            cyc_a = self._cycle("a", per, avoid=z_n)
            ia, ja = self._cycle_integral(cyc_a, mk, pol)
            a_period = ia + delta1 * ja

            def core(z, w):
                return core_base(z, w) + delta1 / w

            # tail of int d(eta) from infinity to the anchor along the ray:
            # z/(2w) = T/2 + v/(2w) exactly, and the antiderivative of the
            # planar log-pole part telescopes against log Phi, leaving the
            # boundary value (1/2) log of Phi's leading constant.
            sig_path = self._ray_sigma_path(z_n)
            h_base, _ = geom.phi_log(geom.base)
            g_base = (-mp.fsum(mp.log(geom.base - c) for c in cents) / 4
                      + self._log_along_ray(z_n, sig_path) / 2
                      + h_base / 2)
            d = geom.base - geom.v

            def rem(sigma):
                t = geom.v + d / sigma
                st = self.tp.start(t)
                w = self.tp.value_with(st, W_EXPS)
                return (w_n / (2 * w * (t - z_n))) * (-d / sigma ** 2)

            i1, _ = integrate_with_error(
                rem, Contour.polyline(sig_path), pol)
            tail = (g_base - geom.phi_leading_log() / 2 + i1
                    + (geom.v / 2 + delta1) * self._tail_raw())
            # sheet-2 prefix of int d(eta) along the canonical chain
            st0 = self.tp.start(geom.base)
            chain = self._sheet2_chain()

            def mkc(t, st):
                return core(t, self.tp.value_with(st, W_EXPS))

            pref, st2 = self._poly_integral(st0, chain[1:], mkc, pol)
            pieces = {"delta1": delta1, "a_period": a_period, "core": core,
                      "tail": tail, "prefix": (pref, st2),
                      "pole_z": z_n, "sigma_path": sig_path}
            self._eta_cache[key] = pieces
        return pieces

    def _u_tail_out(self, pieces, sheet, policy=None):
        """Outward-ray integral of the eta core from the anchor to
        infinity on the given sheet, regularized by 1/(t - v) on sheet 2
        (where the core behaves like -1/t)."""
        pol = policy or self.policy
        geom = self.geom
        core = pieces["core"]
        d = geom.base - geom.v
        st0 = None if sheet == 1 else pieces["prefix"][1]
        with pol.context(extra_digits=10):

            def f(sigma):
                t = geom.v + d / sigma
                st = (self.tp.start(t) if sheet == 1
                      else self.tp.continue_to(st0, t))
                w = self.tp.value_with(st, W_EXPS)
                val = core(t, w)
                if sheet == 2:
                    val += 1 / (t - geom.v)
                return val * (d / sigma ** 2)

            val, _ = integrate_with_error(
                f, Contour.polyline(pieces["sigma_path"]), pol)
        return val


def build_surface(geom, policy=None):
    return SurfaceFrame(geom, policy)


# ---------------------------------------------------------------------------
# periods and index constants


def _compute_periods(surface, policy):
    geom = surface.geom
    with policy.context(extra_digits=10):
        tpi = 2 * mp.pi * mp.mpc(0, 1)
        rows = []
        for j in range(3):
            sw = geom.sweep("sqrt", j, +1)

            def mk(t, st, sw=sw):
                iw = sw.tp.value_with(st, INV_W_EXPS)
                return [iw, t * iw, t * t * iw]

            vals, _ = sw.integrate(mk, q_a=2, q_v=2)
            rows.append(tuple(-v / tpi for v in vals))
        M = tuple(rows)
        for j in range(3):
            if abs(M[j][0]) == 0:
                raise RuntimeError(f"vanishing zeroth moment on arc {j}")
        tau = M[0][0] / M[2][0]
        if mp.im(tau) >= 0:
            raise RuntimeError("modulus tau must have negative imaginary part")
        S = (geom.v + mp.fsum(geom.cfg.points)) / 2
        c0 = abs(mp.fsum(M[j][0] for j in range(3)))
        c1 = abs(mp.fsum(M[j][1] for j in range(3)) - mp.mpf(1) / 2)
        c2 = abs(mp.fsum(M[j][2] for j in range(3)) - S / 2)
        checks = {"moment_sum_0": float(c0),
                  "moment_sum_1": float(c1),
                  "moment_sum_2": float(c2 / (1 + abs(S)))}
        a_periods = tuple(-2 * tpi * M[0][k] for k in range(3))
        b_periods = tuple(-2 * tpi * M[2][k] for k in range(3))
        nu0_scale = -1 / (2 * M[2][0])
    return Periods(M, tau, S, a_periods, b_periods, nu0_scale, checks)


def periods(surface, policy=None):
    """Arc period moments and the modulus; cached on the frame."""
    return surface.periods(policy)


def cycle_period_report(surface, per=None, policy=None):
    """Relative deviations of the lifted-cycle quadratures from the arc
    moment shortcuts, per cycle and power."""
    per = per or surface.periods(policy)
    return {which: surface._cycle(which, per).period_devs
            for which in ("a", "b")}


def index_constants(cfg, kappas, n, policy=None):
    """Jump constants for one index n from the arc jump factors kappa_j."""
    with (policy.context(extra_digits=10) if policy is not None
          else mp.workdps(mp.dps)):
        tau_j = []
        t_j = []
        s_nj = []
        for j, a in enumerate(cfg.exponents):
            af = mp.mpf(a.numerator) / a.denominator
            tau_j.append(mp.exp(-mp.pi * mp.mpc(0, 1) * af))
            t_j.append(-2 * mp.mpc(0, 1) * mp.sinpi(af))
            s_nj.append(t_j[-1] * kappas[j] ** n)
        return IndexConstants(n, tuple(tau_j), tuple(t_j), tuple(s_nj))


# ---------------------------------------------------------------------------
# Abel map and inversion


def abel_map(surface, per=None, target=None, policy=None, outward=None):
    """Normalized Abel integral from infinity on sheet 1 to the target,
    along the canonical path; b-period 2 pi i, a-period 2 pi i tau."""
    pol = policy or surface.policy
    per = per or surface.periods(pol)
    with pol.context(extra_digits=10):
        raw = surface._abel_raw(target, pol, outward)
        return per.nu0_scale * raw


def _inversion_target(per, constants):
    tpi = 2 * mp.pi * mp.mpc(0, 1)
    s1, s2, s3 = constants.s_nj
    return -tpi * per.tau * (1 + mp.log(s2 / s1) / tpi) - mp.log(s2 / s3)


def _newton_invert(surface, per, T00, seed, policy):
    """Newton iteration for the Abel equation from one seed; returns
    (z, state, abel value, steps) or None when the seed fails."""
    geom = surface.geom
    tau = per.tau
    scale = per.nu0_scale
    m30_2 = 2 * per.M[2][0]
    cents = [geom.v] + list(geom.cfg.points)
    tol_a = mp.mpf(10) ** (-(policy.decimal_digits - 8)) * 2 * mp.pi
    tol_mid = mp.mpf("1e-12") * 2 * mp.pi
    z, A, st = seed
    steps = 0
    for phase in (0, 1):
        if phase == 1:
            sheet = surface._sheet_of_state(st)
            A = scale * surface._abel_raw(SurfacePoint(z, sheet), policy)
        tol = tol_mid if phase == 0 else tol_a
        for _ in range(40):
            r, _k = reduce_mod_lattice(A - T00, tau)
            if abs(r) < tol:
                break
            w = surface.tp.value_with(st, W_EXPS)
            dz = r * m30_2 * w
            dmin = min(abs(z - c) for c in cents)
            if abs(dz) > mp.mpf("0.5") * dmin:
                dz *= mp.mpf("0.5") * dmin / abs(dz)
            moved = False
            for _half in range(8):
                z_try = z + dz
                if min(abs(z_try - c) for c in cents) < \
                        mp.mpf("1e-10") * geom.R_star:
                    dz /= 2
                    continue
                seg, st_try = surface._leg_invw(st, z_try, policy)
                A_try = A + scale * seg
                r_try, _k = reduce_mod_lattice(A_try - T00, tau)
                if abs(r_try) < abs(r):
                    z, A, st = z_try, A_try, st_try
                    steps += 1
                    moved = True
                    break
                dz /= 2
            if not moved:
                return None
        else:
            return None
    r, _k = reduce_mod_lattice(A - T00, tau)
    if abs(r) >= tol_a:
        return None
    return z, st, A, steps


def jacobi_inversion(surface, per=None, constants=None, policy=None):
    """Position of the moving pole for index n: the surface point whose
    Abel value matches the jump-constant target modulo the lattice."""
    pol = policy or surface.policy
    per = per or surface.periods(pol)
    geom = surface.geom
    with pol.context(extra_digits=15):
        tau = per.tau
        scale = per.nu0_scale
        T00 = _inversion_target(per, constants)
        a2inf = scale * surface._a2inf_raw()
        ref = 2 * mp.pi * (1 + abs(tau))
        r0, k0 = reduce_mod_lattice(T00, tau)
        if abs(r0) < mp.mpf("1e-8") * ref:
            return InversionResult(SurfacePoint.at_infinity(1), None, k0,
                                   True, 0, T00, mp.mpc(0),
                                   float(abs(r0)), 0)
        r2, k2 = reduce_mod_lattice(T00 - a2inf, tau)
        if abs(r2) < mp.mpf("1e-8") * ref:
            return InversionResult(SurfacePoint.at_infinity(2), None, k2,
                                   True, 0, T00, a2inf,
                                   float(abs(r2)), 0)
        # seeds: flooded grid on both sheets, then far-field candidates
        grid = surface._abel_grid()
        cands = []
        for zf, raw in grid:
            a1v = scale * raw
            d1, _ = reduce_mod_lattice(a1v - T00, tau)
            cands.append((abs(d1), mpc_of(zf), 1, a1v))
            a2v = a2inf - a1v
            d2, _ = reduce_mod_lattice(a2v - T00, tau)
            cands.append((abs(d2), mpc_of(zf), 2, a2v))
        cands.sort(key=lambda c: c[0])
        seeds = []
        seen = set()
        for d, zf, sheet, aval in cands:
            ck = (mp.nstr(zf, 8), sheet)
            if ck in seen:
                continue
            seen.add(ck)
            seeds.append((zf, sheet, aval))
            if len(seeds) >= 5:
                break
        z_far = -scale / r0
        if abs(z_far - geom.v) > 2.5 * geom.R_star:
            seeds.insert(0, (z_far, 1, scale * (-1 / z_far)))
        z_far2 = scale / r2
        if abs(z_far2 - geom.v) > 2.5 * geom.R_star:
            seeds.append((z_far2, 2, a2inf + scale / z_far2))
        result = None
        for zf, sheet, aval in seeds:
            if sheet == 1:
                if abs(zf - geom.v) > 2.5 * geom.R_star and \
                        geom.distance_to_arcs(complex(zf))[0] > \
                        float(geom.R_star):
                    st = surface.tp.start(zf)
                else:
                    st = surface.state_at(zf)
            else:
                st = surface._sheet2_prefix()[1]
                for p in surface.geom.route_to(zf):
                    st = surface.tp.continue_to(st, p)
            got = _newton_invert(surface, per, T00, (zf, aval, st), pol)
            if got is not None:
                result = got
                break
        if result is None:
            raise NewtonDiverged("Abel inversion failed from every seed")
        z, st, A_fin, steps = result
        w_n = surface.tp.value_with(st, W_EXPS)
        sheet = surface._sheet_of_state(st)
        dmin = min(abs(z - c) for c in [geom.v] + list(geom.cfg.points))
        if dmin < mp.mpf("1e-8") * geom.R_star:
            raise NearBranchPoint(
                f"moving pole lands on a branch point (distance {mp.nstr(dmin, 5)})")
        x, y = lattice_coords(T00 - A_fin, tau)
        if abs(x - mp.nint(x)) > 1e-6 or abs(y - mp.nint(y)) > 1e-6:
            raise AmbiguousBranch(
                f"non-integer lattice coordinates ({mp.nstr(x, 10)}, {mp.nstr(y, 10)})")
        k1t, k2t = int(mp.nint(x)), int(mp.nint(y))
        # beta_2 branch from the a-period of the pole differential
        pieces = surface._eta_pieces(per, SurfacePoint(z, sheet), w_n, pol)
        s1, s2, s3 = constants.s_nj
        combo = (mp.log(s1)
                 + (1 + tau) * (mp.pi * mp.mpc(0, 1) + mp.log(s2 / s1))
                 - mp.log(s3))
        xe, ye = lattice_coords(pieces["a_period"] - combo, tau)
        if abs(xe - mp.nint(xe)) > 1e-6 or abs(ye - mp.nint(ye)) > 1e-6:
            raise AmbiguousBranch(
                f"a-period identity off the lattice ({mp.nstr(xe, 10)}, {mp.nstr(ye, 10)})")
        k1e = int(mp.nint(xe))
        if max(abs(k1t), abs(k2t), abs(k1e)) > 2:
            warnings.warn("branch offsets fell outside the small default "
                          f"window: ({k1t}, {k2t}; beta2 {k1e})")
        r_fin, _ = reduce_mod_lattice(A_fin - T00, tau)
        return InversionResult(SurfacePoint(z, sheet), w_n, (k1t, k2t),
                               False, k1e, T00, A_fin,
                               float(abs(r_fin)), steps)


# ---------------------------------------------------------------------------
# Szego function


def szego_function(surface, per=None, constants=None, inversion=None,
                   policy=None):
    """Piecewise-constant-modulus factor F: exp of a combination of the
    two Cauchy integrals over arcs 1 and 3, with the branch of beta_2
    fixed by the inversion's a-period bookkeeping."""
    if inversion.pathological:
        raise PathologicalIndex("no Szego branch data at a pathological index")
    pol = policy or surface.policy
    per = per or surface.periods(pol)
    geom = surface.geom
    with pol.context(extra_digits=10):
        tau = per.tau
        tpi = 2 * mp.pi * mp.mpc(0, 1)
        s1, s2, s3 = constants.s_nj
        beta1 = mp.log(s1)
        beta2 = (mp.pi * mp.mpc(0, 1) + mp.log(s2 / s1)
                 + tpi * inversion.beta2_branch)
        beta3 = (1 + tau) * beta2
        M = per.M
        Xi = beta2 * ((M[0][2] - tau * M[2][2])
                      - per.S * (M[0][1] - tau * M[2][1]))
        F_inf = mp.exp(beta1 / 2
                       - beta2 * (M[0][1] - tau * M[2][1] - mp.mpf(1) / 2))

    def _ell(j, z, wz):
        sw = geom.sweep("sqrt", j, +1)

        def mk(t, st, sw=sw):
            return 1 / (sw.tp.value_with(st, W_EXPS) * (t - z))

        val, _ = sw.integrate(mk, q_a=2, q_v=2)
        return wz * val / (2 * mp.pi * mp.mpc(0, 1))

    def F(z, outward=None):
        with pol.context(extra_digits=10):
            zz = mpc_of(z)
            st = surface.state_at(zz, outward)
            wz = surface.w_of(st)
            l1 = _ell(0, zz, wz)
            l3 = _ell(2, zz, wz)
            lam = beta1 / 2 - beta2 * (l1 - tau * l3 - mp.mpf(1) / 2)
            return mp.exp(lam)

    ab_cache = {}

    def F_abelian(z, outward=None):
        with pol.context(extra_digits=10):
            if "leg" not in ab_cache:
                a1 = geom.cfg.points[0]
                x1 = a1 + mp.mpf("0.45") * (a1 - geom.v)
                st1 = surface.state_at(x1)

                def mk(t):
                    stt = surface.tp.continue_to(st1, t)
                    return surface.tp.value_with(stt, INV_W_EXPS)

                leg, _ = integrate_with_error(
                    mk, Contour.line(a1, x1, q_start=2), pol)
                ab_cache["leg"] = leg
                ab_cache["raw_x1"] = surface._abel_raw(SurfacePoint(x1, 1),
                                                       pol)
            raw_z = surface._abel_raw(SurfacePoint(mpc_of(z), 1), pol,
                                      outward)
            lam = beta1 / 2 + Xi * (ab_cache["leg"]
                                    + raw_z - ab_cache["raw_x1"])
            return mp.exp(lam)

    return SzegoData(beta1, beta2, beta3, Xi, F, F_inf, F_abelian)


# ---------------------------------------------------------------------------
# eta differential


def eta_differential(surface, per=None, inversion=None, policy=None):
    """The third-kind differential for the index: simple poles of residue
    +1 at the moving point and at infinity on sheet 2, residue -1/2 at
    the branch points, vanishing b-period."""
    pol = policy or surface.policy
    per = per or surface.periods(pol)
    geom = surface.geom
    if inversion.pathological:
        if inversion.z_n.sheet == 2:
            raise PathologicalIndex(
                "moving pole at infinity on sheet 2 merges with the fixed "
                "pole; no admissible differential")
        with pol.context(extra_digits=10):
            cents = [geom.v] + list(geom.cfg.points)
            m30 = per.M[2][0]

            def core_star(z, w):
                ld = mp.fsum(1 / (z - c) for c in cents)
                return -ld / 4 + 1 / (4 * m30 * w)

            def mk(t, st):
                return core_star(t, surface.tp.value_with(st, W_EXPS))

            cyc_a = surface._cycle("a", per)
            a_per = surface._cycle_integral(cyc_a, mk, pol)

        def ev_star(pt):
            st = surface.state_at(pt.z)
            w = surface.w_of(st)
            if pt.sheet == 2:
                w = -w
            return core_star(mpc_of(pt.z), w)

        return EtaData(None, a_per, ev_star, inversion.z_n, True)
    pieces = surface._eta_pieces(per, inversion.z_n, inversion.w_n, pol)
    core = pieces["core"]

    def ev(pt):
        st = surface.state_at(pt.z)
        w = surface.w_of(st)
        if pt.sheet == 2:
            w = -w
        return core(mpc_of(pt.z), w)

    return EtaData(pieces["delta1"], pieces["a_period"], ev,
                   inversion.z_n, False)


# ---------------------------------------------------------------------------
# parametrix


def parametrix(surface, per=None, constants=None, inversion=None,
               szego=None, eta=None, policy=None):
    """The outer model matrix N and its ingredients.

    The second-column constant is calibrated once from the first-row jump
    relation on arc 1 (the relation couples the two columns, so the
    relative column scale is rigid) and validated downstream by the jump
    and determinant checks.
    """
    if inversion.pathological or (eta is not None and eta.star):
        raise PathologicalIndex("no outer model at a pathological index")
    pol = policy or surface.policy
    per = per or surface.periods(pol)
    geom = surface.geom
    pieces = surface._eta_pieces(per, inversion.z_n, inversion.w_n, pol)
    core = pieces["core"]
    tail = pieces["tail"]
    pref, st2 = pieces["prefix"]
    z_n = mpc_of(inversion.z_n.z)
    w_n = inversion.w_n
    base_state = surface.tp.start(geom.base)

    def mkc(t, st):
        return core(t, surface.tp.value_with(st, W_EXPS))

    def u1(z, outward=None):
        with pol.context(extra_digits=10):
            zz = mpc_of(z)
            poly = surface._route_avoiding(zz, z_n, outward)
            val, _ = surface._poly_integral(base_state, poly[1:], mkc, pol)
            return mp.exp(tail + val)

    def u2(z, outward=None):
        with pol.context(extra_digits=10):
            zz = mpc_of(z)
            poly = surface._route_avoiding(zz, z_n, outward)
            val, _ = surface._poly_integral(st2, poly[1:], mkc, pol)
            return mp.exp(tail + pref + val)

    with pol.context(extra_digits=10):
        # single-valuedness probe: u2 must be continuous across the
        # outer ray from a_1 (route shapes differ sharply there)
        ray = geom.outer_rays[0]
        yy = ray[min(len(ray) - 2, (6 * len(ray)) // 10)]
        tang = ray[min(len(ray) - 1, (6 * len(ray)) // 10 + 1)] - yy
        tang = tang / abs(tang)
        eps = mp.mpf("1e-6") * geom.R_star
        uL = u2(yy + mp.mpc(0, 1) * tang * eps)
        uR = u2(yy - mp.mpc(0, 1) * tang * eps)
        if abs(uL / uR - 1) > mp.mpf("1e-5"):
            raise RuntimeError(
                f"u2 not single valued across the cross-cut ray: "
                f"ratio {mp.nstr(uL / uR, 10)}")
        # calibrate the second-column constant from the first-row jump
        # relations at an interior point of arc 1; the one-sided boundary
        # error is linear in the offset, so extrapolate two offsets to zero
        verts = geom.arcs[0].vertices
        imid = len(verts) // 2
        t0 = verts[imid]
        tg = verts[imid + 1] - verts[imid - 1]
        tg = tg / abs(tg)
        nu = mp.mpc(0, 1) * tg
        s1 = constants.s_nj[0]
        F_inf = szego.F_infinity
        cands = []
        for off_s in ("1e-8", "0.5e-8"):
            off = mp.mpf(off_s) * geom.R_star
            zp, zm = t0 + off * nu, t0 - off * nu
            Fp, Fm = szego.F(zp, nu), szego.F(zm, -nu)
            n11p = F_inf * u1(zp, nu) / Fp
            n11m = F_inf * u1(zm, -nu) / Fm
            n12p_hat = F_inf * Fp * u2(zp, nu)
            n12m_hat = F_inf * Fm * u2(zm, -nu)
            c_b = s1 * n11m / n12p_hat
            c_a = -s1 * n11p / n12m_hat
            if abs(c_a / c_b - 1) > mp.mpf("1e-4"):
                raise RuntimeError(
                    f"column constant calibration inconsistent: "
                    f"{mp.nstr(c_a, 10)} vs {mp.nstr(c_b, 10)}")
            cands.append((c_a + c_b) / 2)
        col_c = 2 * cands[1] - cands[0]

        def n12_tilde(z, outward=None):
            return col_c * u2(z, outward)

        # the tail algebra must make u1 tend to 1 at infinity: the
        # outward-ray integral has to cancel the tail exactly
        j1 = surface._u_tail_out(pieces, 1, pol)
        if abs(tail + j1) > mp.mpf(10) ** (-(pol.decimal_digits // 2)):
            raise RuntimeError(
                f"eta tail inconsistent with the outward integral: "
                f"residual {mp.nstr(tail + j1, 8)}")
        # C12 = lim z * N~_12 along the anchor ray, exactly: the log of
        # z * u2 telescopes to the regularized outward integral
        j2 = surface._u_tail_out(pieces, 2, pol)
        C12 = col_c * mp.exp(tail + pref + j2 + mp.log(geom.base - geom.v))
        # cross-check the limit against a crude far-field sample
        z_chk = geom.v + 24 * geom.R_star * mp.exp(mp.mpc(0, mp.mpf("0.9")))
        c_chk = z_chk * n12_tilde(z_chk)
        if abs(c_chk / C12 - 1) > mp.mpf("0.1"):
            raise RuntimeError(
                f"pole-coefficient limit off: ray gives {mp.nstr(C12, 10)}, "
                f"sample gives {mp.nstr(c_chk, 10)}")
        b = -1 / (2 * C12)
        a = -b * (z_n - per.S)

    def N(z, outward=None):
        with pol.context(extra_digits=10):
            zz = mpc_of(z)
            st = surface.state_at(zz, outward)
            w1 = surface.w_of(st)
            Fz = szego.F(zz, outward)
            u1z = u1(zz, outward)
            n12t = n12_tilde(zz, outward)
            q1 = a + b * ((w1 + w_n) / (zz - z_n) - zz)
            q2 = a + b * ((-w1 + w_n) / (zz - z_n) - zz)
            F_inf = szego.F_infinity
            return ((F_inf * u1z / Fz, F_inf * Fz * n12t),
                    (q1 * u1z / (F_inf * Fz), q2 * n12t * Fz / F_inf))

    spurious = None
    if inversion.z_n.sheet == 1:
        spurious = z_n
    return ParametrixData(constants.n, pieces["delta1"], (a, b), C12,
                          col_c, u1, u2, N, spurious)


# ---------------------------------------------------------------------------
# bundle, predictions, boundary checks


def build_bundle(surface, n, policy=None, allow_pathological=False):
    """Everything the asymptotic formulas need for one index n."""
    pol = policy or surface.policy
    per = surface.periods(pol)
    kappas = surface.geom.kappas()
    cons = index_constants(surface.geom.cfg, kappas, n, pol)
    inv = jacobi_inversion(surface, per, cons, pol)
    if inv.pathological:
        if not allow_pathological:
            raise PathologicalIndex(
                f"index {n}: moving pole at infinity on sheet "
                f"{inv.z_n.sheet}")
        eta = None
        if inv.z_n.sheet == 1:
            eta = eta_differential(surface, per, inv, pol)
        return SurfaceBundle(n, per, cons, inv, None, eta, None)
    eta = eta_differential(surface, per, inv, pol)
    sz = szego_function(surface, per, cons, inv, pol)
    par = parametrix(surface, per, cons, inv, sz, eta, pol)
    return SurfaceBundle(n, per, cons, inv, sz, eta, par)


def predict(surface, bundle, z, outward=None):
    """(chi, r): strong-asymptotic models off the cuts for the monic
    denominator and the remainder at index n.

    chi(z) = (Phi(z)/c)^n N11(z) / f(z)^(1/2) models Q_n(z);
    r(z) = (c Phi(z))^(-n) N12(z) f(z)^(1/2) models the remainder.
    """
    if bundle.parametrix is None:
        raise PathologicalIndex(f"no outer model for index {bundle.n}")
    geom = surface.geom
    pol = surface.policy
    with pol.context(extra_digits=10):
        zz = mpc_of(z)
        dist, _ = geom.distance_to_arcs(zz)
        if dist < 1e-12 * float(geom.R_star):
            raise OnCut("prediction requested on the cut system")
        hacc, _st = geom.phi_log(zz, outward)
        logc = geom.phi_leading_log()
        Nz = bundle.parametrix.N(zz, outward)
        ftp = geom.f_product()
        fst = geom.eval_routed(ftp, zz, outward)
        fhalf = ftp.value_with(
            fst, tuple(a / 2 for a in geom.cfg.exponents))
        grow = mp.exp(bundle.n * (hacc - logc))
        decay = mp.exp(-bundle.n * (hacc + logc))
        chi = grow * Nz[0][0] / fhalf
        rr = decay * Nz[0][1] * fhalf
        return chi, rr


def _arc_probe_points(geom, j, count, offset_scale):
    """Interior sample points of arc j with unit left normals, offset by
    offset_scale * R to both sides: list of (t, nu, z_plus, z_minus)."""
    verts = geom.arcs[j].vertices
    L = len(verts)
    out = []
    delta = mp.mpf(offset_scale) * geom.R_star
    for i in range(count):
        frac = 0.15 + 0.7 * (i + 1) / (count + 1)
        idx = min(max(int(frac * (L - 1)), 3), L - 4)
        t = verts[idx]
        tg = verts[idx + 1] - verts[idx - 1]
        tg = tg / abs(tg)
        nu = mp.mpc(0, 1) * tg
        out.append((t, nu, t + delta * nu, t - delta * nu))
    return out


def parametrix_jump_report(surface, bundle, samples_per_arc=5,
                           offset_scale="1e-10", det_samples=20, seed=11):
    """Deviations of the outer matrix from its defining relations: the
    arc jumps, det N = 1 off the cuts, and N -> I at infinity."""
    import random
    geom = surface.geom
    pol = surface.policy
    par = bundle.parametrix
    out = {"jump": {}, "det": 0.0, "at_infinity": 0.0}
    with pol.context(extra_digits=10):
        for j in range(3):
            s = bundle.constants.s_nj[j]
            worst = 0.0
            for t, nu, zp, zm in _arc_probe_points(
                    geom, j, samples_per_arc, offset_scale):
                Np = par.N(zp, nu)
                Nm = par.N(zm, -nu)
                tgt = ((-Nm[0][1] / s, Nm[0][0] * s),
                       (-Nm[1][1] / s, Nm[1][0] * s))
                ref = max(abs(Np[r][c]) for r in (0, 1) for c in (0, 1))
                dev = max(abs(Np[r][c] - tgt[r][c])
                          for r in (0, 1) for c in (0, 1)) / ref
                worst = max(worst, float(dev))
            out["jump"][j] = worst
        rng = random.Random(seed)
        worst = 0.0
        got = 0
        while got < det_samples:
            zf = complex(geom.v) + 2.8 * float(geom.R_star) * complex(
                rng.uniform(-1, 1), rng.uniform(-1, 1))
            if geom.distance_to_arcs(zf)[0] < 0.05 * float(geom.R_star):
                continue
            if par.predicted_spurious is not None and \
                    abs(zf - complex(mpc_of(par.predicted_spurious))) < \
                    0.05 * float(geom.R_star):
                continue
            Nz = par.N(mpc_of(zf))
            det = Nz[0][0] * Nz[1][1] - Nz[0][1] * Nz[1][0]
            worst = max(worst, float(abs(det - 1)))
            got += 1
        out["det"] = worst
        z_far = geom.v + 40 * geom.R_star * mp.exp(mp.mpc(0, mp.mpf("0.77")))
        Nf = par.N(z_far)
        out["at_infinity"] = float(max(
            abs(Nf[0][0] - 1), abs(Nf[1][1] - 1),
            abs(Nf[0][1]), abs(Nf[1][0])))
    return out


def szego_product_report(surface, bundle, samples_per_arc=5,
                         offset_scale="1e-10"):
    """Deviations of the two-sided boundary products: Phi_+ Phi_- against
    kappa_j and F_+ F_- against its three arc constants."""
    geom = surface.geom
    pol = surface.policy
    sz = bundle.szego
    kap = geom.kappas()
    out = {"phi": {}, "F": {}}
    with pol.context(extra_digits=10):
        f_targets = (bundle.constants.s_nj[0],
                     -bundle.constants.s_nj[1],
                     bundle.constants.s_nj[0] * mp.exp(sz.beta3))
        for j in range(3):
            wp = 0.0
            wf = 0.0
            for t, nu, zp, zm in _arc_probe_points(
                    geom, j, samples_per_arc, offset_scale):
                hp, _ = geom.phi_log(zp, nu)
                hm, _ = geom.phi_log(zm, -nu)
                wp = max(wp, float(abs(mp.exp(hp + hm) / kap[j] - 1)))
                Fp = sz.F(zp, nu)
                Fm = sz.F(zm, -nu)
                wf = max(wf, float(abs(Fp * Fm / f_targets[j] - 1)))
            out["phi"][j] = wp
            out["F"][j] = wf
    return out


def nuttall_boundary_check(surface, bundle, samples_per_arc=5,
                           offset_scale="1e-10", jump_scale=None):
    """Deviation of the boundary-pairing relations sigma chi_+ = (w r)_-
    and sigma chi_- = (w r)_+ with sigma = (f_+ - f_-) w_+.

    jump_scale optionally multiplies the weight jump per arc (a control:
    detuning it must break the pairing by an order-one amount)."""
    geom = surface.geom
    pol = surface.policy
    cons = bundle.constants
    out = {"per_arc": {}, "max": 0.0}
    with pol.context(extra_digits=10):
        ftp = geom.f_product()
        for j in range(3):
            fac = cons.t_j[j] / cons.tau_j[j]
            if jump_scale is not None:
                fac *= jump_scale[j]
            worst = 0.0
            for t, nu, zp, zm in _arc_probe_points(
                    geom, j, samples_per_arc, offset_scale):
                chip, rp = predict(surface, bundle, zp, outward=nu)
                chim, rm = predict(surface, bundle, zm, outward=-nu)
                stp = surface.state_at(zp, nu)
                stm = surface.state_at(zm, -nu)
                w_p = surface.w_of(stp)
                w_m = surface.w_of(stm)
                f_p = ftp.value(geom.eval_routed(ftp, zp, nu))
                sigma = fac * f_p * w_p
                d1 = abs(sigma * chip - w_m * rm) / \
                    max(abs(sigma * chip), abs(w_m * rm))
                d2 = abs(sigma * chim - w_p * rp) / \
                    max(abs(sigma * chim), abs(w_p * rp))
                worst = max(worst, float(d1), float(d2))
            out["per_arc"][j] = worst
            out["max"] = max(out["max"], worst)
    return out


def snapshot(surface, bundle, digits=30):
    """JSON-ready dictionary of every computed constant for one index."""
    geom = surface.geom

    def s(x):
        return None if x is None else mp.nstr(mpc_of(x), digits)

    per = bundle.periods
    inv = bundle.inversion
    d = {
        "n": bundle.n,
        "moments": [[s(per.M[j][k]) for k in range(3)] for j in range(3)],
        "tau": s(per.tau),
        "S": s(per.S),
        "capacity": mp.nstr(geom.capacity(), digits),
        "kappas": [s(k) for k in geom.kappas()],
        "tau_j": [s(x) for x in bundle.constants.tau_j],
        "t_j": [s(x) for x in bundle.constants.t_j],
        "s_nj": [s(x) for x in bundle.constants.s_nj],
        "pole": {"z": "infinity" if inv.z_n.is_infinite else s(inv.z_n.z),
                 "sheet": inv.z_n.sheet},
        "w_n": s(inv.w_n),
        "branch_pair": list(inv.log_branch_choices),
        "beta2_branch": inv.beta2_branch,
        "pathological": inv.pathological,
    }
    if bundle.szego is not None:
        d.update({"beta1": s(bundle.szego.beta1),
                  "beta2": s(bundle.szego.beta2),
                  "beta3": s(bundle.szego.beta3),
                  "Xi": s(bundle.szego.Xi),
                  "F_infinity": s(bundle.szego.F_infinity)})
    if bundle.eta is not None:
        d.update({"delta1": s(bundle.eta.delta1),
                  "eta_a_period": s(bundle.eta.a_period)})
    if bundle.parametrix is not None:
        par = bundle.parametrix
        d.update({"q_a": s(par.q_coeffs[0]), "q_b": s(par.q_coeffs[1]),
                  "C12": s(par.C12),
                  "column_constant": s(par.column_constant),
                  "predicted_spurious": s(par.predicted_spurious)})
    return d
