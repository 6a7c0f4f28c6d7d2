"""Second-order ODE data extracted from computed Pade denominators.

For a three-point configuration with exponent sum zero, each normal
denominator Q_n satisfies a Laguerre-type equation

    A h y'' + (A' h - A h' + B h) y' - n(n+1) D y = 0,

where A = prod (z - a_j), B/A is the logarithmic derivative of f, h is a
monic linear polynomial and D a monic quadratic.  Writing h = x - z1 and
D = x^2 + d1 x + d0 makes the identity linear in (z1, d1, d0), so the
n+3 coefficient equations overdetermine the three unknowns.  ``extract``
solves them by weighted least squares; the misfit doubles as a
normality diagnostic (the identity has an exact solution at normal n).

``sine_formula_check`` integrates sqrt(D/(A h)) around a closed contour
enclosing exactly two of the branch points, scales by sqrt(n(n+1)), and
compares against log(sin(pi a_i)/sin(pi a_j)) modulo 2*pi*i and an
overall sign.  The contour is built by ``stadium_cycle``: a constant
distance neighborhood of the segment between the two chosen points,
shrunk until every other root of A*h*D is exterior and the boundary
clears all roots.  ``equilibrium_period`` runs the same quadrature with
the limit integrand sqrt((z - center)/A), whose periods are purely
imaginary; it serves as a negative control for the branch tracking.
"""

from dataclasses import dataclass

from mpmath import mp

from .branching import BranchConfig
from .linalg import SingularMatrix, solve_dense
from .pade import PadeTriple
from .polys import ComplexPoly
from .precision import PrecisionPolicy, mpc_of
from .quadrature import Contour, integrate_with_error


class RankDeficient(RuntimeError):
    """The least-squares system for (z1, d1, d0) lost rank.

    Associated with near-non-normal indices, where the denominator
    degenerates and the coefficient equations become dependent.
    """


class CycleThroughSingularity(RuntimeError):
    """No admissible cycle: a root of A*h*D obstructs the contour."""


@dataclass(frozen=True)
class OdeExtraction:
    """Coefficient data of the ODE satisfied by one denominator.

    ``z1n`` is the zero of the linear cofactor h.  ``D_coeffs`` holds
    the monic quadratic ascending, (d0, d1, 1).  ``residual`` is the
    least-squares misfit in the maximum norm, normalized by the largest
    coefficient of the identity.  ``v1n`` is the root of D nearer the
    star center (it converges to the center), ``htilde_zero`` the other
    root (it shadows z1n).
    """

    n: int
    z1n: object
    D_coeffs: tuple
    residual: object
    v1n: object
    htilde_zero: object


def _shift_up(p: ComplexPoly) -> ComplexPoly:
    """Multiply by the monomial x."""
    return ComplexPoly((mp.mpc(0),) + tuple(p.coeffs))


def identity_system(Q: ComplexPoly, n: int, cfg: BranchConfig,
                    policy: PrecisionPolicy):
    """Coefficient equations of the ODE identity, linear in (z1, d1, d0).

    Returns (b, cols) with b the known part and cols the three columns,
    all padded to length n+3, such that the identity reads
    b + z1*cols[0] + d1*cols[1] + d0*cols[2] = 0 coefficientwise.
    """
    A = cfg.poly_A(policy)
    B = cfg.poly_B(policy)
    Qd = Q.derivative()
    Qdd = Qd.derivative()
    W = A.mul(Qdd).add(A.derivative().add(B).mul(Qd))
    nn1 = mp.mpf(n) * (n + 1)
    xQ = _shift_up(Q)
    b = _shift_up(W).add(A.mul(Qd).scale(-1)).add(_shift_up(xQ).scale(-nn1))
    cols = (W.scale(-1), xQ.scale(-nn1), Q.scale(-nn1))
    rows = n + 3

    def pad(p):
        cs = list(p.coeffs)
        return cs + [mp.mpc(0)] * (rows - len(cs))

    return pad(b), [pad(c) for c in cols]


def solve_identity(b, cols, policy: PrecisionPolicy):
    """Weighted least squares for the three ODE unknowns.

    Each coefficient equation is scaled by the inverse of its largest
    entry so that rows of wildly different magnitude contribute evenly.
    Returns (u, residual) with u = (z1, d1, d0) and the residual taken
    in the maximum norm over the unweighted equations, normalized by
    the largest coefficient present in the system.
    """
    rows = len(b)
    weights = []
    overall = mp.mpf(0)
    for k in range(rows):
        s = max(abs(b[k]), abs(cols[0][k]), abs(cols[1][k]), abs(cols[2][k]))
        overall = max(overall, s)
        weights.append(1 / s if s > 0 else mp.mpf(0))
    if overall == 0:
        raise RankDeficient("identity system is identically zero")
    gram = [[mp.mpc(0)] * 3 for _ in range(3)]
    rhs = [mp.mpc(0)] * 3
    for k in range(rows):
        w2 = weights[k] ** 2
        if w2 == 0:
            continue
        for i in range(3):
            ci = mp.conj(cols[i][k])
            rhs[i] -= ci * b[k] * w2
            for j in range(i, 3):
                gram[i][j] += ci * cols[j][k] * w2
    for i in range(3):
        for j in range(i):
            gram[i][j] = mp.conj(gram[j][i])
    try:
        u = solve_dense(gram, rhs, policy)
    except SingularMatrix as exc:
        raise RankDeficient(f"normal equations singular: {exc}") from exc
    resid = mp.mpf(0)
    for k in range(rows):
        r = b[k] + u[0] * cols[0][k] + u[1] * cols[1][k] + u[2] * cols[2][k]
        resid = max(resid, abs(r))
    return u, resid / overall


def extract(triple: PadeTriple, cfg: BranchConfig, policy: PrecisionPolicy,
            center=None) -> OdeExtraction:
    """Fit (h, D) to one denominator through the ODE coefficient identity.

    ``center`` (the star center) picks which root of D is reported as
    v1n.  Without it, the root farther from z1n is used: the other root
    shadows z1n, so the far one is the center-tracking root.
    """
    if not triple.normal:
        raise ValueError("ODE extraction needs a normal index")
    if triple.n < 2:
        raise ValueError("ODE extraction needs n >= 2")
    if cfg.degree != 3:
        raise ValueError("ODE extraction implemented for three points only")
    with policy.context(extra_digits=10):
        b, cols = identity_system(triple.Q, triple.n, cfg, policy)
        (z1, d1, d0), resid = solve_identity(b, cols, policy)
        disc = mp.sqrt(d1 * d1 - 4 * d0)
        root_a = (-d1 + disc) / 2
        root_b = (-d1 - disc) / 2
        if center is not None:
            c = mpc_of(center)
            near_first = abs(root_a - c) <= abs(root_b - c)
        else:
            near_first = abs(root_a - z1) >= abs(root_b - z1)
        v1n, htilde = (root_a, root_b) if near_first else (root_b, root_a)
        return OdeExtraction(n=triple.n, z1n=z1,
                             D_coeffs=(d0, d1, mp.mpc(1)),
                             residual=resid, v1n=v1n, htilde_zero=htilde)


def _segment_distance(p, a, b):
    """Distance from p to the segment [a, b]."""
    d = b - a
    L2 = (d.real ** 2 + d.imag ** 2)
    if L2 == 0:
        return abs(p - a)
    t = ((p - a).real * d.real + (p - a).imag * d.imag) / L2
    t = max(mp.mpf(0), min(mp.mpf(1), t))
    return abs(p - (a + t * d))


def stadium_cycle(cfg: BranchConfig, geom, policy: PrecisionPolicy,
                  pair=(0, 1), keep_out=()):
    """Closed contour enclosing exactly two branch points.

    The contour is the boundary of a constant-distance neighborhood of
    the segment between the chosen points.  The width starts from
    0.3 * diameter and shrinks until the remaining branch point and
    every point in ``keep_out`` are exterior with clearance
    0.05 * diameter.  Exteriority is not negotiable: a contour that
    swallows one of the avoided roots shifts the period by half of
    2*pi*i, which silently breaks the quantization being tested.
    Raises CycleThroughSingularity when no width survives; callers can
    then retry with a different pair of enclosed points.
    """
    pts = [mpc_of(p) for p in cfg.points]
    i, j = pair
    ai, aj = pts[i], pts[j]
    diam = geom.diameter()
    must_out = [pts[k] for k in range(len(pts)) if k not in (i, j)]
    must_out += [mpc_of(p) for p in keep_out]
    clear = mp.mpf("0.05") * diam
    prefer = mp.mpf("0.3") * diam
    room = min(_segment_distance(p, ai, aj) for p in must_out)
    floor = mp.mpf("0.02") * diam
    d = min(prefer, room - clear)
    if d < floor or d < clear:
        raise CycleThroughSingularity(
            "no stadium width separates the chosen pair from the "
            "remaining roots")
    u = (aj - ai) / abs(aj - ai)
    nrm = u * mp.mpc(0, 1)
    verts = []
    sides = 8
    caps = 16
    for k in range(sides):
        verts.append(ai + (aj - ai) * mp.mpf(k) / sides - d * nrm)
    for k in range(caps):
        th = -mp.pi / 2 + mp.pi * mp.mpf(k) / caps
        verts.append(aj + d * (u * mp.cos(th) + nrm * mp.sin(th)))
    for k in range(sides):
        verts.append(aj - (aj - ai) * mp.mpf(k) / sides + d * nrm)
    for k in range(caps):
        th = mp.pi / 2 + mp.pi * mp.mpf(k) / caps
        verts.append(ai + d * (u * mp.cos(th) + nrm * mp.sin(th)))
    verts.append(verts[0])
    return verts


def _tracked_loop_integral(verts, ratio, policy: PrecisionPolicy,
                           singular=(), guard=None):
    """Integrate a continuity-tracked square root around a closed polyline.

    ``ratio`` maps t to the square of the integrand.  The branch is fixed
    at the first vertex by the principal root and continued edge by edge;
    a sign mismatch after the full loop means an odd number of enclosed
    branch points, which is reported as CycleThroughSingularity.
    """
    refs = []
    prev = None
    for k in range(len(verts) - 1):
        for frac in (0, mp.mpf(1) / 4, mp.mpf(1) / 2, 3 * mp.mpf(1) / 4):
            t = verts[k] + (verts[k + 1] - verts[k]) * frac
            val = mp.sqrt(ratio(t))
            if prev is not None and abs(-val - prev) < abs(val - prev):
                val = -val
            refs.append((t, val))
            prev = val
    closing = mp.sqrt(ratio(verts[-1]))
    if abs(-closing - prev) < abs(closing - prev):
        closing = -closing
    start = refs[0][1]
    if abs(closing - start) > mp.mpf("0.5") * abs(start):
        raise CycleThroughSingularity(
            "integrand does not return to its branch after one loop; "
            "an enclosed root spoils the cycle")
    total = mp.mpc(0)
    err = mp.mpf(0)
    edge_refs = [refs[4 * k][1] for k in range(len(verts) - 1)]
    for k in range(len(verts) - 1):
        anchor = edge_refs[k]

        def f(t, anchor=anchor):
            if guard is not None and singular:
                dmin = min(abs(t - s) for s in singular)
                if dmin < guard:
                    raise CycleThroughSingularity(
                        "contour node within guard distance of a root")
            val = mp.sqrt(ratio(t))
            if abs(-val - anchor) < abs(val - anchor):
                val = -val
            return val

        v, e = integrate_with_error(
            f, Contour.line(verts[k], verts[k + 1]), policy)
        total += v
        err += e
    return total, err


@dataclass(frozen=True)
class SineCheck:
    """Result of the two-point period test.

    ``value`` is sqrt(n(n+1)) times the loop integral, ``target`` the
    log sine ratio for the chosen pair, ``deviation`` the distance of
    value to +-target modulo 2*pi*i, and ``lattice_m`` the integer
    multiple removed.
    """

    value: object
    target: object
    deviation: object
    sign: int
    lattice_m: int


def sine_formula_check(extraction: OdeExtraction, cfg: BranchConfig, geom,
                       policy: PrecisionPolicy, pair=(0, 1),
                       cycle=None) -> SineCheck:
    """Compare the scaled ODE period against the log sine ratio.

    Integrates sqrt(D/(A h)) around a cycle enclosing exactly the two
    branch points of ``pair``, scales by sqrt(n(n+1)), and reduces
    against log(sin(pi a_i)/sin(pi a_j)) modulo 2*pi*i and overall sign.
    """
    with policy.context(extra_digits=10):
        A = cfg.poly_A(policy)
        d0, d1, _ = extraction.D_coeffs
        z1 = extraction.z1n
        avoid = (z1, extraction.v1n, extraction.htilde_zero)
        verts = cycle or stadium_cycle(cfg, geom, policy, pair,
                                       keep_out=avoid)

        def ratio(t):
            return (t * t + d1 * t + d0) / (A(t) * (t - z1))

        singular = [mpc_of(p) for p in cfg.points] + list(avoid)
        guard = mp.mpf("1e-8") * geom.diameter()
        loop, _ = _tracked_loop_integral(verts, ratio, policy,
                                         singular=singular, guard=guard)
        n = extraction.n
        value = mp.sqrt(mp.mpf(n) * (n + 1)) * loop
        al = cfg.alphas_mpf()
        i, j = pair
        target = mp.log(mp.sin(mp.pi * al[i]) / mp.sin(mp.pi * al[j]))
        best = None
        for sgn in (1, -1):
            dv = sgn * value - target
            m = int(mp.nint(dv.imag / (2 * mp.pi)))
            dev = abs(dv - 2 * mp.pi * mp.mpc(0, 1) * m)
            if best is None or dev < best[0]:
                best = (dev, sgn, m)
        return SineCheck(value=value, target=target, deviation=best[0],
                         sign=best[1], lattice_m=best[2])


def sine_check_any_pair(extraction: OdeExtraction, cfg: BranchConfig, geom,
                        policy: PrecisionPolicy,
                        pairs=((0, 1), (0, 2), (1, 2))):
    """First pair of branch points admitting a clean period cycle.

    The extracted roots can sit arbitrarily close to the segment
    between one pair of branch points (they shadow the spurious zero),
    making that pair's stadium inadmissible.  Returns (pair, check)
    for the first pair that works; re-raises the last obstruction when
    none does.
    """
    last = None
    for pair in pairs:
        try:
            return pair, sine_formula_check(extraction, cfg, geom,
                                            policy, pair=pair)
        except CycleThroughSingularity as exc:
            last = exc
    raise last


def equilibrium_period(cfg: BranchConfig, geom, policy: PrecisionPolicy,
                       pair=(0, 1), cycle=None):
    """Loop integral of sqrt((t - center)/A) around a two-point cycle.

    The limit object of the ODE period has purely imaginary periods, so
    the real part of the returned value is a branch-tracking control.
    """
    with policy.context(extra_digits=10):
        A = cfg.poly_A(policy)
        v = geom.v
        verts = cycle or stadium_cycle(cfg, geom, policy, pair,
                                       keep_out=(v,))

        def ratio(t):
            return (t - v) / A(t)

        loop, _ = _tracked_loop_integral(verts, ratio, policy)
        return loop
