"""End-to-end experiment orchestration and report plumbing.

One ExperimentConfig drives the whole pipeline under a single precision
policy: branch data, star geometry, the elliptic frame, per-index
denominator solves with zero classification, the second-order-equation
diagnostics, and the strong-asymptotic predictions at probe points.
The result is a plain dataclass tree that serializes to JSON, plus CSV
emitters for the three plot-data kinds (zeros, arcs, error curve).

Every identity check lands in one table with its tolerance quoted from
DEFAULT_TOLERANCES, so a report is self-describing; any row over its
tolerance flips the run status to "attention" without suppressing the
rest of the report.  Reports carry no wall-clock data: two runs with
the same config and precision produce identical files.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import os
from dataclasses import dataclass, asdict, replace
from fractions import Fraction

import mpmath as mp

from .precision import PrecisionPolicy, default_digits, mpc_of
from .branching import BranchConfig
from .geometry import build_star
from .quadrature import QuadratureError
from . import pade, surface, ode

CONFIG_VERSION = 1

# One table for every tolerance a report quotes.  Keys are check-row
# names (or their common prefix for per-arc rows).
DEFAULT_TOLERANCES = {
    "mass_imag_max": 1e-12,
    "mass_sum_dev": 1e-12,
    "moment_sum_0": 1e-10,
    "moment_sum_1": 1e-10,
    "moment_sum_2": 1e-10,
    "tau_imag_negative": 0.0,
    "phi_product": 1e-8,
    "szego_product": 1e-8,
    "parametrix_jump": 1e-8,
    "parametrix_det": 1e-8,
    "boundary_pairing": 1e-6,
}


class ConfigError(ValueError):
    """The experiment configuration is malformed."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one run needs; validated before any computation.

    points/exponents describe the branch data (exponents as exact
    Fractions).  decimal_digits of None means default_digits(max n).
    spurious_eps is the absolute distance cutoff for calling a zero
    spurious; None means 0.05 * diameter.  workers > 1 fans the
    denominator solves out to worker processes once the shared
    geometry is built; everything else stays single-writer.
    """

    points: tuple
    exponents: tuple
    n_list: tuple
    probe_points: tuple = ()
    decimal_digits: int | None = None
    max_iter: int | None = None
    out_dir: str = "."
    spurious_eps: float | None = None
    n_remainder: int = 32
    samples_per_arc: int = 5
    workers: int = 1
    with_surface: bool = True
    with_ode: bool = True
    with_remainder: bool = True
    version: int = CONFIG_VERSION

    def branch_config(self) -> BranchConfig:
        return BranchConfig.make(self.points, self.exponents)

    def policy(self) -> PrecisionPolicy:
        digits = self.decimal_digits or default_digits(max(self.n_list))
        kw = {"decimal_digits": digits}
        if self.max_iter:
            kw["max_iter"] = self.max_iter
        return PrecisionPolicy(**kw)


def _coord(x):
    """One coordinate from a config file: number, or exact "p/q" text."""
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (int, float)):
        return x
    raise ConfigError(f"coordinate {x!r} is neither a number nor 'p/q'")


def _point(pair):
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise ConfigError(f"point {pair!r} is not an [re, im] pair")
    re, im = _coord(pair[0]), _coord(pair[1])
    if isinstance(re, Fraction) and isinstance(im, Fraction):
        return (re, im)
    return complex(float(re), float(im))


def config_from_mapping(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    version = doc.get("version")
    if version != CONFIG_VERSION:
        raise ConfigError(f"config version {version!r} unsupported "
                          f"(expected {CONFIG_VERSION})")
    try:
        points = tuple(_point(p) for p in doc["points"])
        exponents = tuple(Fraction(str(e)) for e in doc["exponents"])
        n_list = tuple(int(n) for n in doc["n_list"])
    except KeyError as exc:
        raise ConfigError(f"config is missing {exc}") from None
    if len(n_list) == 0 or any(n < 1 for n in n_list):
        raise ConfigError("n_list must hold positive indices")
    if len(set(n_list)) != len(n_list):
        raise ConfigError("n_list holds duplicates")
    probes = tuple(complex(float(_coord(p[0])), float(_coord(p[1])))
                   for p in doc.get("probe_points", ()))
    prec = doc.get("precision", {})
    pipe = doc.get("pipeline", {})
    cfg = ExperimentConfig(
        points=points,
        exponents=exponents,
        n_list=tuple(sorted(n_list)),
        probe_points=probes,
        decimal_digits=prec.get("decimal_digits"),
        max_iter=prec.get("max_iter"),
        out_dir=doc.get("output", {}).get("dir", "."),
        spurious_eps=doc.get("spurious_eps"),
        n_remainder=int(pipe.get("n_remainder", 32)),
        samples_per_arc=int(pipe.get("samples_per_arc", 5)),
        workers=int(pipe.get("workers", 1)),
        with_surface=bool(pipe.get("surface", True)),
        with_ode=bool(pipe.get("ode", True)),
        with_remainder=bool(pipe.get("remainder", True)),
    )
    # fail on anything the pipeline would reject hours later
    cfg.branch_config()
    cfg.policy()
    return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_mapping(json.load(fh))


def config_to_mapping(cfg: ExperimentConfig) -> dict:
    def coord(x):
        return str(x) if isinstance(x, Fraction) else float(x)

    def point(p):
        if isinstance(p, tuple):
            return [coord(p[0]), coord(p[1])]
        return [float(p.real), float(p.imag)]

    return {
        "version": cfg.version,
        "points": [point(p) for p in cfg.points],
        "exponents": [str(e) for e in cfg.exponents],
        "n_list": list(cfg.n_list),
        "probe_points": [[p.real, p.imag] for p in cfg.probe_points],
        "precision": {"decimal_digits": cfg.decimal_digits,
                      "max_iter": cfg.max_iter},
        "output": {"dir": cfg.out_dir},
        "spurious_eps": cfg.spurious_eps,
        "pipeline": {"n_remainder": cfg.n_remainder,
                     "samples_per_arc": cfg.samples_per_arc,
                     "workers": cfg.workers,
                     "surface": cfg.with_surface,
                     "ode": cfg.with_ode,
                     "remainder": cfg.with_remainder},
    }


# ---------------------------------------------------------------------------
# report types


@dataclass(frozen=True)
class CheckRow:
    name: str
    value: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class ProbeError:
    probe: tuple                 # (re, im)
    rel_err_Q: float | None
    rel_err_R: float | None
    note: str = ""


@dataclass(frozen=True)
class IndexRecord:
    n: int
    normal: bool
    pivot_ratio: float
    zeros: tuple                 # rows (re, im, label, dist)
    per_arc_counts: tuple
    pole: dict | None            # {"z": [re, im] | "infinity", "sheet": k}
    pathological: bool | None
    predicted_spurious: tuple | None
    observed_spurious: tuple
    probe_errors: tuple
    ode_residual: float | None
    v1n: tuple | None
    sine_pair: tuple | None
    sine_deviation: float | None
    errors: tuple = ()


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    tolerances: dict
    geometry: dict
    checks: tuple
    records: tuple
    remainder_sign: int | None
    stage_errors: dict
    status: str


def _c2(z):
    zz = mpc_of(z)
    return (float(mp.re(zz)), float(mp.im(zz)))


# ---------------------------------------------------------------------------
# pipeline stages


def _solve_task(args):
    """Worker-process entry: one denominator solve, no shared state."""
    cfg, n, policy, n_remainder = args
    return pade.frobenius_solve(cfg, n, policy, cache=None,
                                n_remainder=n_remainder)


def _solve_all(cfg, config, policy, cache):
    """Triples for every index, in n_list order."""
    if config.workers > 1:
        jobs = [(cfg, n, policy, config.n_remainder)
                for n in config.n_list]
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=config.workers) as pool:
            return dict(zip(config.n_list, pool.map(_solve_task, jobs)))
    out = {}
    for n in config.n_list:
        out[n] = pade.frobenius_solve(cfg, n, policy, cache=cache,
                                      n_remainder=config.n_remainder)
    return out


def _default_probes(geom):
    """Three deterministic far probes (distance well over half the
    diameter) for runs whose config names none."""
    with geom.policy.context():
        rad = mp.mpf("1.6") * geom.diameter()
        return tuple(complex(geom.v + rad * mp.exp(mp.mpc(0, th)))
                     for th in (mp.mpf("0.9"), mp.mpf("2.7"),
                                mp.mpf("4.5")))


def _geometry_summary(geom):
    with geom.policy.context():
        masses = geom.masses()
        return {
            "v": _c2(geom.v),
            "masses": [float(mp.re(m)) for m in masses],
            "capacity": float(geom.capacity()),
            "kappas": [_c2(k) for k in geom.kappas()],
            "diameter": float(geom.diameter()),
            "R_star": float(geom.R_star),
            "arc_rows": [list(r) for r in geom.arc_rows()],
        }


def _geometry_checks(geom):
    im_max, sum_dev = geom.mass_checks()
    return [
        CheckRow("mass_imag_max", im_max,
                 DEFAULT_TOLERANCES["mass_imag_max"],
                 im_max <= DEFAULT_TOLERANCES["mass_imag_max"]),
        CheckRow("mass_sum_dev", sum_dev,
                 DEFAULT_TOLERANCES["mass_sum_dev"],
                 sum_dev <= DEFAULT_TOLERANCES["mass_sum_dev"]),
    ]


def _period_checks(per):
    rows = []
    for k in range(3):
        name = f"moment_sum_{k}"
        val = per.checks[name]
        tol = DEFAULT_TOLERANCES[name]
        rows.append(CheckRow(name, val, tol, val <= tol))
    im_tau = float(mp.im(per.tau))
    rows.append(CheckRow("tau_imag_negative", im_tau, 0.0, im_tau < 0.0))
    return rows


def _bundle_checks(frame, bundle, samples_per_arc):
    rows = []
    sz = surface.szego_product_report(frame, bundle,
                                      samples_per_arc=samples_per_arc)
    for j in range(3):
        tol = DEFAULT_TOLERANCES["phi_product"]
        rows.append(CheckRow(f"phi_product_arc_{j}", sz["phi"][j], tol,
                             sz["phi"][j] <= tol))
    for j in range(3):
        tol = DEFAULT_TOLERANCES["szego_product"]
        rows.append(CheckRow(f"szego_product_arc_{j}", sz["F"][j], tol,
                             sz["F"][j] <= tol))
    par = surface.parametrix_jump_report(frame, bundle,
                                         samples_per_arc=samples_per_arc)
    for j in range(3):
        tol = DEFAULT_TOLERANCES["parametrix_jump"]
        rows.append(CheckRow(f"parametrix_jump_arc_{j}", par["jump"][j],
                             tol, par["jump"][j] <= tol))
    tol = DEFAULT_TOLERANCES["parametrix_det"]
    rows.append(CheckRow("parametrix_det", par["det"], tol,
                         par["det"] <= tol))
    pair = surface.nuttall_boundary_check(frame, bundle,
                                          samples_per_arc=samples_per_arc)
    for j in range(3):
        tol = DEFAULT_TOLERANCES["boundary_pairing"]
        rows.append(CheckRow(f"boundary_pairing_arc_{j}",
                             pair["per_arc"][j], tol,
                             pair["per_arc"][j] <= tol))
    return rows


def _eval_R(triple, cfg, geom, z, policy, want_quadrature):
    """Remainder data value at z: tail series first, quadrature fallback."""
    try:
        val, _bound = pade.eval_remainder_series(triple, z)
        return val, ""
    except ValueError:
        pass
    if not want_quadrature:
        return None, "remainder series not decaying at this probe"
    try:
        return pade.eval_remainder(triple, cfg, geom, z, policy), ""
    except (QuadratureError, pade.OnCut) as exc:
        return None, f"remainder quadrature failed: {exc}"


def run(config: ExperimentConfig) -> ExperimentReport:
    """The whole pipeline; deterministic for a fixed config."""
    stage_errors = {}
    checks = []
    cfg = config.branch_config()
    policy = config.policy()

    geom = build_star(cfg, policy)
    geometry = _geometry_summary(geom)
    checks.extend(_geometry_checks(geom))
    probes = config.probe_points or _default_probes(geom)
    with policy.context():
        eps = (config.spurious_eps if config.spurious_eps is not None
               else float(mp.mpf("0.05") * geom.diameter()))

    frame = None
    bundles = {}
    if config.with_surface:
        try:
            frame = surface.build_surface(geom, policy)
            checks.extend(_period_checks(frame.periods(policy)))
        except Exception as exc:
            stage_errors["surface"] = f"{type(exc).__name__}: {exc}"
            frame = None
        if frame is not None:
            for n in config.n_list:
                try:
                    bundles[n] = surface.build_bundle(
                        frame, n, policy, allow_pathological=True)
                except Exception as exc:
                    stage_errors[f"bundle_{n}"] = \
                        f"{type(exc).__name__}: {exc}"
            ref = None
            for n in reversed(config.n_list):
                b = bundles.get(n)
                if b is not None and b.parametrix is not None:
                    ref = b
                    break
            if ref is not None:
                try:
                    checks.extend(_bundle_checks(
                        frame, ref, config.samples_per_arc))
                except Exception as exc:
                    stage_errors["identity_table"] = \
                        f"{type(exc).__name__}: {exc}"
            else:
                stage_errors["identity_table"] = \
                    "no index in n_list admits an outer model"

    cache = pade.CoefficientCache(cfg, policy)
    try:
        triples = _solve_all(cfg, config, policy, cache)
    except Exception as exc:
        stage_errors["pade"] = f"{type(exc).__name__}: {exc}"
        triples = {}

    records = []
    raw_R = {}           # (n, probe index) -> complex ratio data/model
    root_seed = None
    for n in config.n_list:
        errors = []
        triple = triples.get(n)
        if triple is None:
            records.append(IndexRecord(
                n=n, normal=False, pivot_ratio=float("nan"), zeros=(),
                per_arc_counts=(0, 0, 0), pole=None, pathological=None,
                predicted_spurious=None, observed_spurious=(),
                probe_errors=(), ode_residual=None, v1n=None,
                sine_pair=None, sine_deviation=None,
                errors=("no denominator solve",)))
            continue

        zrep = pade.classify_zeros(triple, geom, policy, eps=eps,
                                   root_seed=root_seed)
        root_seed = [e[0] for e in zrep.entries]
        zero_rows = tuple(
            (float(mp.re(z)), float(mp.im(z)),
             ("SPURIOUS" if lab == pade.SPURIOUS else int(lab)),
             float(dist))
            for z, dist, lab in zrep.entries)
        observed = tuple(_c2(z) for z, _, lab in zrep.entries
                         if lab == pade.SPURIOUS)

        pole = None
        pathological = None
        predicted = None
        bundle = bundles.get(n)
        if bundle is not None:
            inv = bundle.inversion
            pathological = inv.pathological
            pole = {"z": ("infinity" if inv.z_n.is_infinite
                          else list(_c2(inv.z_n.z))),
                    "sheet": inv.z_n.sheet}
            if bundle.parametrix is not None and \
                    bundle.parametrix.predicted_spurious is not None:
                predicted = _c2(bundle.parametrix.predicted_spurious)

        probe_errs = []
        if frame is not None and bundle is not None \
                and bundle.parametrix is not None:
            for ip, p in enumerate(probes):
                note = ""
                rel_q = None
                try:
                    with policy.context(extra_digits=10):
                        chi, rr = surface.predict(frame, bundle, p)
                        rel_q = float(abs(triple.Q(mpc_of(p)) / chi - 1))
                        if config.with_remainder:
                            rv, rnote = _eval_R(triple, cfg, geom, p,
                                                policy, n <= 24)
                            note = rnote
                            if rv is not None:
                                raw_R[(n, ip)] = complex(rv / rr)
                except Exception as exc:
                    note = f"{type(exc).__name__}: {exc}"
                probe_errs.append([p, rel_q, note])
        elif frame is not None:
            errors.append("no outer model for this index")

        ode_residual = None
        v1n = None
        sine_pair = None
        sine_dev = None
        if config.with_ode and triple.normal and n >= 2:
            try:
                ext = ode.extract(triple, cfg, policy, center=geom.v)
                ode_residual = float(ext.residual)
                v1n = _c2(ext.v1n)
                pair, sc = ode.sine_check_any_pair(ext, cfg, geom, policy)
                sine_pair = pair
                sine_dev = float(sc.deviation)
            except (ode.RankDeficient,
                    ode.CycleThroughSingularity) as exc:
                errors.append(f"ode stage: {exc}")

        records.append(IndexRecord(
            n=n, normal=triple.normal, pivot_ratio=triple.pivot_ratio,
            zeros=zero_rows, per_arc_counts=tuple(zrep.per_arc_counts()),
            pole=pole, pathological=pathological,
            predicted_spurious=predicted, observed_spurious=observed,
            probe_errors=tuple(map(tuple, probe_errs)),
            ode_residual=ode_residual, v1n=v1n, sine_pair=sine_pair,
            sine_deviation=sine_dev, errors=tuple(errors)))

    # one-point sign calibration for the remainder comparison: the
    # asymptotic model fixes R only up to a global sign, so the first
    # available ratio votes once for the whole report
    remainder_sign = None
    if raw_R:
        first = raw_R[min(raw_R)]
        remainder_sign = 1 if abs(first - 1) <= abs(first + 1) else -1

    final_records = []
    for rec in records:
        rows = []
        for ip, pr in enumerate(rec.probe_errors):
            p, rel_q, note = pr
            ratio = raw_R.get((rec.n, ip))
            rel_r = (None if ratio is None
                     else float(abs(remainder_sign * ratio - 1)))
            rows.append(ProbeError(_c2(p), rel_q, rel_r, note))
        final_records.append(replace(rec, probe_errors=tuple(rows)))

    failed = [c.name for c in checks if not c.passed]
    status = "ok" if not failed and not stage_errors else "attention"
    return ExperimentReport(
        config=config_to_mapping(config),
        tolerances=dict(DEFAULT_TOLERANCES),
        geometry=geometry,
        checks=tuple(checks),
        records=tuple(final_records),
        remainder_sign=remainder_sign,
        stage_errors=stage_errors,
        status=status,
    )


# ---------------------------------------------------------------------------
# serialization


def report_to_dict(report: ExperimentReport) -> dict:
    return asdict(report)


def write_report(report: ExperimentReport, path: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")


def emit_plot_data(report: ExperimentReport, kind: str, path: str):
    """One CSV artifact: zeros, arcs, or error_curve."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if kind == "zeros":
        header = ("n", "re", "im", "arc_or_spurious", "dist_to_gamma")
        rows = [(rec.n, z[0], z[1], z[2], z[3])
                for rec in report.records for z in rec.zeros]
    elif kind == "arcs":
        header = ("arc_id", "s", "re", "im")
        rows = report.geometry["arc_rows"]
    elif kind == "error_curve":
        header = ("n", "probe_re", "probe_im", "rel_err_Q", "rel_err_R",
                  "ode_residual", "sine_deviation")
        rows = []
        for rec in report.records:
            for pe in rec.probe_errors:
                rows.append((rec.n, pe.probe[0], pe.probe[1],
                             pe.rel_err_Q, pe.rel_err_R,
                             rec.ode_residual, rec.sine_deviation))
    else:
        raise ValueError(f"unknown plot-data kind {kind!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path
