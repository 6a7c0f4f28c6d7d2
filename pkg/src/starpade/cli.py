"""Command-line front end.

Subcommands cover the pipeline at increasing depth: `geometry` traces
the star and exports its arcs, `pade` sweeps denominators and exports
classified zeros, `predict` evaluates the strong-asymptotic models at
the probe points, `compare` runs the full pipeline into a report,
`figure1` is `compare` on the built-in two-index showcase config, and
`sweep` is `compare` trimmed to the error-vs-n curve.  Shared flags:
--config PATH, --digits N, --out DIR, --format csv|json.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from fractions import Fraction

import mpmath as mp

from .precision import mpc_of
from .geometry import build_star
from . import surface, harness


def _figure1_config() -> harness.ExperimentConfig:
    """The two-index showcase: one index shows a spurious zero off the
    arcs, its neighbor shows a distortion instead."""
    return harness.ExperimentConfig(
        points=((Fraction(-6, 5), Fraction(0)),
                (Fraction(7, 10), Fraction(7, 4)),
                (Fraction(1), Fraction(4, 5))),
        exponents=(Fraction(-3, 7), Fraction(1, 7), Fraction(2, 7)),
        n_list=(71, 72),
    )


def _load(args, need_config=True):
    if args.config:
        cfg = harness.load_config(args.config)
    elif need_config:
        raise SystemExit("this subcommand needs --config PATH")
    else:
        cfg = _figure1_config()
    if args.digits:
        cfg = replace(cfg, decimal_digits=args.digits)
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def _path(cfg, name):
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, name)


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _cmd_geometry(args):
    cfg = _load(args)
    geom = build_star(cfg.branch_config(), cfg.policy())
    summary = harness._geometry_summary(geom)
    if args.format == "json":
        out = _path(cfg, "geometry.json")
        _write_json(out, summary)
    else:
        out = _path(cfg, "arcs.csv")
        _write_csv(out, ("arc_id", "s", "re", "im"), summary["arc_rows"])
    print(f"v = {summary['v'][0]:.12g} + {summary['v'][1]:.12g}i, "
          f"capacity = {summary['capacity']:.12g}, "
          f"masses = {[round(m, 12) for m in summary['masses']]}")
    print(out)
    return 0


def _cmd_pade(args):
    cfg = replace(_load(args), with_surface=False, with_ode=False,
                  with_remainder=False)
    report = harness.run(cfg)
    if args.format == "json":
        out = _path(cfg, "report.json")
        harness.write_report(report, out)
    else:
        out = harness.emit_plot_data(report, "zeros",
                                     _path(cfg, "zeros.csv"))
    for rec in report.records:
        print(f"n={rec.n} normal={rec.normal} "
              f"per_arc={list(rec.per_arc_counts)} "
              f"spurious={len(rec.observed_spurious)}")
    print(out)
    return 0 if report.status == "ok" else 1


def _cmd_predict(args):
    cfg = _load(args)
    bcfg = cfg.branch_config()
    policy = cfg.policy()
    geom = build_star(bcfg, policy)
    frame = surface.build_surface(geom, policy)
    probes = cfg.probe_points or harness._default_probes(geom)
    rows = []
    for n in cfg.n_list:
        bundle = surface.build_bundle(frame, n, policy,
                                      allow_pathological=True)
        inv = bundle.inversion
        pole = "infinity" if inv.z_n.is_infinite else \
            mp.nstr(mpc_of(inv.z_n.z), 12)
        print(f"n={n} pole on sheet {inv.z_n.sheet} at {pole}"
              f"{' (pathological)' if inv.pathological else ''}")
        if bundle.parametrix is None:
            continue
        with policy.context(extra_digits=10):
            for p in probes:
                chi, rr = surface.predict(frame, bundle, p)
                rows.append((n, p.real, p.imag,
                             float(mp.re(chi)), float(mp.im(chi)),
                             float(mp.re(rr)), float(mp.im(rr))))
    header = ("n", "probe_re", "probe_im", "chi_re", "chi_im",
              "r_re", "r_im")
    if args.format == "json":
        out = _path(cfg, "predictions.json")
        _write_json(out, [dict(zip(header, r)) for r in rows])
    else:
        out = _path(cfg, "predictions.csv")
        _write_csv(out, header, rows)
    print(out)
    return 0


def _run_full(cfg, args, kinds):
    report = harness.run(cfg)
    outs = [_path(cfg, "report.json")]
    harness.write_report(report, outs[0])
    if args.format != "json":
        for kind in kinds:
            outs.append(harness.emit_plot_data(
                report, kind, _path(cfg, f"{kind}.csv")))
    print(f"status: {report.status}")
    for c in report.checks:
        if not c.passed:
            print(f"  FAILED {c.name}: {c.value:.3e} > {c.tolerance:.1e}")
    for stage, msg in report.stage_errors.items():
        print(f"  ERROR {stage}: {msg}")
    for o in outs:
        print(o)
    return 0 if report.status == "ok" else 1


def _cmd_compare(args):
    return _run_full(_load(args), args,
                     ("zeros", "arcs", "error_curve"))


def _cmd_figure1(args):
    return _run_full(_load(args, need_config=False), args,
                     ("zeros", "arcs", "error_curve"))


def _cmd_sweep(args):
    return _run_full(_load(args), args, ("error_curve",))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="starpade",
        description="Pade approximants to three-branch-point algebraic "
                    "functions: minimal-capacity geometry, strong "
                    "asymptotics, and spurious-zero prediction.")
    sub = ap.add_subparsers(dest="command", required=True)
    cmds = {
        "geometry": (_cmd_geometry, "solve the star and export arcs"),
        "pade": (_cmd_pade, "sweep denominators and export zeros"),
        "predict": (_cmd_predict,
                    "surface bundle and model values at probes"),
        "compare": (_cmd_compare, "full pipeline report"),
        "figure1": (_cmd_figure1,
                    "full report for the built-in showcase config"),
        "sweep": (_cmd_sweep, "error-versus-n study"),
    }
    for name, (fn, help_text) in cmds.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--digits", type=int,
                       help="override working decimal digits")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"),
                       default="csv", help="artifact format")
        p.set_defaults(fn=fn)
    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
