"""Command-line entry point: ``parsym {solve,certify,sweep,harnack,constants}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import constants as K
from .errors import InputError, NumericalError
from .experiments import (
    OUTPUT_ENV,
    ExperimentConfig,
    certify_figure,
    fit_loglog,
    load_config,
    parse_domain,
    run_certify,
    run_sweep,
    sweep_figure,
    write_report,
    write_sweep_csv,
    write_timing_csv,
)
from .geometry import Disk, Polygon, domain_from_dict, minkowski_sum_ball
from .grid import write_field_csv
from .harnack import build_chain, positive_harmonic_suite
from .solver import solve_semilinear, solve_torsion
from .svg import Figure, circle
from .traces import sample_boundary, trace_values

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
log = logging.getLogger("parsym")


def _kv(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {k!r} needs a number, got {v!r}") from None


def _values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    p.add_argument("--domain", help="domain as a JSON file path or an inline JSON object")
    p.add_argument("--R", type=float, help="ball radius of the outer domain G + B_R")
    p.add_argument("--problem", help="torsion, constant, affine, exponential or power")
    p.add_argument("--param", action="append", type=_kv, metavar="KEY=VALUE", help="nonlinearity parameter")
    p.add_argument("--h", type=float, help="grid spacing")
    p.add_argument("--n", type=int, help="number of trace samples on the inner boundary")
    p.add_argument("--mode", choices=["empirical", "formula"], help="constants that decide the exit status")
    p.add_argument("--C-dprime", dest="C_dprime", type=float, help="projection-stretch constant for the closed form")
    p.add_argument("--d0", type=float, help="claimed lower bound for -du/dnu (semilinear)")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="output directory")
    p.add_argument("--jobs", type=int, help="parallel sweep workers")


def _config(args) -> ExperimentConfig:
    over = {k: getattr(args, k, None) for k in ("domain", "R", "h", "n", "mode", "C_dprime", "d0", "seed", "output", "jobs")}
    if getattr(args, "problem", None) is not None:
        over["problem"] = {"name": args.problem, "params": dict(args.param or [])}
    if getattr(args, "sweep_param", None) is not None or getattr(args, "sweep_values", None) is not None:
        if args.sweep_param is None or args.sweep_values is None:
            raise InputError("--sweep-param and --sweep-values go together")
        over["sweep"] = {"parameter": args.sweep_param, "values": args.sweep_values}
    return load_config(args.config, over)


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    cfg = _config(args)
    out = _outdir(cfg.output)
    G = cfg.G()
    omega = minkowski_sum_ball(G, cfg.R)
    h = cfg.h or omega.diameter / 256.0
    prob = cfg.make_problem()
    if prob == "torsion":
        u, stats = solve_torsion(omega, h)
    else:
        u, stats = solve_semilinear(omega, prob, h)
    write_field_csv(u, out / "field.csv")
    trace_values(u, sample_boundary(G, cfg.n)).to_csv(out / "trace.csv")
    summary = {
        "h": stats.h,
        "n_unknowns": stats.n_unknowns,
        "iterations": stats.iterations,
        "residual": stats.residual,
        "method": stats.method,
        "u_max": float(u.values.max()),
    }
    (out / "solve.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_certify(args) -> int:
    cfg = _config(args)
    out = _outdir(cfg.output)
    rep = run_certify(cfg)
    write_report(rep, out)
    certify_figure(cfg.G(), rep).save(out / "certify.svg")
    ok = rep.passes[f"certificate_{cfg.mode}"]
    print(f"center O        {rep.center[0]:.6g} {rep.center[1]:.6g}")
    print(f"r_i, r_e        {rep.r_i:.6g} {rep.r_e:.6g}")
    print(f"gap             {rep.gap:.6g}")
    print(f"[u] on dG       {rep.seminorm:.6g}")
    print(f"ratio (emp.)    {rep.certificate_ratio:.6g}")
    print(f"log10 ratio (formula) {rep.log10_certificate_ratio_formula:.3f}")
    for k, v in rep.passes.items():
        print(f"{k:32s} {'pass' if v else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if cfg.sweep is None:
        raise InputError("a sweep needs config.sweep or --sweep-param/--sweep-values")
    out = _outdir(cfg.output)
    rows = run_sweep(cfg)
    write_sweep_csv(rows, out / "sweep.csv")
    write_timing_csv(rows, out / "timing.csv")
    fit = None
    if len(rows) >= 3:
        fit = fit_loglog(rows, "seminorm", "gap")
        slope, intercept, r2 = fit
        (out / "fit.json").write_text(
            json.dumps({"x": "seminorm", "y": "gap", "slope": slope, "intercept": intercept, "r2": r2}, indent=2) + "\n"
        )
        print(f"log-log slope {slope:.4f}  r2 {r2:.4f}")
    sweep_figure(rows, fit).save(out / "sweep.svg")
    key = f"certificate_{cfg.mode}"
    ok = all(getattr(r, key) for r in rows)
    for r in rows:
        print(f"{r.value:<10.6g} [u]={r.seminorm:.5g} gap={r.gap:.5g} ratio={r.certificate_ratio:.4g} {'pass' if getattr(r, key) else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_harnack(args) -> int:
    out = _outdir(args.output or _env_output() or "out")
    suite = positive_harmonic_suite(args.cases, args.seed, args.h)
    chains = {
        "disk": build_chain(None, Disk((0.0, 0.0), 2.0), 1.0, (0.8, 0.0), (-0.8, 0.0)),
        "upper_half_disk": build_chain(
            None, Disk((0.0, 0.0), 2.0), 1.0, (0.8, 0.6), (-0.8, 0.6), halfplane=((0.0, 1.0), 0.0)
        ),
        "u_shape": build_chain(
            None, Polygon([(0, 0), (6, 0), (6, 6), (0, 6), (0, 4), (4, 4), (4, 2), (0, 2)]), 1.0, (1, 1), (1, 5)
        ),
    }
    audits = {k: c.audit() for k, c in chains.items()}
    print(f"{'check':28s} result")
    print(f"{'positive harmonic suite':28s} {suite.n_passed}/{suite.n_cases} {'pass' if suite.passed else 'FAIL'}")
    for k, a in audits.items():
        print(f"{'chain ' + k:28s} n={a['n']} bound={a['bound']:.4g} {'pass' if a['ok'] else 'FAIL'}")
    doc = {
        "suite": {
            "cases": suite.n_cases,
            "passed": suite.n_passed,
            "ratio_min": suite.ratio_min,
            "ratio_max": suite.ratio_max,
            "failures": suite.failures,
        },
        "chains": audits,
    }
    (out / "harnack.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for k, c in chains.items():
        fig = Figure(title=f"Harnack chain ({k}), n={c.n}")
        pts, _ = c.D2.boundary(1024)
        fig.add("host domain", [pts], closed=True, width=2.0)
        fig.add("grid path", [c.path])
        fig.add("balls R/4", [circle(p, c.radius, 96) for p in c.centers], closed=True)
        fig.add("centers", [c.centers], markers=True)
        fig.save(out / f"chain_{k}.svg")
    ok = suite.passed and all(a["ok"] for a in audits.values())
    return EXIT_OK if ok else EXIT_FAIL


def cmd_constants(args) -> int:
    diamG, rho = args.diamG, args.rho
    if args.domain:
        G = domain_from_dict(parse_domain(args.domain, None))
        diamG = diamG if diamG is not None else G.diameter
        rho = rho if rho is not None else G.rho
    diamG = 2.0 if diamG is None else diamG
    rho = 1.0 if rho is None else rho
    b = K.assemble(
        N=args.N,
        R=args.R,
        diamG=diamG,
        rho=rho,
        K=args.K,
        C_sup=args.C_sup,
        C_dprime=args.C_dprime,
        K_mode="empirical",
        L=args.L,
    )
    rows = b.rows()
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v}")
    doc = json.dumps(b.to_dict(), indent=2, sort_keys=True)
    print(doc)
    out = args.output or _env_output()
    if out:
        (_outdir(out) / "constants.json").write_text(doc + "\n")
    return EXIT_OK


def _env_output():
    return os.environ.get(OUTPUT_ENV)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parsym", description="Quantitative moving-planes laboratory.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve on G + B_R and dump the field and the inner trace")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="full stability report for one configuration")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="certify over a family of configurations")
    _add_experiment_flags(p)
    p.add_argument("--sweep-param", help="dotted config path, e.g. domain.params.cos.3")
    p.add_argument("--sweep-values", type=_values, help="comma-separated, strictly increasing")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("harnack", help="randomized Harnack suite and chain audits")
    p.add_argument("--cases", type=int, default=1000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--h", type=float, default=1.0 / 64)
    p.add_argument("--output")
    p.set_defaults(func=cmd_harnack)

    p = sub.add_parser("constants", help="print the constants bundle")
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--R", type=float, default=0.5)
    p.add_argument("--diamG", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--domain", help="take diameter and rho from this domain")
    p.add_argument("--K", type=float, default=0.25, help="lower-bound constant (no closed form exists)")
    p.add_argument("--C-sup", dest="C_sup", type=float, help="measured sup w / [u]; omit for the closed form")
    p.add_argument("--C-dprime", dest="C_dprime", type=float, default=K.DEFAULT_C_DPRIME)
    p.add_argument("--L", type=float, help="Lipschitz constant of f for the semilinear base")
    p.add_argument("--output")
    p.set_defaults(func=cmd_constants)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
