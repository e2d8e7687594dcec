"""Experiment configuration, parameter sweeps, log-log fits and artifact writers."""

from __future__ import annotations

import copy
import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import DegenerateFit, InputError
from .geometry import Domain, domain_from_dict, load_domain, minkowski_sum_ball
from .moving_planes import StabilityReport, certify
from .solver import SemilinearProblem, make_problem
from .svg import Figure, circle, line_in_box

OUTPUT_ENV = "PARSYM_OUTPUT_DIR"

SWEEP_COLUMNS = (
    "value",
    "seminorm",
    "gap",
    "certificate_ratio",
    "log10_certificate_ratio_formula",
    "sup_wm",
    "K",
    "C_star",
    "eps_threshold",
    "hypothesis_ok",
    "certificate_empirical",
    "certificate_formula",
)


@dataclass
class ExperimentConfig:
    domain: dict = field(default_factory=lambda: {"kind": "disk", "params": {"center": [0.0, 0.0], "radius": 1.0}})
    R: float = 0.5
    problem: dict = field(default_factory=lambda: {"name": "torsion"})
    h: float | None = None
    n: int = 4096
    mode: str = "empirical"
    C_dprime: float = 2.0
    d0: float | None = None
    sweep: dict | None = None
    seed: int = 42
    output: str = "out"
    jobs: int = 1

    def validate(self) -> "ExperimentConfig":
        self.G()  # parses the domain
        if not (isinstance(self.R, (int, float)) and self.R > 0):
            raise InputError(f"config.R: must be a positive number, got {self.R!r}")
        if self.h is not None and not (isinstance(self.h, (int, float)) and self.h > 0):
            raise InputError(f"config.h: must be a positive number, got {self.h!r}")
        if not (isinstance(self.n, int) and self.n >= 16):
            raise InputError(f"config.n: must be an integer >= 16, got {self.n!r}")
        if self.mode not in ("empirical", "formula"):
            raise InputError(f"config.mode: expected 'empirical' or 'formula', got {self.mode!r}")
        if not (isinstance(self.jobs, int) and self.jobs >= 1):
            raise InputError(f"config.jobs: must be a positive integer, got {self.jobs!r}")
        if not isinstance(self.seed, int):
            raise InputError(f"config.seed: must be an integer, got {self.seed!r}")
        self.make_problem()
        if self.sweep is not None:
            if not isinstance(self.sweep, dict) or set(self.sweep) != {"parameter", "values"}:
                raise InputError("config.sweep: expected an object with exactly 'parameter' and 'values'")
            vals = self.sweep["values"]
            if not isinstance(vals, list) or len(vals) == 0 or not all(isinstance(v, (int, float)) for v in vals):
                raise InputError("config.sweep.values: expected a nonempty list of numbers")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise InputError("config.sweep.values: values must be strictly increasing")
            set_dotted(self.to_dict(), self.sweep["parameter"], vals[0])
        return self

    def G(self) -> Domain:
        return domain_from_dict(self.domain, "config.domain")

    def make_problem(self) -> str | SemilinearProblem:
        p = self.problem
        if not isinstance(p, dict) or "name" not in p or set(p) - {"name", "params"}:
            raise InputError("config.problem: expected {'name': ..., 'params': {...}}")
        if p["name"] == "torsion":
            return "torsion"
        prob = make_problem(p["name"], **p.get("params", {}))
        if self.d0 is not None:
            prob.d0 = self.d0
        return prob

    def to_dict(self) -> dict:
        return {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}


def parse_domain(value, base: Path | None) -> dict:
    """A domain given as an object, a JSON string, or a path to a JSON file."""
    if isinstance(value, dict):
        return value
    if isinstance(value, str):
        s = value.strip()
        if s.startswith("{"):
            try:
                return json.loads(s)
            except json.JSONDecodeError as exc:
                raise InputError(f"domain: {exc.msg} at column {exc.colno}") from None
        path = Path(s)
        if base is not None and not path.is_absolute():
            path = base / path
        if not path.exists():
            raise InputError(f"domain file {path} does not exist")
        return load_domain(path).to_dict()
    raise InputError("domain: expected an object, inline JSON or a file path")


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the config file, then the output-dir environment variable, then ``overrides``."""
    data = ExperimentConfig().to_dict()
    base = None
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise InputError(f"config file {path} does not exist")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise InputError(f"{path}: top level must be an object")
        unknown = set(doc) - set(data)
        if unknown:
            raise InputError(f"{path}: unknown field(s) {sorted(unknown)}")
        data.update(doc)
        base = path.parent
    if os.environ.get(OUTPUT_ENV):
        data["output"] = os.environ[OUTPUT_ENV]
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    data["domain"] = parse_domain(data["domain"], base)
    return ExperimentConfig(**data).validate()


def set_dotted(doc: dict, dotted: str, value) -> dict:
    """Assign ``value`` at a dotted path such as ``domain.params.cos.3``; only the leaf may be new."""
    keys = dotted.split(".")
    node = doc
    for i, k in enumerate(keys[:-1]):
        where = ".".join(keys[: i + 1])
        if isinstance(node, list):
            if not k.isdigit() or int(k) >= len(node):
                raise InputError(f"sweep parameter {dotted!r}: bad list index at {where!r}")
            node = node[int(k)]
        elif isinstance(node, dict) and k in node:
            node = node[k]
        else:
            raise InputError(f"sweep parameter {dotted!r}: no field {where!r}")
    leaf = keys[-1]
    if isinstance(node, list):
        if not leaf.isdigit() or int(leaf) >= len(node):
            raise InputError(f"sweep parameter {dotted!r}: bad list index {leaf!r}")
        node[int(leaf)] = value
    elif isinstance(node, dict):
        node[leaf] = value
    else:
        raise InputError(f"sweep parameter {dotted!r}: cannot set a field on a scalar")
    return doc


def run_certify(cfg: ExperimentConfig) -> StabilityReport:
    return certify(
        cfg.G(),
        cfg.R,
        cfg.make_problem(),
        cfg.h,
        n_trace=cfg.n,
        C_dprime=cfg.C_dprime,
        d0=cfg.d0,
        seed=cfg.seed,
    )


@dataclass(frozen=True)
class SweepRow:
    value: float
    seminorm: float
    gap: float
    certificate_ratio: float
    log10_certificate_ratio_formula: float
    sup_wm: float
    K: float
    C_star: float
    eps_threshold: float
    hypothesis_ok: bool
    certificate_empirical: bool
    certificate_formula: bool
    runtime: float = 0.0  # kept out of the CSV so that it stays bit-identical

    def cells(self) -> list[str]:
        out = []
        for c in SWEEP_COLUMNS:
            v = getattr(self, c)
            out.append(str(int(v)) if isinstance(v, bool) else f"{v:.12g}")
        return out


def row_from_report(value: float, rep: StabilityReport, runtime: float) -> SweepRow:
    return SweepRow(
        value=float(value),
        seminorm=rep.seminorm,
        gap=rep.gap,
        certificate_ratio=rep.certificate_ratio,
        log10_certificate_ratio_formula=rep.log10_certificate_ratio_formula,
        sup_wm=max(d.sup_w for d in rep.directions[:2]),
        K=rep.empirical.K,
        C_star=rep.empirical.C_star,
        eps_threshold=rep.empirical.eps_threshold,
        hypothesis_ok=rep.passes["smallness_hypothesis_empirical"],
        certificate_empirical=rep.passes["certificate_empirical"],
        certificate_formula=rep.passes["certificate_formula"],
        runtime=runtime,
    )


def _sweep_point(cfg_dict: dict, value: float) -> SweepRow:
    d = copy.deepcopy(cfg_dict)
    param = d["sweep"]["parameter"]
    d["sweep"] = None
    set_dotted(d, param, value)
    cfg = ExperimentConfig(**d).validate()
    t0 = time.perf_counter()
    rep = run_certify(cfg)
    return row_from_report(value, rep, time.perf_counter() - t0)


def run_sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    """One row per sweep value; rows come back ordered by value whatever the completion order."""
    if cfg.sweep is None:
        raise InputError("config.sweep is required for a sweep run")
    values = list(cfg.sweep["values"])
    base = cfg.to_dict()
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as ex:
            rows = list(ex.map(_sweep_point, [base] * len(values), values))
    else:
        rows = [_sweep_point(base, v) for v in values]
    return sorted(rows, key=lambda r: r.value)


def fit_loglog(rows, x: str, y: str) -> tuple[float, float, float]:
    """Least-squares line through ``(log x, log y)``: returns ``(slope, intercept, r2)``."""
    rows = list(rows)
    if len(rows) < 3:
        raise DegenerateFit("at least 3 rows are needed for a fit")
    get = (lambda r, k: r[k]) if isinstance(rows[0], dict) else getattr
    xs = np.array([float(get(r, x)) for r in rows])
    ys = np.array([float(get(r, y)) for r in rows])
    if np.any(xs <= 0) or np.any(ys <= 0) or not np.all(np.isfinite(xs)) or not np.all(np.isfinite(ys)):
        raise DegenerateFit("log-log fit needs finite positive values")
    lx, ly = np.log(xs), np.log(ys)
    if np.ptp(lx) == 0:
        raise DegenerateFit("all x values coincide")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def write_sweep_csv(rows: list[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow(r.cells())


def write_timing_csv(rows: list[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "runtime_s"])
        for r in rows:
            w.writerow([f"{r.value:.12g}", f"{r.runtime:.3f}"])


def write_report(rep: StabilityReport, outdir: Path) -> None:
    (outdir / "report.json").write_text(rep.to_json() + "\n")
    row = row_from_report(0.0, rep, 0.0)
    write_sweep_csv([row], outdir / "report.csv")


def certify_figure(G: Domain, rep: StabilityReport) -> Figure:
    fig = Figure(title=f"gap {rep.gap:.4g}, [u] {rep.seminorm:.4g}")
    pts, _ = G.boundary(1024)
    fig.add("inner domain G", [pts], closed=True, width=2.0)
    outer, _ = minkowski_sum_ball(G, rep.R).boundary(1024)
    fig.add("outer domain", [outer], closed=True)
    box = G.bbox
    fig.add("critical lines", [line_in_box(d.cap.omega, d.cap.critical_m, box) for d in rep.directions])
    fig.add("ball r_i", [circle(rep.center, rep.r_i)], closed=True)
    fig.add("ball r_e", [circle(rep.center, rep.r_e)], closed=True)
    fig.add("center O", [np.array([rep.center])], markers=True)
    return fig


def sweep_figure(rows: list[SweepRow], fit: tuple[float, float, float] | None) -> Figure:
    fig = Figure(title="gap against seminorm (log-log)", equal_aspect=False, xlabel="log10 [u]", ylabel="log10 gap")
    xy = np.array([[math.log10(r.seminorm), math.log10(r.gap)] for r in rows if r.seminorm > 0 and r.gap > 0])
    fig.add("sweep rows", [xy], markers=True)
    if fit is not None and len(xy):
        slope, intercept, _ = fit
        lx = np.array([xy[:, 0].min(), xy[:, 0].max()])
        # fit is in natural logs; both axes are log10 so the slope carries over
        ly = slope * lx + intercept / math.log(10)
        fig.add(f"fit slope {slope:.3f}", [np.column_stack([lx, ly])])
    return fig
