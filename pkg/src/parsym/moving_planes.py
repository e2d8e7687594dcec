"""Quantitative moving planes: reflected differences, symmetric cores, approximate center and the stability report."""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .constants import DEFAULT_C_DPRIME, ConstantsBundle, assemble, certificate_holds, empirical_K, empirical_d0
from .errors import HypothesisViolated, InputError, OutOfDomain
from .geometry import CapDecomposition, Domain, MinkowskiDomain, critical_position, minkowski_sum_ball, reflect, sample_points_in_bbox
from .grid import ScalarField, c2_norm, interpolate, max_gradient_norm
from .solver import SemilinearProblem, solve_semilinear, solve_torsion
from .traces import boundary_extrema, lipschitz_seminorm, sample_boundary, tangential_seminorm

log = logging.getLogger(__name__)

COORDINATE_DIRECTIONS = ((1.0, 0.0), (0.0, 1.0))


def _omega_R(omega: Domain) -> float | None:
    return omega.R if isinstance(omega, MinkowskiDomain) else None


@dataclass(frozen=True, eq=False)
class ReflectedDifference:
    """``w(x) = u(x^m) - u(x)`` on the grid nodes of the right cap ``Omega_m``."""

    cap: CapDecomposition
    values: np.ndarray  # full grid array, NaN outside Omega_m
    cap_nodes: np.ndarray  # bool, nodes of Omega_m
    component: np.ndarray  # bool, nodes of the selected component of G_m
    eta: float  # admissible negative noise 4 h |grad u|
    laplacian_max: float  # max |Delta_h w| over nodes with a full stencil in Omega_m
    dw_domega_Q: float | None  # one-sided derivative at the orthogonal-contact witness
    h: float

    @property
    def m(self) -> float:
        return self.cap.critical_m

    @property
    def min_value(self) -> float:
        v = self.values[self.cap_nodes]
        return float(v.min()) if v.size else 0.0

    @property
    def nonnegative(self) -> bool:
        return self.min_value >= -self.eta


def _reflected_values(u: ScalarField, pts: np.ndarray, cap: CapDecomposition, order: int) -> np.ndarray:
    q = reflect(pts, cap.frame)
    lev = u.mask.domain.level(q)
    if np.any(lev > 2.0 * u.h):
        raise OutOfDomain(
            f"reflected point leaves the domain by {float(lev.max()):.3g}; the plane is below its critical position"
        )
    return interpolate(u, q, order=order)


def reflected_difference(
    u: ScalarField, cap: CapDecomposition, G: Domain | None = None, R: float | None = None, order: int = 3
) -> ReflectedDifference:
    """Evaluate ``w^m`` node-wise and select the component of ``G_m`` near the contact witness.

    The component is the union of connected components of the inner cap that
    meet ``B_R`` around ``P^m`` (tangency) or ``Q`` (orthogonal contact).
    Without ``G`` the whole of ``Omega_m`` is used.
    """
    mask = u.mask
    nodes = mask.nodes
    w = np.asarray(cap.omega)
    m = cap.critical_m
    proj = nodes @ w
    cap_nodes = mask.inside & (proj > m)
    vals = np.full(mask.shape, np.nan)
    if np.any(cap_nodes):
        x = nodes[cap_nodes]
        vals[cap_nodes] = _reflected_values(u, x, cap, order) - u.values[cap_nodes]

    if G is not None:
        inner = cap_nodes & (G.sdf(nodes) < 0.0)
        if R is None:
            R = _omega_R(mask.domain) or G.diameter
        seeds = []
        if cap.witness_P is not None:
            seeds.append(reflect(np.asarray(cap.witness_P), cap.frame))
        if cap.witness_Q is not None:
            seeds.append(np.asarray(cap.witness_Q, float))
        labels, _ = ndimage.label(inner)
        near = np.zeros(mask.shape, bool)
        for s in seeds:
            near |= np.linalg.norm(nodes - s, axis=-1) < R
        keep = np.unique(labels[near & inner])
        keep = keep[keep > 0]
        component = np.isin(labels, keep) if keep.size else inner
    else:
        component = cap_nodes

    # 5-point Laplacian of w away from cut cells, for the node and its mirror image
    h = mask.h
    deep = np.zeros(mask.shape, bool)
    deep[cap_nodes] = (mask.domain.level(nodes[cap_nodes]) < -5 * h) & (
        mask.domain.level(reflect(nodes[cap_nodes], cap.frame)) < -5 * h
    )
    full = deep.copy()
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        full &= np.roll(cap_nodes, (-di, -dj), axis=(0, 1))
    if np.any(full):
        v0 = np.where(cap_nodes, vals, 0.0)
        lap = (
            np.roll(v0, -1, 0) + np.roll(v0, 1, 0) + np.roll(v0, -1, 1) + np.roll(v0, 1, 1) - 4.0 * v0
        ) / (h * h)
        lap_max = float(np.abs(lap[full]).max())
    else:
        lap_max = 0.0

    dwq = None
    if cap.witness_Q is not None:
        Q = np.asarray(cap.witness_Q, float)
        d = 2.0 * h
        y = np.stack([Q + d * w, Q + 2 * d * w])
        try:
            wy = _reflected_values(u, y, cap, order) - interpolate(u, y, order=order)
            dwq = float((4.0 * wy[0] - wy[1]) / (2.0 * d))  # w(Q) = 0
        except OutOfDomain:
            dwq = None

    eta = 4.0 * h * max_gradient_norm(u)
    return ReflectedDifference(cap, vals, cap_nodes, component, eta, lap_max, dwq, h)


def sup_wm(wd: ReflectedDifference) -> float:
    """Maximum of ``w^m`` over the selected component of ``G_m``."""
    sel = wd.component & wd.cap_nodes
    if not np.any(sel):
        raise InputError("the selected component of the cap is empty")
    return float(np.max(wd.values[sel]))


@dataclass(frozen=True, eq=False)
class SymmetricCore:
    """Interior of ``G_m`` united with its mirror image and the plane section; symmetric by construction."""

    G: Domain
    cap: CapDecomposition
    s: float | None = None

    def _coords(self, x):
        x = np.asarray(x, float)
        w = np.asarray(self.cap.omega)
        tau = np.array([-w[1], w[0]])
        return x @ w - self.cap.critical_m, x @ tau

    def contains_coords(self, t, s) -> np.ndarray:
        """Membership in plane coordinates; depends on ``|t|`` only, hence exactly symmetric."""
        w = np.asarray(self.cap.omega)
        tau = np.array([-w[1], w[0]])
        a = np.abs(np.asarray(t, float))
        s = np.asarray(s, float)
        p = (self.cap.critical_m + a)[..., None] * w + s[..., None] * tau
        return self.G.sdf(p) < 0.0

    def contains(self, x) -> np.ndarray:
        t, s = self._coords(x)
        return self.contains_coords(t, s)

    def boundary_gap_samples(self, n: int = 4096) -> np.ndarray:
        """Reflections of the right-cap boundary samples; the rest of ``dX`` lies on ``dG``."""
        pts, _ = self.G.boundary(n)
        cap = pts @ np.asarray(self.cap.omega) > self.cap.critical_m
        return reflect(pts[cap], self.cap.frame)


def symmetric_core(G: Domain, cap: CapDecomposition, s: float | None = None) -> SymmetricCore:
    return SymmetricCore(G, cap, s)


def core_gap(X: SymmetricCore, G: Domain | None = None, n: int = 4096) -> float:
    """``max dist(x, dG)`` over sampled ``x`` in ``dX``."""
    G = X.G if G is None else G
    q = X.boundary_gap_samples(n)
    if len(q) == 0:
        return 0.0
    return float(np.max(np.abs(G.sdf(q))))


def core_area_fraction(X: SymmetricCore, h: float) -> float:
    x0, y0, x1, y1 = X.G.bbox
    xs = np.arange(x0, x1 + h, h)
    ys = np.arange(y0, y1 + h, h)
    P = np.stack(np.meshgrid(xs, ys, indexing="ij"), -1).reshape(-1, 2)
    inG = X.G.sdf(P) < 0
    return float(X.contains(P).sum() / max(inG.sum(), 1))


@dataclass(frozen=True)
class SandwichResult:
    s: float
    inner_ok: bool  # G_par^s inside X
    outer_ok: bool  # X inside G
    inner_violations: int
    outer_violations: int
    n_samples: int
    hypothesis_ok: bool | None
    s_admissible: bool | None

    @property
    def passed(self) -> bool:
        return self.inner_ok and self.outer_ok


def sandwich_check(
    G: Domain,
    X: SymmetricCore,
    s: float,
    *,
    seminorm: float | None = None,
    C_star: float | None = None,
    n: int = 10_000,
    seed: int = 0,
    strict: bool = False,
) -> SandwichResult:
    """Sample both inclusions ``{dist(., dG) > s} in X in G``.

    With ``seminorm`` and ``C_star`` the contract ``s > C_star [u]`` is enforced
    and the smallness hypothesis ``[u] < rho / (4 C_star)`` is reported
    (raised as ``HypothesisViolated`` only when ``strict``).
    """
    if s <= 0:
        raise InputError("s must be positive")
    hyp = adm = None
    if seminorm is not None and C_star is not None:
        if s <= C_star * seminorm:
            raise InputError(f"s={s:.4g} must exceed C_star [u] = {C_star * seminorm:.4g}")
        hyp = seminorm < G.rho / (4.0 * C_star)
        adm = s < G.rho / 2.0
        if strict and not hyp:
            raise HypothesisViolated(f"[u]={seminorm:.4g} is not below rho/(4 C_star) = {G.rho / (4 * C_star):.4g}")
    P = sample_points_in_bbox(G, n, seed)
    d = G.sdf(P)
    inX = X.contains(P)
    tol = max(10.0 * X.cap.tol, 1e-6 * G.diameter)
    inner_bad = int(np.sum((d < -s) & ~inX))
    outer_bad = int(np.sum(inX & (d > tol)))
    return SandwichResult(float(s), inner_bad == 0, outer_bad == 0, inner_bad, outer_bad, n, hyp, adm)


def approximate_center(G: Domain, caps: list[CapDecomposition] | None = None, **kw) -> np.ndarray:
    """Intersection of the critical lines for ``e1`` and ``e2``: ``O = (m1, m2)``."""
    if caps is None:
        caps = [critical_position(G, d, **kw) for d in COORDINATE_DIRECTIONS]
    by_dir = {tuple(np.round(c.omega, 12)): c for c in caps}
    try:
        return np.array([by_dir[(1.0, 0.0)].critical_m, by_dir[(0.0, 1.0)].critical_m])
    except KeyError:
        raise InputError("caps for both coordinate directions are required") from None


def least_squares_center(caps: list[CapDecomposition]) -> np.ndarray:
    """Diagnostic center for arbitrary direction sets; not part of the certificate."""
    A = np.array([c.omega for c in caps])
    b = np.array([c.critical_m for c in caps])
    return np.linalg.lstsq(A, b, rcond=None)[0]


def stability_radii(G: Domain, O, n: int = 4096) -> tuple[float, float]:
    if n < 1024:
        raise InputError("at least 1024 boundary samples are required")
    O = np.asarray(O, float)
    if not np.all(np.isfinite(O)):
        raise InputError("center must be finite")
    pts, _ = G.boundary(n)
    r = np.linalg.norm(pts - O, axis=1)
    return float(r.min()), float(r.max())


@dataclass
class DirectionResult:
    cap: CapDecomposition
    sup_w: float
    min_w: float
    eta: float
    laplacian_max: float
    core_gap: float
    dw_domega_Q: float | None
    boundary_harnack_ratio: float | None = None
    sandwich: SandwichResult | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cap"] = self.cap.to_dict()
        return d


@dataclass
class StabilityReport:
    center: tuple[float, float]
    r_i: float
    r_e: float
    seminorm: float
    seminorm_tangential: float
    trace_min: float
    trace_max: float
    gap: float
    R: float
    h: float
    problem: str
    empirical: ConstantsBundle
    formula: ConstantsBundle
    certificate_ratio: float  # (gap - gap_resolution) / (C_final [u]) with empirical constants
    log10_certificate_ratio_formula: float
    directions: list[DirectionResult]
    passes: dict
    semilinear: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.passes.get("certificate_empirical")) and bool(self.passes.get("certificate_formula"))

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "r_i": self.r_i,
            "r_e": self.r_e,
            "gap": self.gap,
            "seminorm": self.seminorm,
            "seminorm_tangential": self.seminorm_tangential,
            "trace_min": self.trace_min,
            "trace_max": self.trace_max,
            "R": self.R,
            "h": self.h,
            "problem": self.problem,
            "certificate_ratio": _json_float(self.certificate_ratio),
            "log10_certificate_ratio_formula": _json_float(self.log10_certificate_ratio_formula),
            "constants_empirical": self.empirical.to_dict(),
            "constants_formula": self.formula.to_dict(),
            "directions": [d.to_dict() for d in self.directions],
            "passes": self.passes,
            "semilinear": self.semilinear,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    def sup_ratio(self) -> float:
        return max(d.sup_w for d in self.directions[:2]) / self.seminorm if self.seminorm > 0 else math.inf


def _json_float(x: float) -> float | str:
    """Strict JSON has no infinities; they are written as strings."""
    return x if math.isfinite(x) else str(x)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serializable: {type(o)}")


def boundary_harnack_ratio(u: ScalarField, wd: ReflectedDifference) -> float | None:
    """``sup w^m dist(P^m, plane) / w(P^m)``, the measured size of the boundary Harnack factor.

    ``None`` without a tangency witness or when ``w(P^m)`` is at noise level.
    """
    P = wd.cap.witness_P
    if P is None:
        return None
    P = np.asarray(P, float)
    Pm = reflect(P, wd.cap.frame)
    wP = float(interpolate(u, np.stack([P, Pm]), order=3) @ np.array([1.0, -1.0]))
    if wP <= wd.eta:
        return None
    return sup_wm(wd) * 0.5 * float(np.linalg.norm(P - Pm)) / wP


def _direction(u: ScalarField, G: Domain, R: float, d, n_cap: int) -> DirectionResult:
    cap = critical_position(G, d, n_samples=n_cap)
    wd = reflected_difference(u, cap, G, R)
    X = symmetric_core(G, cap)
    return DirectionResult(
        cap, sup_wm(wd), wd.min_value, wd.eta, wd.laplacian_max, core_gap(X), wd.dw_domega_Q,
        boundary_harnack_ratio(u, wd),
    )


def certify(
    G: Domain,
    R: float,
    problem: str | SemilinearProblem = "torsion",
    h: float | None = None,
    *,
    n_trace: int = 4096,
    n_cap: int = 4096,
    extra_directions: int = 0,
    C_dprime: float = DEFAULT_C_DPRIME,
    d0: float | None = None,
    seed: int = 0,
    jobs: int = 1,
    u: ScalarField | None = None,
) -> StabilityReport:
    """Solve on ``G + B_R``, run moving planes in the coordinate directions and certify ``r_e - r_i <= C [u]``.

    The empirical constant replaces the Harnack-chain bound of the supremum of
    ``w^m`` by the measured ratio ``max sup w^m / [u]`` and uses the measured
    ``K``; the formula bundle evaluates the closed form (with the boundary
    Harnack factor taken as 1) in the log10 domain.
    """
    t0 = time.perf_counter()
    if R <= 0:
        raise InputError("R must be positive")
    omega = minkowski_sum_ball(G, R)
    if h is None:
        h = omega.diameter / 256.0
    semi = isinstance(problem, SemilinearProblem)
    if u is None:
        if semi:
            u, _ = solve_semilinear(omega, problem, h)
        elif problem == "torsion":
            u, _ = solve_torsion(omega, h)
        else:
            raise InputError(f"unknown problem {problem!r}")
    trace = sample_boundary(G, n_trace)
    seminorm = lipschitz_seminorm(u, trace)
    tmin, tmax = boundary_extrema(u, trace)
    tang = tangential_seminorm(u, trace)

    dirs = list(COORDINATE_DIRECTIONS)
    for k in range(extra_directions):
        a = math.pi * (k + 0.5) / max(extra_directions, 1)
        dirs.append((math.cos(a), math.sin(a)))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            results = list(ex.map(lambda d: _direction(u, G, R, d, n_cap), dirs))
    else:
        results = [_direction(u, G, R, d, n_cap) for d in dirs]

    O = approximate_center(G, [r.cap for r in results[:2]])
    r_i, r_e = stability_radii(G, O, max(1024, n_trace))
    gap = r_e - r_i

    K = empirical_K(u, G, trace_min=tmin)
    # extra directions are diagnostic only and must not move the constants
    sup_w = max(r.sup_w for r in results[:2])
    floor = np.finfo(float).tiny
    C_emp = max(sup_w / seminorm if seminorm > 0 else 0.0, floor)
    L = None
    if semi:
        L = problem.lipschitz(float(u.values.max()))
    extras = {"sup_w": sup_w}
    emp = assemble(N=2, R=R, diamG=G.diameter, rho=G.rho, K=K, C_sup=C_emp, C_dprime=C_dprime, extras=extras)
    form = assemble(N=2, R=R, diamG=G.diameter, rho=G.rho, K=K, C_dprime=C_dprime, L=L, extras=extras)

    s_par = 2.0 * emp.C_star * seminorm
    if s_par > 0:
        for r in results:
            X = symmetric_core(G, r.cap, s_par)
            r.sandwich = sandwich_check(G, X, s_par, seminorm=seminorm, C_star=emp.C_star, seed=seed)

    # each critical position is known to cap.tol, which moves r_e - r_i by at most 2 |dO|
    gap_res = 2.0 * math.sqrt(2.0) * max(r.cap.tol for r in results[:2])
    net_gap = max(gap - gap_res, 0.0)
    ratio = net_gap / (emp.C_final * seminorm) if seminorm > 0 else (0.0 if net_gap <= 0 else math.inf)
    if net_gap > 0 and seminorm > 0:
        log_ratio_f = math.log10(net_gap) - form.log10_C_final - math.log10(seminorm)
    else:
        log_ratio_f = -math.inf if net_gap <= 0 else math.inf

    # concentric balls on the outer boundary, allowing one grid step
    pts_o, _ = omega.boundary(max(1024, n_trace))
    ro = np.linalg.norm(pts_o - O, axis=1)
    balls_ok = bool(ro.min() >= r_i + R - 2 * h and ro.max() <= r_e + R + 2 * h)

    passes = {
        "certificate_empirical": bool(net_gap <= emp.C_final * seminorm),
        "certificate_formula": bool(certificate_holds(net_gap, seminorm, form)),
        "concentric_balls": balls_ok,
        "radii_ordered": bool(r_i <= r_e),
        "wm_nonnegative": bool(all(r.min_w >= -r.eta for r in results)),
        "smallness_hypothesis_empirical": bool(seminorm < emp.eps_threshold),
        "sandwich": bool(all(r.sandwich is None or r.sandwich.passed for r in results)),
    }
    semilinear = {}
    if semi:
        d0_emp = empirical_d0(u, omega)
        d0_used = d0 if d0 is not None else d0_emp
        c2 = c2_norm(u)
        semilinear = {
            "nonlinearity": problem.name,
            "params": problem.params,
            "L": L,
            "d0": d0_used,
            "d0_empirical": d0_emp,
            "c2_norm": c2,
            "R_bound": 0.5 * d0_used / c2,
            "R_small_enough": bool(R < 0.5 * d0_used / c2),
        }
        passes["R_small_enough"] = semilinear["R_small_enough"]
    diagnostics = {
        "runtime_s": time.perf_counter() - t0,
        "gap_resolution": gap_res,
        "least_squares_center": least_squares_center([r.cap for r in results]).tolist(),
        "sup_ratio": sup_w / seminorm if seminorm > 0 else None,
        "sup_ratio_all_directions": max(r.sup_w for r in results) / seminorm if seminorm > 0 else None,
        "max_gradient": max_gradient_norm(u),
        "n_unknowns": int(u.mask.n_inside),
    }
    return StabilityReport(
        center=(float(O[0]), float(O[1])),
        r_i=r_i,
        r_e=r_e,
        seminorm=seminorm,
        seminorm_tangential=tang,
        trace_min=tmin,
        trace_max=tmax,
        gap=gap,
        R=R,
        h=float(u.h),
        problem=problem.name if semi else "torsion",
        empirical=emp,
        formula=form,
        certificate_ratio=ratio,
        log10_certificate_ratio_formula=log_ratio_f,
        directions=results,
        passes=passes,
        semilinear=semilinear,
        diagnostics=diagnostics,
    )
