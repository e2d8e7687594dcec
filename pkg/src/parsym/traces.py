"""Boundary traces: the Lipschitz seminorm on the inner boundary, extrema, normal derivatives, parallel surfaces."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DegenerateSurface, InputError, OutOfDomain
from .geometry import Domain
from .grid import ScalarField, gradient, interpolate

PAIR_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    s: np.ndarray  # arc-length coordinate
    points: np.ndarray
    normals: np.ndarray
    values: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.points)

    def with_values(self, values) -> "BoundaryTrace":
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self),):
            raise InputError("one value per trace point is required")
        return replace(self, values=values)

    def to_csv(self, path: str | Path) -> None:
        vals = self.values if self.values is not None else np.full(len(self), np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "x", "y", "u", "nu_x", "nu_y"])
            for s, p, v, nv in zip(self.s, self.points, vals, self.normals):
                w.writerow([f"{s:.12g}", f"{p[0]:.12g}", f"{p[1]:.12g}", f"{v:.12g}", f"{nv[0]:.12g}", f"{nv[1]:.12g}"])


def sample_boundary(G: Domain, n: int) -> BoundaryTrace:
    """Quasi-uniform arc-length samples of ``dG`` with outward normals."""
    if n < 4:
        raise InputError("need at least 4 boundary samples")
    pts, nrm = G.boundary(n)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    return BoundaryTrace(s, pts, nrm)


def _check_margin(u: ScalarField, pts: np.ndarray, margin: float) -> None:
    depth = u.mask.domain.level(pts)
    # level is a signed distance for every domain used as an outer domain here
    if np.any(depth > -margin):
        worst = float(depth.max())
        raise OutOfDomain(f"trace point within {margin:.3g} of the outer boundary (signed distance {worst:.3g})")


def trace_values(u: ScalarField | Callable, trace: BoundaryTrace, order: int = 3, margin: float | None = None) -> BoundaryTrace:
    """Attach ``u`` restricted to the trace points (cubic interpolation by default)."""
    if isinstance(u, ScalarField):
        _check_margin(u, trace.points, 2.0 * u.h if margin is None else margin)
        vals = interpolate(u, trace.points, order=order)
    else:
        vals = np.asarray(u(trace.points), dtype=float)
    return trace.with_values(vals)


def _resolve(u, trace: BoundaryTrace) -> BoundaryTrace:
    if u is None:
        if trace.values is None:
            raise InputError("trace has no values and no field was given")
        return trace
    return trace_values(u, trace)


def pair_seminorm(points: np.ndarray, values: np.ndarray, seed: int = 0, limit: int = PAIR_LIMIT) -> float:
    """``max |v_i - v_j| / |x_i - x_j|`` over sampled pairs ``i < j``.

    Exact enumeration up to ``limit`` points; beyond that a fixed-seed stratified
    subsample of ``limit`` points (one per stratum of consecutive samples).
    """
    points = np.asarray(points, float)
    values = np.asarray(values, float)
    n = len(points)
    if n > limit:
        rng = np.random.default_rng(seed)
        edges = np.linspace(0, n, limit + 1).astype(int)
        idx = edges[:-1] + (rng.random(limit) * (edges[1:] - edges[:-1])).astype(int)
        points, values, n = points[idx], values[idx], limit
    best = 0.0
    block = 512
    for a in range(0, n, block):
        pa, va = points[a : a + block], values[a : a + block]
        d = np.linalg.norm(pa[:, None, :] - points[None, :, :], axis=-1)
        dv = np.abs(va[:, None] - values[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(d > 0, dv / d, 0.0)
        best = max(best, float(q.max()))
    return best


def lipschitz_seminorm(u: ScalarField | Callable | None, trace: BoundaryTrace) -> float:
    """Chordal Lipschitz seminorm of ``u`` on the sampled inner boundary."""
    tr = _resolve(u, trace)
    return pair_seminorm(tr.points, tr.values)


def tangential_seminorm(u: ScalarField, trace: BoundaryTrace, order: int = 3) -> float:
    """Cross-check estimator: ``max |grad u . tau|`` over the trace."""
    _check_margin(u, trace.points, 3.0 * u.h)
    g = gradient(u, trace.points, order=order)
    tau = np.stack([-trace.normals[:, 1], trace.normals[:, 0]], axis=-1)
    return float(np.max(np.abs(np.einsum("ij,ij->i", g, tau))))


def boundary_extrema(u: ScalarField | Callable | None, trace: BoundaryTrace) -> tuple[float, float]:
    tr = _resolve(u, trace)
    return float(tr.values.min()), float(tr.values.max())


def normal_derivative(u: ScalarField, omega: Domain, n: int = 1024, step: float | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exterior normal derivative on ``n`` samples of the outer boundary.

    One-sided second-order difference along the inward normal,
    ``du/dnu = (3 u0 - 4 u(x - d nu) + u(x - 2 d nu)) / (2 d)``, with ``d = 3h``.
    Returns ``(points, normals, u_nu)``.
    """
    pts, nrm = omega.boundary(n)
    d = 3.0 * u.h if step is None else step
    u0 = 0.0 if u.boundary_value is None else u.boundary_value
    u1 = interpolate(u, pts - d * nrm, order=3)
    u2 = interpolate(u, pts - 2.0 * d * nrm, order=3)
    return pts, nrm, (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * d)


def parallel_surface(omega: Domain, t: float, n: int = 1024, newton_steps: int = 3) -> np.ndarray:
    """Samples of ``{x in omega : dist(x, d omega) = t}``."""
    pts, nrm = omega.boundary(n)
    x = pts - t * nrm
    eps = 1e-6 * omega.diameter
    ex, ey = np.array([eps, 0.0]), np.array([0.0, eps])
    for _ in range(newton_steps):
        f = omega.sdf(x) + t
        g = np.stack([omega.sdf(x + ex) - omega.sdf(x - ex), omega.sdf(x + ey) - omega.sdf(x - ey)], axis=-1) / (2 * eps)
        gn = np.einsum("ij,ij->i", g, g)
        x = x - (f / np.where(gn > 0, gn, 1.0))[:, None] * g
    resid = np.abs(omega.sdf(x) + t)
    keep = resid <= 1e-6 * omega.diameter + 1e-3 * t
    if keep.sum() < max(8, n // 4):
        raise DegenerateSurface(f"parallel surface at distance {t} collapsed ({keep.sum()} usable samples)")
    return x[keep]


def parallel_oscillation(u: ScalarField, omega: Domain, t: float, n: int = 1024) -> float:
    """``max - min`` of ``u`` on the parallel surface at depth ``t``."""
    if t < 0:
        raise InputError("depth t must be nonnegative")
    if t == 0:
        if u.boundary_value is None:
            raise InputError("no boundary data for t = 0")
        return 0.0
    if t >= omega.inradius:
        raise DegenerateSurface(f"t={t} reaches the inradius {omega.inradius:.4g}")
    x = parallel_surface(omega, t, n)
    vals = interpolate(u, x, order=3)
    return float(vals.max() - vals.min())
