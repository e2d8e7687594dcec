"""Analytic planar domains: signed distances, offsets, reflections and caps.

Every domain is an immutable object exposing

* ``level(p)``  - a cheap implicit function, negative inside, positive outside;
* ``sdf(p)``    - the signed Euclidean distance to the boundary;
* ``boundary(n)`` - ``n`` quasi-uniform (arc-length) boundary samples with
  outward unit normals;
* ``support(omega)`` - ``sup{x . omega : x in G}``.

Points are ``(..., 2)`` arrays; scalar results broadcast over the leading axes.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError, NoCriticalPosition

__all__ = [
    "Domain",
    "Disk",
    "Ellipse",
    "FourierDisk",
    "Polygon",
    "Union",
    "MinkowskiDomain",
    "ParallelSet",
    "HyperplaneFrame",
    "CapDecomposition",
    "signed_distance",
    "minkowski_sum_ball",
    "reflect",
    "extent",
    "critical_position",
    "containment_margin",
    "parallel_set",
    "interior_ball_radius",
    "domain_from_dict",
    "load_domain",
]


def _as_points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 2:
        raise InputError(f"points must have trailing dimension 2, got shape {p.shape}")
    return p


def _rot(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


class Domain:
    """Base class. Subclasses implement ``level``, ``sdf``, ``boundary`` and ``support``."""

    kind: str = "abstract"

    def level(self, p) -> np.ndarray:
        return self.sdf(p)

    def sdf(self, p) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def boundary(self, n: int) -> tuple[np.ndarray, np.ndarray]:  # pragma: no cover
        raise NotImplementedError

    def support(self, omega) -> float:  # pragma: no cover
        raise NotImplementedError

    def contains(self, p) -> np.ndarray:
        return self.level(p) < 0.0

    def translated(self, v) -> "Domain":  # pragma: no cover
        raise NotImplementedError

    def rotated(self, angle: float, about=(0.0, 0.0)) -> "Domain":  # pragma: no cover
        raise NotImplementedError

    def to_dict(self) -> dict:  # pragma: no cover
        raise NotImplementedError

    @cached_property
    def _dense(self) -> tuple[np.ndarray, np.ndarray]:
        return self.boundary(4096)

    @cached_property
    def perimeter(self) -> float:
        pts = self._dense[0]
        return float(np.sum(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)))

    @cached_property
    def diameter(self) -> float:
        pts = self._dense[0]
        hull = pts
        try:
            from scipy.spatial import ConvexHull

            hull = pts[ConvexHull(pts).vertices]
        except Exception:  # degenerate point sets
            pass
        d = np.linalg.norm(hull[:, None, :] - hull[None, :, :], axis=-1)
        return float(d.max())

    @cached_property
    def bbox(self) -> tuple[float, float, float, float]:
        """``(xmin, ymin, xmax, ymax)``."""
        xmax = self.support((1.0, 0.0))
        ymax = self.support((0.0, 1.0))
        xmin = -self.support((-1.0, 0.0))
        ymin = -self.support((0.0, -1.0))
        return (xmin, ymin, xmax, ymax)

    @cached_property
    def rho(self) -> float:
        return _touching_ball_radius(self)

    @cached_property
    def inradius(self) -> float:
        return _inradius(self)

    @cached_property
    def area(self) -> float:
        pts = self._dense[0]
        x, y = pts[:, 0], pts[:, 1]
        return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    @cached_property
    def centroid(self) -> np.ndarray:
        pts = self._dense[0]
        x, y = pts[:, 0], pts[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        a = 0.5 * cross.sum()
        return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def _inradius(dom: Domain) -> float:
    xmin, ymin, xmax, ymax = dom.bbox
    h = max(xmax - xmin, ymax - ymin) / 128.0
    xs = np.arange(xmin, xmax + h, h)
    ys = np.arange(ymin, ymax + h, h)
    g = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    g = g[dom.level(g) < 0]
    if len(g) == 0:
        return 0.0
    d = dom.sdf(g)
    best = g[np.argmin(d)]
    # local refinement around the best node
    for _ in range(3):
        h /= 8.0
        off = np.arange(-8, 9) * h
        cand = best + np.stack(np.meshgrid(off, off, indexing="ij"), axis=-1).reshape(-1, 2)
        d = dom.sdf(cand)
        best = cand[np.argmin(d)]
    return float(-dom.sdf(best[None])[0])


def _touching_ball_radius(dom: Domain, n: int = 1024) -> float:
    """Smallest radius of the maximal interior ball touching each boundary sample."""
    pts, nrm = dom.boundary(n)
    lo = np.zeros(len(pts))
    hi = np.full(len(pts), 0.5 * dom.diameter)
    scale = dom.diameter
    for _ in range(45):
        r = 0.5 * (lo + hi)
        c = pts - r[:, None] * nrm
        ok = dom.sdf(c) <= -r + 1e-9 * scale
        lo = np.where(ok, r, lo)
        hi = np.where(ok, hi, r)
    return float(min(lo.min(), dom.inradius))


class _ParametricDomain(Domain):
    """Domains whose boundary is a smooth closed curve ``c(t)``, ``t in [0, 2 pi)``, run counter-clockwise."""

    _n_dense = 4096

    def curve(self, t):  # pragma: no cover
        raise NotImplementedError

    def dcurve(self, t):  # pragma: no cover
        raise NotImplementedError

    def ddcurve(self, t):  # pragma: no cover
        raise NotImplementedError

    @cached_property
    def _arc_table(self) -> tuple[np.ndarray, np.ndarray]:
        t = np.linspace(0.0, 2.0 * np.pi, 16 * self._n_dense + 1)
        speed = np.linalg.norm(self.dcurve(t), axis=-1)
        s = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(t))])
        return t, s

    @cached_property
    def perimeter(self) -> float:
        return float(self._arc_table[1][-1])

    @cached_property
    def _tree(self) -> tuple[cKDTree, np.ndarray]:
        t = np.linspace(0.0, 2.0 * np.pi, self._n_dense, endpoint=False)
        return cKDTree(self.curve(t)), t

    def boundary_params(self, n: int) -> np.ndarray:
        t, s = self._arc_table
        target = np.arange(n) * (s[-1] / n)
        return np.interp(target, s, t)

    def boundary(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        t = self.boundary_params(n)
        d = self.dcurve(t)
        nrm = np.stack([d[:, 1], -d[:, 0]], axis=-1)
        nrm /= np.linalg.norm(nrm, axis=-1, keepdims=True)
        return self.curve(t), nrm

    def curve_derivs(self, t):
        """``(c, c', c'')`` at ``t``; subclasses may share work between the three."""
        return self.curve(t), self.dcurve(t), self.ddcurve(t)

    def closest_param(self, p) -> np.ndarray:
        p = _as_points(p)
        flat = p.reshape(-1, 2)
        tree, tk = self._tree
        _, idx = tree.query(flat)
        t = tk[idx]
        dt = 2.0 * np.pi / self._n_dense
        active = np.arange(len(t))
        for _ in range(30):
            c, d1, d2 = self.curve_derivs(t[active])
            diff = c - flat[active]
            speed2 = np.einsum("ij,ij->i", d1, d1)
            g = np.einsum("ij,ij->i", diff, d1)
            gp = speed2 + np.einsum("ij,ij->i", diff, d2)
            gp = np.where(gp > 1e-14, gp, speed2)
            step = np.clip(g / gp, -dt, dt)
            t[active] -= step
            active = active[np.abs(step) >= 1e-14]
            if active.size == 0:
                break
        return t.reshape(p.shape[:-1])

    def sdf(self, p) -> np.ndarray:
        p = _as_points(p)
        t = self.closest_param(p)
        dist = np.linalg.norm(self.curve(t.reshape(-1)).reshape(p.shape) - p, axis=-1)
        return np.where(self.level(p) < 0.0, -dist, dist)

    def support(self, omega) -> float:
        w = _unit(omega)
        t = np.linspace(0.0, 2.0 * np.pi, self._n_dense, endpoint=False)
        t0 = t[np.argmax(self.curve(t) @ w)]
        dt = 2.0 * np.pi / self._n_dense
        for _ in range(50):
            g = float(self.dcurve(np.array([t0]))[0] @ w)
            gp = float(self.ddcurve(np.array([t0]))[0] @ w)
            if gp >= 0.0:
                break
            step = float(np.clip(g / gp, -dt, dt))
            t0 -= step
            if abs(step) < 1e-16:
                break
        return float(self.curve(np.array([t0]))[0] @ w)

    def curvature(self, t) -> np.ndarray:
        d1 = self.dcurve(t)
        d2 = self.ddcurve(t)
        num = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return num / np.linalg.norm(d1, axis=-1) ** 3


@dataclass(frozen=True, eq=False)
class Disk(Domain):
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    kind = "disk"

    def __post_init__(self):
        if not self.radius > 0:
            raise InputError(f"disk radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def sdf(self, p) -> np.ndarray:
        p = _as_points(p)
        return np.linalg.norm(p - np.asarray(self.center), axis=-1) - self.radius

    def boundary(self, n: int):
        t = 2.0 * np.pi * np.arange(n) / n
        nrm = np.stack([np.cos(t), np.sin(t)], axis=-1)
        return np.asarray(self.center) + self.radius * nrm, nrm

    def support(self, omega) -> float:
        return float(np.dot(self.center, _unit(omega)) + self.radius)

    @cached_property
    def perimeter(self) -> float:
        return 2.0 * np.pi * self.radius

    @cached_property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @cached_property
    def rho(self) -> float:
        return self.radius

    @cached_property
    def inradius(self) -> float:
        return self.radius

    @cached_property
    def area(self) -> float:
        return np.pi * self.radius**2

    @cached_property
    def centroid(self) -> np.ndarray:
        return np.asarray(self.center)

    def translated(self, v):
        return Disk(tuple(np.asarray(self.center) + np.asarray(v, float)), self.radius)

    def rotated(self, angle, about=(0.0, 0.0)):
        a = np.asarray(about, float)
        return Disk(tuple(_rot(angle) @ (np.asarray(self.center) - a) + a), self.radius)

    def to_dict(self):
        return {"kind": "disk", "params": {"center": list(self.center), "radius": self.radius}}


@dataclass(frozen=True, eq=False)
class Ellipse(_ParametricDomain):
    center: tuple[float, float] = (0.0, 0.0)
    semi_axes: tuple[float, float] = (1.0, 1.0)
    angle: float = 0.0
    kind = "ellipse"

    def __post_init__(self):
        a, b = self.semi_axes
        if not (a > 0 and b > 0):
            raise InputError(f"ellipse semi_axes must be positive, got {self.semi_axes}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "semi_axes", (float(a), float(b)))

    def _local(self, p):
        return (p - np.asarray(self.center)) @ _rot(self.angle)

    def level(self, p):
        q = self._local(_as_points(p))
        a, b = self.semi_axes
        return (q[..., 0] / a) ** 2 + (q[..., 1] / b) ** 2 - 1.0

    def curve(self, t):
        a, b = self.semi_axes
        loc = np.stack([a * np.cos(t), b * np.sin(t)], axis=-1)
        return loc @ _rot(self.angle).T + np.asarray(self.center)

    def dcurve(self, t):
        a, b = self.semi_axes
        return np.stack([-a * np.sin(t), b * np.cos(t)], axis=-1) @ _rot(self.angle).T

    def ddcurve(self, t):
        a, b = self.semi_axes
        return np.stack([-a * np.cos(t), -b * np.sin(t)], axis=-1) @ _rot(self.angle).T

    def support(self, omega) -> float:
        w = _rot(self.angle).T @ _unit(omega)
        a, b = self.semi_axes
        return float(np.dot(self.center, _unit(omega)) + math.hypot(a * w[0], b * w[1]))

    @cached_property
    def diameter(self) -> float:
        return 2.0 * max(self.semi_axes)

    @cached_property
    def rho(self) -> float:
        a, b = self.semi_axes
        return min(a, b) ** 2 / max(a, b)

    @cached_property
    def inradius(self) -> float:
        return min(self.semi_axes)

    @cached_property
    def area(self) -> float:
        return np.pi * self.semi_axes[0] * self.semi_axes[1]

    @cached_property
    def centroid(self) -> np.ndarray:
        return np.asarray(self.center)

    def translated(self, v):
        return Ellipse(tuple(np.asarray(self.center) + np.asarray(v, float)), self.semi_axes, self.angle)

    def rotated(self, angle, about=(0.0, 0.0)):
        a = np.asarray(about, float)
        c = _rot(angle) @ (np.asarray(self.center) - a) + a
        return Ellipse(tuple(c), self.semi_axes, self.angle + angle)

    def to_dict(self):
        return {
            "kind": "ellipse",
            "params": {"center": list(self.center), "semi_axes": list(self.semi_axes), "angle": self.angle},
        }


@dataclass(frozen=True, eq=False)
class FourierDisk(_ParametricDomain):
    """Star-shaped domain ``r(t) = radius + sum_k cos[k] cos(k t) + sin[k] sin(k t)``."""

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    cos: dict = field(default_factory=dict)
    sin: dict = field(default_factory=dict)
    angle: float = 0.0
    kind = "fourier_disk"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "cos", {int(k): float(v) for k, v in dict(self.cos).items()})
        object.__setattr__(self, "sin", {int(k): float(v) for k, v in dict(self.sin).items()})
        if not self.radius > 0:
            raise InputError("fourier_disk radius must be positive")
        if any(k < 1 for k in (*self.cos, *self.sin)):
            raise InputError("fourier_disk modes must be integers >= 1")
        amp = sum(abs(v) for v in self.cos.values()) + sum(abs(v) for v in self.sin.values())
        if amp >= self.radius:
            raise InputError(f"perturbation amplitude {amp} must be below the base radius {self.radius}")

    def r(self, t, deriv: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.radius if deriv == 0 else 0.0)
        for k, a in self.cos.items():
            out = out + a * k**deriv * np.cos(k * t + deriv * np.pi / 2)
        for k, b in self.sin.items():
            out = out + b * k**deriv * np.sin(k * t + deriv * np.pi / 2)
        return out

    def _frame(self, t):
        u = np.stack([np.cos(t + self.angle), np.sin(t + self.angle)], axis=-1)
        up = np.stack([-np.sin(t + self.angle), np.cos(t + self.angle)], axis=-1)
        return u, up

    def curve(self, t):
        u, _ = self._frame(t)
        return np.asarray(self.center) + self.r(t)[..., None] * u

    def dcurve(self, t):
        u, up = self._frame(t)
        return self.r(t, 1)[..., None] * u + self.r(t)[..., None] * up

    def ddcurve(self, t):
        u, up = self._frame(t)
        r, r1, r2 = self.r(t), self.r(t, 1), self.r(t, 2)
        return (r2 - r)[..., None] * u + 2.0 * r1[..., None] * up

    def curve_derivs(self, t):
        u, up = self._frame(t)
        r, r1, r2 = self.r(t), self.r(t, 1), self.r(t, 2)
        c = np.asarray(self.center) + r[..., None] * u
        return c, r1[..., None] * u + r[..., None] * up, (r2 - r)[..., None] * u + 2.0 * r1[..., None] * up

    def level(self, p):
        d = _as_points(p) - np.asarray(self.center)
        theta = np.arctan2(d[..., 1], d[..., 0]) - self.angle
        return np.hypot(d[..., 0], d[..., 1]) - self.r(theta)

    def translated(self, v):
        return FourierDisk(tuple(np.asarray(self.center) + np.asarray(v, float)), self.radius, self.cos, self.sin, self.angle)

    def rotated(self, angle, about=(0.0, 0.0)):
        a = np.asarray(about, float)
        c = _rot(angle) @ (np.asarray(self.center) - a) + a
        return FourierDisk(tuple(c), self.radius, self.cos, self.sin, self.angle + angle)

    def to_dict(self):
        return {
            "kind": "fourier_disk",
            "params": {
                "center": list(self.center),
                "radius": self.radius,
                "cos": {str(k): v for k, v in sorted(self.cos.items())},
                "sin": {str(k): v for k, v in sorted(self.sin.items())},
                "angle": self.angle,
            },
        }


@dataclass(frozen=True, eq=False)
class Polygon(Domain):
    vertices: Any = ()
    kind = "polygon"

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise InputError("polygon needs at least three 2-D vertices")
        x, y = v[:, 0], v[:, 1]
        signed = 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
        if signed == 0:
            raise InputError("degenerate polygon")
        if signed < 0:
            v = v[::-1].copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def _edges(self):
        a = self.vertices
        return a, np.roll(a, -1, axis=0)

    def sdf(self, p):
        p = _as_points(p)
        flat = p.reshape(-1, 2)
        a, b = self._edges
        ab = b - a
        ap = flat[:, None, :] - a[None]
        t = np.clip(np.einsum("nmk,mk->nm", ap, ab) / np.einsum("mk,mk->m", ab, ab), 0.0, 1.0)
        d = np.linalg.norm(ap - t[..., None] * ab[None], axis=-1).min(axis=1)
        # even-odd crossing test
        yi, yj = a[:, 1], b[:, 1]
        py = flat[:, 1:2]
        cond = (yi[None] > py) != (yj[None] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = a[None, :, 0] + (py - yi[None]) * (b[None, :, 0] - a[None, :, 0]) / (yj - yi)[None]
        inside = (np.sum(cond & (flat[:, 0:1] < xc), axis=1) % 2) == 1
        return np.where(inside, -d, d).reshape(p.shape[:-1])

    @cached_property
    def perimeter(self) -> float:
        a, b = self._edges
        return float(np.linalg.norm(b - a, axis=1).sum())

    def boundary(self, n: int):
        a, b = self._edges
        lens = np.linalg.norm(b - a, axis=1)
        cum = np.concatenate([[0.0], np.cumsum(lens)])
        s = (np.arange(n) + 0.5) * cum[-1] / n
        e = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(lens) - 1)
        frac = (s - cum[e]) / lens[e]
        pts = a[e] + frac[:, None] * (b[e] - a[e])
        tang = (b - a) / lens[:, None]
        nrm = np.stack([tang[:, 1], -tang[:, 0]], axis=-1)[e]
        return pts, nrm

    def support(self, omega) -> float:
        return float(np.max(self.vertices @ _unit(omega)))

    def translated(self, v):
        return Polygon(self.vertices + np.asarray(v, float))

    def rotated(self, angle, about=(0.0, 0.0)):
        a = np.asarray(about, float)
        return Polygon((self.vertices - a) @ _rot(angle).T + a)

    def to_dict(self):
        return {"kind": "polygon", "params": {"vertices": self.vertices.tolist()}}


@dataclass(frozen=True, eq=False)
class Union(Domain):
    members: tuple = ()
    kind = "union"

    def __post_init__(self):
        members = tuple(self.members)
        if len(members) < 1 or not all(isinstance(m, Domain) for m in members):
            raise InputError("union needs at least one member domain")
        object.__setattr__(self, "members", members)

    def level(self, p):
        return np.min([m.level(p) for m in self.members], axis=0)

    def sdf(self, p):
        # exact outside, a distance lower bound inside; sign is always correct
        return np.min([m.sdf(p) for m in self.members], axis=0)

    def boundary(self, n: int):
        per = np.array([m.perimeter for m in self.members])
        counts = np.maximum(16, np.ceil(4 * n * per / per.sum())).astype(int)
        pts, nrm = [], []
        scale = max(m.diameter for m in self.members)
        for m, c in zip(self.members, counts):
            p, v = m.boundary(int(c))
            keep = self.sdf(p) >= -1e-9 * scale
            pts.append(p[keep])
            nrm.append(v[keep])
        pts = np.concatenate(pts)
        nrm = np.concatenate(nrm)
        idx = np.linspace(0, len(pts), n, endpoint=False).astype(int)
        return pts[idx], nrm[idx]

    @cached_property
    def perimeter(self) -> float:
        total = 0.0
        scale = max(m.diameter for m in self.members)
        for m in self.members:
            p, _ = m.boundary(4096)
            total += m.perimeter * np.mean(self.sdf(p) >= -1e-9 * scale)
        return float(total)

    def support(self, omega) -> float:
        return max(m.support(omega) for m in self.members)

    def translated(self, v):
        return Union(tuple(m.translated(v) for m in self.members))

    def rotated(self, angle, about=(0.0, 0.0)):
        return Union(tuple(m.rotated(angle, about) for m in self.members))

    def to_dict(self):
        return {"kind": "union", "params": {"members": [m.to_dict() for m in self.members]}}


@dataclass(frozen=True, eq=False)
class MinkowskiDomain(Domain):
    """The dilation ``G + B_R``; membership is exactly ``sdf_G < R``."""

    inner: Domain = None
    R: float = 1.0
    kind = "minkowski"

    def __post_init__(self):
        if not isinstance(self.inner, Domain):
            raise InputError("inner must be a Domain")
        if not self.R > 0:
            raise InputError(f"ball radius R must be positive, got {self.R}")

    def level(self, p):
        return self.inner.sdf(p) - self.R

    def sdf(self, p):
        # exact outside G; inside G it bounds |sdf| from below (exact for convex G)
        return self.inner.sdf(p) - self.R

    def boundary(self, n: int):
        p, nrm = self.inner.boundary(n)
        q = p + self.R * nrm
        keep = self.inner.sdf(q) >= self.R * (1.0 - 1e-9)
        return q[keep], nrm[keep]

    def support(self, omega) -> float:
        return self.inner.support(omega) + self.R

    @cached_property
    def diameter(self) -> float:
        return self.inner.diameter + 2.0 * self.R

    @cached_property
    def bbox(self):
        x0, y0, x1, y1 = self.inner.bbox
        return (x0 - self.R, y0 - self.R, x1 + self.R, y1 + self.R)

    @cached_property
    def rho(self) -> float:
        return self.inner.rho + self.R

    @cached_property
    def inradius(self) -> float:
        return self.inner.inradius + self.R

    def translated(self, v):
        return MinkowskiDomain(self.inner.translated(v), self.R)

    def rotated(self, angle, about=(0.0, 0.0)):
        return MinkowskiDomain(self.inner.rotated(angle, about), self.R)

    def to_dict(self):
        return {"kind": "minkowski", "params": {"inner": self.inner.to_dict(), "R": self.R}}


@dataclass(frozen=True, eq=False)
class ParallelSet(Domain):
    """``{x in G : dist(x, dG) > s}``."""

    inner: Domain = None
    s: float = 0.0
    kind = "parallel"

    def level(self, p):
        return self.inner.sdf(p) + self.s

    def sdf(self, p):
        return self.inner.sdf(p) + self.s

    @cached_property
    def bbox(self):
        return self.inner.bbox


@dataclass(frozen=True)
class HyperplaneFrame:
    """The hyperplane ``{x : x . omega = lam}``."""

    omega: tuple[float, float]
    lam: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        if abs(np.linalg.norm(w) - 1.0) > 1e-12:
            raise InputError(f"omega must be a unit vector, |omega| = {np.linalg.norm(w)!r}")
        object.__setattr__(self, "omega", (float(w[0]), float(w[1])))

    @classmethod
    def from_direction(cls, v, lam: float = 0.0) -> "HyperplaneFrame":
        w = _unit(v)
        return cls((float(w[0]), float(w[1])), lam)


@dataclass(frozen=True)
class CapDecomposition:
    omega: tuple[float, float]
    extent_M: float
    critical_m: float
    case_kind: str  # interior_tangency | orthogonal_contact | both
    witness: tuple[float, float]
    witness_Q: tuple[float, float] | None
    witness_P: tuple[float, float] | None
    containment_margin: float
    tol: float

    @property
    def frame(self) -> HyperplaneFrame:
        return HyperplaneFrame(self.omega, self.critical_m)

    def to_dict(self) -> dict:
        return {
            "omega": list(self.omega),
            "extent_M": self.extent_M,
            "critical_m": self.critical_m,
            "case_kind": self.case_kind,
            "witness": list(self.witness),
            "witness_P": None if self.witness_P is None else list(self.witness_P),
            "witness_Q": None if self.witness_Q is None else list(self.witness_Q),
            "containment_margin": self.containment_margin,
        }


def signed_distance(domain: Domain, x) -> float | np.ndarray:
    out = domain.sdf(x)
    return float(out) if np.ndim(out) == 0 else out


def minkowski_sum_ball(G: Domain, R: float) -> MinkowskiDomain:
    if not R > 0:
        raise InputError(f"ball radius R must be positive, got {R}")
    return MinkowskiDomain(G, R)


def reflect(x, frame: HyperplaneFrame) -> np.ndarray:
    """Mirror image ``x - 2 (x . omega - lam) omega``."""
    x = _as_points(x)
    w = np.asarray(frame.omega)
    return x - 2.0 * ((x @ w) - frame.lam)[..., None] * w


def extent(G: Domain, omega) -> float:
    return G.support(omega)


def containment_margin(G: Domain, omega, lam: float, pts: np.ndarray) -> float:
    """``max sdf_G`` over the reflected cap boundary; ``<= tol`` means ``G^lam`` lies in ``G``."""
    w = _unit(omega)
    cap = pts @ w > lam
    if not np.any(cap):
        return -np.inf
    q = reflect(pts[cap], HyperplaneFrame((w[0], w[1]), lam))
    return float(np.max(G.sdf(q)))


def critical_position(
    G: Domain,
    omega,
    *,
    n_samples: int = 4096,
    tol: float | None = None,
    coarse_steps: int = 256,
    bisection_steps: int = 40,
    angle_tol: float = 0.02,
) -> CapDecomposition:
    """Critical plane of the moving-plane sweep in direction ``omega``.

    Coarse descent from the extreme position followed by bisection on the
    sampled containment predicate, then classification of the contact.
    """
    if n_samples < 1024:
        raise InputError("containment needs at least 1024 boundary samples")
    w = _unit(omega)
    if tol is None:
        tol = 1e-9 * G.diameter
    pts, nrm = G.boundary(n_samples)
    M = G.support(w)
    low = -G.support(-w)
    step = (M - low) / coarse_steps

    def ok(lam):
        return containment_margin(G, w, lam, pts) <= tol

    hi = M
    lam = M - step
    while True:
        if lam <= low:
            raise NoCriticalPosition(f"containment never fails in direction {tuple(w)}")
        if not ok(lam):
            break
        hi = lam
        lam -= step
    lo = lam
    for _ in range(bisection_steps):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    m = hi

    frame = HyperplaneFrame((w[0], w[1]), m)
    proj = pts @ w
    spacing = G.perimeter / n_samples
    plane_tol = 2.0 * spacing
    tangent_tol = max(10.0 * tol, 1e-4 * G.diameter)
    cap = proj > m
    P = None
    margin = -np.inf
    if np.any(cap):
        q = reflect(pts[cap], frame)
        s = G.sdf(q)
        margin = float(s.max())
        far = (proj[cap] - m) > plane_tol
        if np.any(far):
            k = int(np.argmax(np.where(far, s, -np.inf)))
            if s[k] >= -tangent_tol:
                P = (float(q[k, 0]), float(q[k, 1]))
    near = np.abs(proj - m) <= plane_tol
    Q = None
    if np.any(near):
        cosang = np.where(near, np.abs(nrm @ w), np.inf)
        k = int(np.argmin(cosang))
        if cosang[k] <= angle_tol or P is None:
            Q = (float(pts[k, 0]), float(pts[k, 1]))
    if P is not None and Q is not None:
        kind = "both"
    elif P is not None:
        kind = "interior_tangency"
    elif Q is not None:
        kind = "orthogonal_contact"
    else:
        raise NoCriticalPosition("no contact witness found at the critical position")
    witness = P if P is not None else Q
    return CapDecomposition(
        omega=(float(w[0]), float(w[1])),
        extent_M=M,
        critical_m=m,
        case_kind=kind,
        witness=witness,
        witness_Q=Q,
        witness_P=P,
        containment_margin=margin,
        tol=tol,
    )


def parallel_set(G: Domain, s: float) -> ParallelSet:
    if s < 0:
        raise InputError("parallel distance must be nonnegative")
    if s >= G.rho:
        warnings.warn(
            f"s={s} >= rho={G.rho}: the parallel set may be empty or disconnected",
            stacklevel=2,
        )
    return ParallelSet(G, float(s))


def interior_ball_radius(G: Domain) -> float:
    return G.rho


# --------------------------------------------------------------------------
# JSON domain files
# --------------------------------------------------------------------------

_FIELDS = {
    "disk": {"center", "radius"},
    "ellipse": {"center", "semi_axes", "angle"},
    "fourier_disk": {"center", "radius", "cos", "sin", "angle"},
    "polygon": {"vertices"},
    "union": {"members"},
}


def domain_from_dict(doc: dict, where: str = "domain") -> Domain:
    if not isinstance(doc, dict):
        raise InputError(f"{where}: expected an object")
    extra = set(doc) - {"kind", "params"}
    if extra:
        raise InputError(f"{where}: unknown field(s) {sorted(extra)}")
    kind = doc.get("kind")
    if kind not in _FIELDS:
        raise InputError(f"{where}.kind: unknown kind {kind!r}; expected one of {sorted(_FIELDS)}")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise InputError(f"{where}.params: expected an object")
    extra = set(params) - _FIELDS[kind]
    if extra:
        raise InputError(f"{where}.params: unknown field(s) {sorted(extra)} for kind {kind!r}")
    try:
        if kind == "disk":
            return Disk(tuple(params.get("center", (0.0, 0.0))), float(params["radius"]))
        if kind == "ellipse":
            return Ellipse(
                tuple(params.get("center", (0.0, 0.0))),
                tuple(params["semi_axes"]),
                float(params.get("angle", 0.0)),
            )
        if kind == "fourier_disk":
            return FourierDisk(
                tuple(params.get("center", (0.0, 0.0))),
                float(params.get("radius", 1.0)),
                params.get("cos", {}),
                params.get("sin", {}),
                float(params.get("angle", 0.0)),
            )
        if kind == "polygon":
            return Polygon(params["vertices"])
        members = params["members"]
        return Union(tuple(domain_from_dict(m, f"{where}.params.members[{i}]") for i, m in enumerate(members)))
    except KeyError as exc:
        raise InputError(f"{where}.params: missing required field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError) and str(exc).startswith(where):
            raise
        raise InputError(f"{where}.params: {exc}") from None


def load_domain(path: str | Path) -> Domain:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return domain_from_dict(doc, where=str(path))


def sample_points_in_bbox(G: Domain, n: int, seed: int = 0, pad: float = 0.0) -> np.ndarray:
    x0, y0, x1, y1 = G.bbox
    rng = np.random.default_rng(seed)
    lo = np.array([x0 - pad, y0 - pad])
    hi = np.array([x1 + pad, y1 + pad])
    return lo + rng.random((n, 2)) * (hi - lo)


def as_direction(omega: Sequence[float] | float) -> np.ndarray:
    """Unit vector from a 2-vector or an angle in radians."""
    if np.ndim(omega) == 0:
        return np.array([math.cos(float(omega)), math.sin(float(omega))])
    return _unit(omega)
