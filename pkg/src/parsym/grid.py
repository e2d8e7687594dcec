"""Uniform Cartesian grids: rasterization with cut-cell legs, scalar fields, interpolation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import EmptyDomain, InputError, OutOfDomain
from .geometry import Domain

EXTERIOR, BOUNDARY_ADJACENT, INTERIOR = 0, 1, 2

# neighbour offsets, in the order the leg array stores them: +x, -x, +y, -y
DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True, eq=False)
class GridMask:
    origin: np.ndarray
    h: float
    inside: np.ndarray  # bool (nx, ny)
    legs: np.ndarray  # float (nx, ny, 4), fraction of h to the boundary (1 where the neighbour is inside)
    domain: Domain

    @property
    def shape(self) -> tuple[int, int]:
        return self.inside.shape

    @cached_property
    def kind(self) -> np.ndarray:
        k = np.zeros(self.shape, dtype=np.int8)
        k[self.inside] = BOUNDARY_ADJACENT
        k[self.inside & np.all(self.legs >= 1.0, axis=-1)] = INTERIOR
        return k

    @cached_property
    def nodes(self) -> np.ndarray:
        """Coordinates of every node, shape ``(nx, ny, 2)``."""
        nx, ny = self.shape
        xs = self.origin[0] + self.h * np.arange(nx)
        ys = self.origin[1] + self.h * np.arange(ny)
        return np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)

    @cached_property
    def index(self) -> np.ndarray:
        """Unknown number of each inside node, -1 elsewhere (row-major order)."""
        idx = -np.ones(self.shape, dtype=np.int64)
        idx[self.inside] = np.arange(int(self.inside.sum()))
        return idx

    @property
    def n_inside(self) -> int:
        return int(self.inside.sum())

    @property
    def n_interior(self) -> int:
        return int((self.kind == INTERIOR).sum())

    def neighbour_inside(self, d: int) -> np.ndarray:
        di, dj = DIRECTIONS[d]
        return np.roll(self.inside, (-di, -dj), axis=(0, 1))


def rasterize(domain: Domain, h: float, pad: int = 3) -> GridMask:
    """Classify grid nodes against ``domain`` and compute Shortley-Weller legs.

    Nodes sit at integer multiples of ``h`` so that grids of different domains
    with the same spacing are aligned.
    """
    if not h > 0:
        raise InputError(f"grid spacing must be positive, got {h}")
    x0, y0, x1, y1 = domain.bbox
    i0 = int(np.floor(x0 / h)) - pad
    j0 = int(np.floor(y0 / h)) - pad
    nx = int(np.ceil(x1 / h)) + pad - i0 + 1
    ny = int(np.ceil(y1 / h)) + pad - j0 + 1
    origin = np.array([i0 * h, j0 * h])
    xs = origin[0] + h * np.arange(nx)
    ys = origin[1] + h * np.arange(ny)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    inside = np.asarray(domain.level(pts.reshape(-1, 2)) < 0.0).reshape(nx, ny)
    inside[0, :] = inside[-1, :] = inside[:, 0] = inside[:, -1] = False

    legs = np.ones((nx, ny, 4))
    for d, (di, dj) in enumerate(DIRECTIONS):
        nb = np.roll(inside, (-di, -dj), axis=(0, 1))
        cut = inside & ~nb
        if not np.any(cut):
            continue
        a = pts[cut]
        step = h * np.array([di, dj], dtype=float)
        lo = np.zeros(len(a))
        hi = np.ones(len(a))
        while np.max(hi - lo) > 1e-10:
            mid = 0.5 * (lo + hi)
            inn = domain.level(a + mid[:, None] * step) < 0.0
            lo = np.where(inn, mid, lo)
            hi = np.where(inn, hi, mid)
        legs[cut, d] = np.clip(0.5 * (lo + hi), 1e-12, 1.0)
    mask = GridMask(origin, float(h), inside, legs, domain)
    if mask.n_interior == 0:
        raise EmptyDomain(f"no interior grid node at h={h}")
    return mask


def connected_components(mask_array: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected labelling of a boolean node array."""
    return ndimage.label(mask_array)


def _lagrange4(t: np.ndarray) -> np.ndarray:
    return np.stack(
        [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ],
        axis=-1,
    )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Node values on the inside nodes of a mask.

    ``boundary_value`` is the Dirichlet datum used between the last inside node
    and the boundary (and as the value outside the domain); ``None`` means no
    boundary data is known and such queries raise :class:`OutOfDomain`.
    """

    mask: GridMask
    values: np.ndarray
    boundary_value: float | None = 0.0

    def __post_init__(self):
        v = np.where(self.mask.inside, np.asarray(self.values, dtype=float), 0.0)
        if not np.all(np.isfinite(v)):
            raise InputError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def h(self) -> float:
        return self.mask.h

    def __call__(self, x, order: int = 1) -> np.ndarray:
        return interpolate(self, x, order=order)

    def scaled(self, alpha: float) -> "ScalarField":
        bv = None if self.boundary_value is None else alpha * self.boundary_value
        return ScalarField(self.mask, alpha * self.values, bv)

    def inside_values(self) -> np.ndarray:
        return self.values[self.mask.inside]

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.inside_values())))

    def to_csv(self, path: str | Path) -> None:
        write_field_csv(self, path)


def from_function(mask: GridMask, fn, boundary_value: float | None = None) -> ScalarField:
    """Sample ``fn(points)`` at the inside nodes."""
    vals = np.zeros(mask.shape)
    vals[mask.inside] = fn(mask.nodes[mask.inside])
    return ScalarField(mask, vals, boundary_value)


def interpolate(f: ScalarField, x, order: int = 1) -> np.ndarray:
    """Evaluate ``f`` at arbitrary points.

    ``order=1`` is bilinear; ``order=3`` uses the tensor 4-point Lagrange
    stencil where all 16 nodes are inside and falls back to order 1 elsewhere.
    Cells cut by the boundary use an affine fit through the inside corners and
    the cut points carrying the boundary value.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    pts = x.reshape(-1, 2)
    m = f.mask
    nx, ny = m.shape
    fi = (pts - m.origin) / m.h
    # snap round-off offsets so that queries at nodes reproduce nodal values exactly
    near = np.rint(fi)
    fi = np.where(np.abs(fi - near) < 1e-9, near, fi)
    if np.any(fi[:, 0] < 0) or np.any(fi[:, 1] < 0) or np.any(fi[:, 0] > nx - 1) or np.any(fi[:, 1] > ny - 1):
        raise OutOfDomain("query point outside the grid bounding box")
    out = np.full(len(pts), np.nan)
    todo = np.ones(len(pts), dtype=bool)

    if order == 3:
        i0 = np.floor(fi).astype(int)
        t = fi - i0
        ok = (i0[:, 0] >= 1) & (i0[:, 1] >= 1) & (i0[:, 0] <= nx - 3) & (i0[:, 1] <= ny - 3)
        if np.any(ok):
            ii = i0[ok]
            offs = np.arange(-1, 3)
            I = ii[:, 0, None, None] + offs[None, :, None]
            J = ii[:, 1, None, None] + offs[None, None, :]
            I, J = np.broadcast_arrays(I, J)
            full = np.all(m.inside[I, J], axis=(1, 2))
            wx = _lagrange4(t[ok, 0])
            wy = _lagrange4(t[ok, 1])
            val = np.einsum("na,nb,nab->n", wx, wy, f.values[I, J])
            sel = np.flatnonzero(ok)[full]
            out[sel] = val[full]
            todo[sel] = False
    elif order != 1:
        raise InputError("interpolation order must be 1 or 3")

    if np.any(todo):
        q = np.flatnonzero(todo)
        fq = fi[q]
        i0 = np.clip(np.floor(fq[:, 0]).astype(int), 0, nx - 2)
        j0 = np.clip(np.floor(fq[:, 1]).astype(int), 0, ny - 2)
        tx = fq[:, 0] - i0
        ty = fq[:, 1] - j0
        w = np.stack([(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty], axis=-1)
        ci = np.stack([i0, i0 + 1, i0, i0 + 1], axis=-1)
        cj = np.stack([j0, j0, j0 + 1, j0 + 1], axis=-1)
        cin = m.inside[ci, cj]
        good = np.all(cin | (w == 0.0), axis=1)
        out[q[good]] = np.sum(w[good] * f.values[ci[good], cj[good]], axis=1)
        bad = q[~good]
        if len(bad):
            if f.boundary_value is None:
                raise OutOfDomain("interpolation stencil reaches outside the domain and no boundary value is known")
            lev = m.domain.level(pts[bad])
            outside = lev >= 0.0
            out[bad[outside]] = f.boundary_value
            for k in bad[~outside]:
                out[k] = _cut_cell_value(f, pts[k])
    return out.reshape(shape)


def _cut_cell_value(f: ScalarField, p: np.ndarray) -> float:
    m = f.mask
    h = m.h
    fi = (p - m.origin) / h
    i0, j0 = int(np.floor(fi[0])), int(np.floor(fi[1]))
    corners = [(i0, j0), (i0 + 1, j0), (i0, j0 + 1), (i0 + 1, j0 + 1)]
    # cell edges as (corner a, corner b, direction index from a to b)
    edges = [(0, 1, 0), (2, 3, 0), (0, 2, 2), (1, 3, 2)]
    opposite = {0: 1, 2: 3}
    xs, zs = [], []
    for i, j in corners:
        if m.inside[i, j]:
            xs.append(m.nodes[i, j])
            zs.append(f.values[i, j])
    for a, b, d in edges:
        (ia, ja), (ib, jb) = corners[a], corners[b]
        ina, inb = m.inside[ia, ja], m.inside[ib, jb]
        if ina and not inb:
            step = h * np.array(DIRECTIONS[d], float)
            xs.append(m.nodes[ia, ja] + m.legs[ia, ja, d] * step)
            zs.append(f.boundary_value)
        elif inb and not ina:
            dd = opposite[d]
            step = h * np.array(DIRECTIONS[dd], float)
            xs.append(m.nodes[ib, jb] + m.legs[ib, jb, dd] * step)
            zs.append(f.boundary_value)
    xs = np.asarray(xs)
    zs = np.asarray(zs, dtype=float)
    if len(xs) >= 3:
        A = np.column_stack([np.ones(len(xs)), (xs - p) / h])
        coef, _, rank, _ = np.linalg.lstsq(A, zs, rcond=None)
        if rank == 3:
            return float(coef[0])
    d = np.linalg.norm(xs - p, axis=1) + 1e-300
    wts = 1.0 / d
    return float(np.sum(wts * zs) / np.sum(wts))


def gradient(f: ScalarField, x, order: int = 1) -> np.ndarray:
    """Central differences of the interpolated field with step ``h``."""
    x = np.asarray(x, dtype=float)
    h = f.h
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    gx = (interpolate(f, x + ex, order) - interpolate(f, x - ex, order)) / (2 * h)
    gy = (interpolate(f, x + ey, order) - interpolate(f, x - ey, order)) / (2 * h)
    return np.stack([gx, gy], axis=-1)


def _neighbour_values(f: ScalarField, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Value toward direction ``d`` and its distance, using the cut point when the neighbour is outside."""
    m = f.mask
    di, dj = DIRECTIONS[d]
    nb_val = np.roll(f.values, (-di, -dj), axis=(0, 1))
    nb_in = m.neighbour_inside(d)
    bv = 0.0 if f.boundary_value is None else f.boundary_value
    val = np.where(nb_in, nb_val, bv)
    dist = np.where(nb_in, 1.0, m.legs[..., d]) * m.h
    return val, dist


def nodal_derivatives(f: ScalarField) -> dict[str, np.ndarray]:
    """Second-order (non-uniform) first and second derivatives at inside nodes."""
    u = f.values
    out = {}
    for axis, (dp, dm) in enumerate(((0, 1), (2, 3))):
        up, hp = _neighbour_values(f, dp)
        um, hm = _neighbour_values(f, dm)
        d1 = ((up - u) / hp * hm + (u - um) / hm * hp) / (hp + hm)
        d2 = 2.0 / (hp + hm) * ((up - u) / hp - (u - um) / hm)
        name = "xy"[axis]
        out[name] = np.where(f.mask.inside, d1, 0.0)
        out[name * 2] = np.where(f.mask.inside, d2, 0.0)
    ins = f.mask.inside
    full = ins.copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            full &= np.roll(ins, (-di, -dj), axis=(0, 1))
    upp = np.roll(u, (-1, -1), axis=(0, 1))
    umm = np.roll(u, (1, 1), axis=(0, 1))
    upm = np.roll(u, (-1, 1), axis=(0, 1))
    ump = np.roll(u, (1, -1), axis=(0, 1))
    out["xy_mixed"] = np.where(full, (upp + umm - upm - ump) / (4 * f.h**2), 0.0)
    out["full_stencil"] = full
    return out


def max_gradient_norm(f: ScalarField) -> float:
    d = nodal_derivatives(f)
    g = np.hypot(d["x"], d["y"])
    return float(g[f.mask.inside].max())


def c2_norm(f: ScalarField) -> float:
    """``max|u| + max|Du| + max|D^2 u|`` with the Hessian measured in spectral norm."""
    d = nodal_derivatives(f)
    full = d["full_stencil"]
    uxx, uyy, uxy = d["xx"][full], d["yy"][full], d["xy_mixed"][full]
    half_tr = 0.5 * (uxx + uyy)
    rad = np.sqrt((0.5 * (uxx - uyy)) ** 2 + uxy**2)
    hess = np.max(np.abs(half_tr) + rad) if full.any() else 0.0
    return f.max_abs() + max_gradient_norm(f) + float(hess)


def write_field_csv(f: ScalarField, path: str | Path) -> None:
    m = f.mask
    ii, jj = np.nonzero(m.inside)  # row-major: ix outer, iy inner
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ix", "iy", "x", "y", "value"])
        for i, j in zip(ii, jj):
            x, y = m.nodes[i, j]
            w.writerow([int(i), int(j), f"{x:.12g}", f"{y:.12g}", f"{f.values[i, j]:.12g}"])
