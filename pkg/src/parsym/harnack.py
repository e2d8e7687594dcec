"""Numerical checks of Harnack inequalities and construction of ball chains."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .constants import semilinear_harnack_constant
from .errors import InputError, NoPath, NotHarmonic, NotSolution
from .geometry import Disk, Domain
from .grid import ScalarField, from_function, interpolate, rasterize


def harnack_factors(N: int, r: float, d: float) -> tuple[float, float]:
    """Harnack factors at distance ``d`` from the center of a ball of radius ``r``.

    ``lower = r^(N-2) (r-d) / (r+d)^(N-1)`` and ``upper = r^(N-2) (r+d) / (r-d)^(N-1)``.
    """
    if r <= 0:
        raise InputError("radius must be positive")
    if not 0 <= d < r:
        raise InputError(f"need 0 <= d < r, got d={d}, r={r}")
    lower = r ** (N - 2) * (r - d) / (r + d) ** (N - 1)
    upper = r ** (N - 2) * (r + d) / (r - d) ** (N - 1)
    return lower, upper


def _laplacian(w: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """5-point Laplacian and the mask of nodes whose four neighbours are inside."""
    v = w.values
    h = w.h
    ok = w.mask.inside.copy()
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ok &= np.roll(w.mask.inside, (-di, -dj), axis=(0, 1))
    lap = (np.roll(v, -1, 0) + np.roll(v, 1, 0) + np.roll(v, -1, 1) + np.roll(v, 1, 1) - 4.0 * v) / (h * h)
    return lap, ok


def _ball_nodes(w: ScalarField, center, r: float) -> np.ndarray:
    d = np.linalg.norm(w.mask.nodes - np.asarray(center, float), axis=-1)
    return w.mask.inside & (d <= r)


@dataclass(frozen=True)
class HarnackCheck:
    passed: bool
    w0: float
    ratio_min: float
    ratio_max: float
    lower: float
    upper: float
    residual: float

    def __bool__(self) -> bool:
        return self.passed


def verify_pointwise_harnack(
    w: ScalarField, center, r: float, *, N: int = 2, residual_tol: float = 1e-8, slack: float | None = None
) -> HarnackCheck:
    """Check ``lower w(x0) <= w(x) <= upper w(x0)`` at every node of the closed half ball.

    ``w`` must be nonnegative and discrete-harmonic on ``B_r(center)``; the
    residual ``h^2 |Delta_h w| / max|w|`` is compared with ``residual_tol``.
    The inequality is relaxed by ``slack * w(x0)`` with ``slack = 5h`` by default.
    """
    if slack is None:
        slack = 5.0 * w.h
    ball = _ball_nodes(w, center, r)
    lap, ok = _laplacian(w)
    interior = ball & ok
    scale = max(float(np.abs(w.values[ball]).max()), 1e-300) if ball.any() else 1.0
    res = float(np.abs(lap[interior]).max()) * w.h**2 / scale if interior.any() else 0.0
    if res > residual_tol:
        raise NotHarmonic(f"relative discrete residual {res:.3e} exceeds {residual_tol:.1e}")
    if ball.any() and float(w.values[ball].min()) < 0:
        raise InputError("w must be nonnegative on the ball")
    w0 = float(interpolate(w, np.asarray(center, float)[None, :], order=3)[0])
    half = _ball_nodes(w, center, r / 2.0)
    lower, upper = harnack_factors(N, r, r / 2.0)
    vals = w.values[half]
    rmin = float(vals.min() / w0)
    rmax = float(vals.max() / w0)
    passed = bool(np.all(vals >= (lower - slack) * w0) and np.all(vals <= (upper + slack) * w0))
    return HarnackCheck(passed, w0, rmin, rmax, lower, upper, res)


def random_positive_harmonic(rng: np.random.Generator, degree: int = 3):
    """Real part of a random complex polynomial, shifted so that its minimum on the unit disk is 0.1 or more."""
    deg = int(rng.integers(0, degree + 1))
    coef = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
    # on the closed unit disk |Re p| <= sum |c_k|, which bounds the shift
    shift = float(np.sum(np.abs(coef))) + 0.1

    def fn(p):
        z = p[..., 0] + 1j * p[..., 1]
        return np.real(np.polyval(coef[::-1], z)) + shift

    return fn, coef, shift


@dataclass
class SuiteResult:
    n_cases: int
    n_passed: int
    failures: list = field(default_factory=list)
    ratio_min: float = math.inf
    ratio_max: float = 0.0

    @property
    def passed(self) -> bool:
        return self.n_passed == self.n_cases


def positive_harmonic_suite(n_cases: int = 1000, seed: int = 42, h: float = 1.0 / 64) -> SuiteResult:
    """Run the pointwise Harnack check on seeded random positive harmonic polynomials on the unit disk."""
    mask = rasterize(Disk((0.0, 0.0), 1.0), h)
    children = np.random.SeedSequence(seed).spawn(n_cases)
    out = SuiteResult(n_cases, 0)
    for k, ss in enumerate(children):
        rng = np.random.default_rng(ss)
        fn, _, _ = random_positive_harmonic(rng)
        w = from_function(mask, fn)
        rad = rng.uniform(0.0, 0.5)
        ang = rng.uniform(0.0, 2 * math.pi)
        c = rad * np.array([math.cos(ang), math.sin(ang)])
        r = rng.uniform(0.2, 0.98 - rad)
        chk = verify_pointwise_harnack(w, c, r)
        out.ratio_min = min(out.ratio_min, chk.ratio_min)
        out.ratio_max = max(out.ratio_max, chk.ratio_max)
        if chk.passed:
            out.n_passed += 1
        else:
            out.failures.append({"case": k, "center": c.tolist(), "r": r, "ratios": (chk.ratio_min, chk.ratio_max)})
    return out


def chain_bound(N: int, diam2: float, R: float) -> float:
    """Upper bound ``(2 diam2)^N / R^N`` on the number of balls in a chain."""
    if diam2 <= 0 or R <= 0:
        raise InputError("diameters and R must be positive")
    return (2.0 * diam2) ** N / R**N


@dataclass(frozen=True, eq=False)
class HarnackChain:
    centers: np.ndarray
    radius: float  # R / 4
    y: tuple
    z: tuple
    R: float
    D1: Domain | None
    D2: Domain
    halfplane: tuple | None
    path: np.ndarray

    @property
    def n(self) -> int:
        return len(self.centers)

    def margin(self, p) -> np.ndarray:
        return _margin(self.D2, self.halfplane, np.atleast_2d(p))

    def audit(self, tol: float = 1e-9) -> dict:
        P = self.centers
        R = self.R
        d = np.linalg.norm(P[:, None] - P[None], axis=-1)
        iu = np.triu_indices(len(P), 1)
        disjoint = bool(np.all(d[iu] >= R / 2 - tol)) if len(P) > 1 else True
        adjacent = bool(np.all(np.diag(d, 1) <= R / 2 + tol)) if len(P) > 1 else True
        ends = bool(
            np.linalg.norm(P[0] - np.asarray(self.y)) <= tol
            and np.linalg.norm(P[-1] - np.asarray(self.z)) <= R / 4 + tol
        )
        h = float(np.max(np.linalg.norm(np.diff(self.path, axis=0), axis=1))) if len(self.path) > 1 else 0.0
        margin = bool(np.all(self.margin(P) >= R / 2 - h - tol))
        bound = chain_bound(2, self.D2.diameter, R)
        count = self.n <= bound
        return {
            "disjoint": disjoint,
            "adjacent": adjacent,
            "endpoints": ends,
            "margin": margin,
            "count": count,
            "n": self.n,
            "bound": bound,
            "ok": disjoint and adjacent and ends and margin and count,
        }


def _margin(D2: Domain, halfplane, p: np.ndarray) -> np.ndarray:
    m = -D2.sdf(p)
    if halfplane is not None:
        w, lam = halfplane
        m = np.minimum(m, p @ np.asarray(w, float) - lam)
    return m


def _grid_path(D2: Domain, halfplane, R: float, y: np.ndarray, z: np.ndarray, h: float) -> np.ndarray:
    x0, y0, x1, y1 = D2.bbox
    xs = np.arange(x0 - h, x1 + 2 * h, h)
    ys = np.arange(y0 - h, y1 + 2 * h, h)
    G = np.stack(np.meshgrid(xs, ys, indexing="ij"), -1)
    ok = _margin(D2, halfplane, G.reshape(-1, 2)).reshape(G.shape[:2]) >= R / 2
    nx, ny = ok.shape
    idx = -np.ones(ok.shape, int)
    idx[ok] = np.arange(ok.sum())
    pts = G[ok]
    rows, cols, wts = [], [], []
    for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
        # node (i, j) in sa is linked to (i + di, j + dj) in sb
        sa = (slice(0, nx - di), slice(max(0, -dj), ny - max(0, dj)))
        sb = (slice(di, nx), slice(max(0, dj), ny + min(0, dj)))
        pair = ok[sa] & ok[sb]
        rows.append(idx[sa][pair])
        cols.append(idx[sb][pair])
        wts.append(np.full(pair.sum(), h * math.hypot(di, dj)))
    n = len(pts)
    A = coo_matrix((np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()
    iy = int(np.argmin(np.linalg.norm(pts - y, axis=1)))
    iz = int(np.argmin(np.linalg.norm(pts - z, axis=1)))
    dist, pred = dijkstra(A, directed=False, indices=iy, return_predecessors=True)
    if not np.isfinite(dist[iz]):
        raise NoPath("the eroded region does not connect y to z")
    seq = [iz]
    while seq[-1] != iy:
        seq.append(int(pred[seq[-1]]))
    return np.vstack([y, pts[seq[::-1]], z])


def _last_crossing(path: np.ndarray, start: int, c: np.ndarray, rad: float):
    """Last point along ``path[start:]`` at distance exactly ``rad`` from ``c``; ``None`` if the path ends inside."""
    d = np.linalg.norm(path - c, axis=1)
    if d[-1] <= rad:
        return None
    outside = d > rad
    # last segment that enters the exterior for good
    k = len(path) - 1
    while k > start and outside[k - 1]:
        k -= 1
    a, b = path[k - 1], path[k]
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(a + mid * (b - a) - c) > rad:
            hi = mid
        else:
            lo = mid
    p = a + hi * (b - a)
    p = c + rad * (p - c) / np.linalg.norm(p - c)
    return p, k


def build_chain(
    D1: Domain | None,
    D2: Domain,
    R: float,
    y,
    z,
    *,
    halfplane: tuple | None = None,
    h: float | None = None,
) -> HarnackChain:
    """Chain of disjoint balls of radius ``R/4`` from ``y`` to ``z`` with consecutive closures touching.

    A shortest path is computed on the grid graph of the region at distance at
    least ``R/2`` from the boundary of ``D2`` (intersected with the optional
    half-plane ``x . omega > lam``); centers are then placed at successive last
    crossings of circles of radius ``R/2``, which makes the balls pairwise
    disjoint by construction.
    """
    if R <= 0:
        raise InputError("R must be positive")
    y = np.asarray(y, float)
    z = np.asarray(z, float)
    for name, p in (("y", y), ("z", z)):
        if _margin(D2, halfplane, p[None])[0] < R / 2 - 1e-12:
            raise InputError(f"{name} is closer than R/2 to the boundary of the host region")
    if h is None:
        h = R / 16.0
    if np.linalg.norm(y - z) <= R / 4:
        return HarnackChain(y[None].copy(), R / 4, tuple(y), tuple(z), R, D1, D2, halfplane, np.vstack([y, z]))
    path = _grid_path(D2, halfplane, R, y, z, h)
    centers = [y]
    k = 0
    while np.linalg.norm(z - centers[-1]) > R / 4:
        nxt = _last_crossing(path, k, centers[-1], R / 2)
        if nxt is None:
            c = centers[-1]
            nxt_c = c + (R / 2) * (z - c) / np.linalg.norm(z - c)
            centers.append(nxt_c)
            break
        p, k = nxt
        centers.append(p)
        path[k - 1] = p
    return HarnackChain(np.array(centers), R / 4, tuple(y), tuple(z), R, D1, D2, halfplane, path)


@dataclass(frozen=True)
class SemilinearHarnackCheck:
    passed: bool
    sup: float
    inf: float
    constant: float
    c_max: float


def verify_semilinear_harnack(
    w: ScalarField, center, r: float, L: float, *, N: int = 2, rel_tol: float = 1e-3, slack: float | None = None
) -> SemilinearHarnackCheck:
    """Check ``sup w <= C inf w`` on ``B_{r/4}`` for ``Delta w + c w = 0`` with ``|c| <= L``.

    ``c = -Delta_h w / w`` is recovered node-wise on ``B_r``; a value above
    ``L (1 + rel_tol) + rel_tol`` means ``w`` is not a solution of such an equation.
    """
    if slack is None:
        slack = 5.0 * w.h
    ball = _ball_nodes(w, center, r)
    lap, ok = _laplacian(w)
    sel = ball & ok
    vals = w.values[sel]
    if np.any(vals <= 0):
        raise NotSolution("w must be positive on the ball")
    c = -lap[sel] / vals
    cmax = float(np.abs(c).max()) if c.size else 0.0
    if cmax > L * (1 + rel_tol) + rel_tol:
        raise NotSolution(f"recovered |c| = {cmax:.4g} exceeds L = {L}")
    q = _ball_nodes(w, center, r / 4)
    sup = float(w.values[q].max())
    inf = float(w.values[q].min())
    C = semilinear_harnack_constant(N, r, L)
    return SemilinearHarnackCheck(bool(sup <= C * inf * (1 + slack)), sup, inf, C, cmax)
