"""Shortley-Weller finite differences for the torsion and semilinear Dirichlet problems."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import InputError, NegativeSolution, NonConvergence
from .geometry import Domain
from .grid import DIRECTIONS, GridMask, ScalarField, rasterize

log = logging.getLogger(__name__)


@dataclass
class SemilinearProblem:
    """``Delta u + f(u) = 0`` in the domain, ``u = 0`` on its boundary.

    ``L`` is the Lipschitz constant of ``f`` on ``[0, max u]``; when omitted it
    is estimated by sampling once a solution is known. ``d0`` is a claimed lower
    bound for ``-du/dnu`` on the outer boundary.
    """

    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray] | None = None
    L: float | None = None
    d0: float | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        f0 = float(np.asarray(self.f(np.zeros(1)))[0])
        if f0 < 0:
            raise InputError(f"f(0) must be nonnegative, got {f0}")
        if self.L is not None and self.L < 0:
            raise InputError("Lipschitz constant must be nonnegative")

    def derivative(self, u: np.ndarray) -> np.ndarray:
        if self.df is not None:
            return np.asarray(self.df(u), dtype=float)
        eps = 1e-6 * np.maximum(1.0, np.abs(u))
        return (self.f(u + eps) - self.f(u - eps)) / (2 * eps)

    def lipschitz(self, u_max: float, n: int = 1024) -> float:
        if self.L is not None:
            return self.L
        s = np.linspace(0.0, max(u_max, 1e-12), n)
        return float(np.max(np.abs(self.derivative(s))))


def _affine(a: float, b: float) -> SemilinearProblem:
    return SemilinearProblem(lambda u: a + b * u, lambda u: np.full_like(u, b), name="affine", params={"a": a, "b": b})


def _exponential(lam: float) -> SemilinearProblem:
    return SemilinearProblem(lambda u: lam * np.exp(u), lambda u: lam * np.exp(u), name="exponential", params={"lam": lam})


def _power(a: float, p: float) -> SemilinearProblem:
    return SemilinearProblem(
        lambda u: a * (1.0 + u) ** p,
        lambda u: a * p * (1.0 + u) ** (p - 1),
        name="power",
        params={"a": a, "p": p},
    )


NONLINEARITIES = {
    "constant": lambda c=1.0: _affine(c, 0.0),
    "affine": _affine,
    "exponential": _exponential,
    "power": _power,
}


def make_problem(name: str, **params) -> SemilinearProblem:
    try:
        factory = NONLINEARITIES[name]
    except KeyError:
        raise InputError(f"unknown nonlinearity {name!r}; known: {sorted(NONLINEARITIES)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise InputError(f"bad parameters for nonlinearity {name!r}: {exc}") from None


@dataclass
class SolveStats:
    iterations: int
    residual: float
    converged: bool
    method: str
    n_unknowns: int
    h: float
    min_leg: float
    history: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class LaplaceSystem:
    """``A`` approximates ``-Delta`` on the inside nodes; ``bnd`` collects the boundary-neighbour weights."""

    mask: GridMask
    A: sp.csc_matrix
    bnd: np.ndarray
    row_scale: np.ndarray


def laplace_system(mask: GridMask) -> LaplaceSystem:
    h = mask.h
    idx = mask.index
    ins = mask.inside
    n = mask.n_inside
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    bnd = np.zeros(n)
    me = idx[ins]
    for dp, dm in ((0, 1), (2, 3)):
        tp = mask.legs[..., dp][ins]
        tm = mask.legs[..., dm][ins]
        ap = 2.0 / (tp * (tp + tm) * h * h)
        am = 2.0 / (tm * (tp + tm) * h * h)
        diag += ap + am
        for d, a in ((dp, ap), (dm, am)):
            di, dj = DIRECTIONS[d]
            nb_in = mask.neighbour_inside(d)[ins]
            nb_idx = np.roll(idx, (-di, -dj), axis=(0, 1))[ins]
            rows.append(me[nb_in])
            cols.append(nb_idx[nb_in])
            vals.append(-a[nb_in])
            bnd += np.where(nb_in, 0.0, a)
    rows.append(me)
    cols.append(me)
    vals.append(diag)
    A = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    row_scale = np.maximum(1.0, diag * h * h / 4.0)
    return LaplaceSystem(mask, A, bnd, row_scale)


def _as_mask(domain_or_mask, h: float | None) -> GridMask:
    if isinstance(domain_or_mask, GridMask):
        return domain_or_mask
    if not isinstance(domain_or_mask, Domain):
        raise InputError("expected a Domain or a GridMask")
    if h is None:
        h = domain_or_mask.diameter / 256.0
    return rasterize(domain_or_mask, h)


def _field(mask: GridMask, x: np.ndarray) -> ScalarField:
    vals = np.zeros(mask.shape)
    vals[mask.inside] = x
    return ScalarField(mask, vals, 0.0)


def _residual(system: LaplaceSystem, x: np.ndarray, rhs: np.ndarray) -> float:
    r = (system.A @ x - rhs) / system.row_scale
    return float(np.max(np.abs(r))) if len(r) else 0.0


def _solve_linear(system: LaplaceSystem, lu, rhs: np.ndarray, tol: float, max_refine: int = 8):
    x = lu.solve(rhs)
    res = _residual(system, x, rhs)
    k = 0
    while res > tol and k < max_refine:
        x = x + lu.solve(rhs - system.A @ x)
        new = _residual(system, x, rhs)
        k += 1
        if new >= res:
            res = new
            break
        res = new
    return x, res, k


def solve_torsion(
    omega: Domain | GridMask, h: float | None = None, tol: float = 1e-10, rhs: float = 1.0
) -> tuple[ScalarField, SolveStats]:
    """Solve ``-Delta u = rhs`` with ``u = 0`` on the boundary.

    The residual is measured row-equilibrated: rows of cut cells are divided by
    ``max(1, A_ii h^2 / 4)`` so that tiny Shortley-Weller legs do not inflate it.
    """
    mask = _as_mask(omega, h)
    system = laplace_system(mask)
    lu = splu(system.A)
    b = np.full(mask.n_inside, float(rhs))
    x, res, k = _solve_linear(system, lu, b, tol)
    stats = SolveStats(1 + k, res, res <= tol, "direct", mask.n_inside, mask.h, float(mask.legs[mask.inside].min()))
    if res > tol:
        raise NonConvergence(f"linear residual {res:.3e} above tolerance {tol:.1e}")
    return _field(mask, x), stats


def solve_semilinear(
    omega: Domain | GridMask,
    problem: SemilinearProblem,
    h: float | None = None,
    tol: float = 1e-8,
    damping: float = 0.5,
    max_iter: int = 10_000,
) -> tuple[ScalarField, SolveStats]:
    """Damped Picard iteration ``u <- (1-b) u + b A^{-1} f(u)``, with a Newton fallback on stalls."""
    mask = _as_mask(omega, h)
    system = laplace_system(mask)
    lu = splu(system.A)
    A = system.A
    u = lu.solve(np.ones(mask.n_inside))  # positive start away from the trivial solution
    history = []
    method = "picard"
    res = math.inf
    best = math.inf
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        fu = problem.f(u)
        res = _residual(system, u, fu)
        history.append(res)
        if not np.isfinite(res) or res > 1e12 or np.max(np.abs(u)) > 1e12:
            raise NonConvergence(f"Picard iteration diverged at step {it} (residual {res:.3e})")
        if res <= tol:
            break
        if it > 5 and res > 1e3 * min(history):
            raise NonConvergence(f"Picard iteration diverging at step {it} (residual {res:.3e})")
        if res < 0.999 * best:
            best = res
            stall = 0
        else:
            stall += 1
        if stall >= 50:
            method = "newton"
            break
        u = (1.0 - damping) * u + damping * lu.solve(fu)
    if method == "newton":
        log.info("Picard stalled at residual %.3e; switching to Newton", res)
        for k in range(1, 101):
            fu = problem.f(u)
            res = _residual(system, u, fu)
            history.append(res)
            if res <= tol:
                break
            J = (A - sp.diags(problem.derivative(u))).tocsc()
            du = splu(J).solve(fu - A @ u)
            u = u + du
            if not np.all(np.isfinite(u)):
                raise NonConvergence("Newton iteration produced non-finite values")
            it += 1
    if res > tol:
        raise NonConvergence(f"semilinear residual {res:.3e} above tolerance {tol:.1e} after {it} steps")
    if u.min() < -tol:
        raise NegativeSolution(f"solution has negative values (min {u.min():.3e})")
    if u.max() <= tol:
        raise NonConvergence("iteration collapsed onto the trivial solution u = 0")
    stats = SolveStats(it, res, True, method, mask.n_inside, mask.h, float(mask.legs[mask.inside].min()), history)
    return _field(mask, u), stats


def residual_norm(u: ScalarField, problem: str | SemilinearProblem = "torsion") -> float:
    """Max-norm of the row-equilibrated discrete residual over inside nodes."""
    system = laplace_system(u.mask)
    x = u.values[u.mask.inside]
    if isinstance(problem, str):
        if problem != "torsion":
            raise InputError(f"unknown problem {problem!r}")
        rhs = np.ones_like(x)
    else:
        rhs = problem.f(x)
    rhs = rhs + system.bnd * (u.boundary_value or 0.0)
    return _residual(system, x, rhs)
