"""Explicit stability constants, evaluated in the log10 domain, and empirical estimators for the non-constructive ones."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from .errors import InputError, NonPositiveD0, NonPositiveK
from .geometry import Domain
from .grid import ScalarField, interpolate
from .traces import normal_derivative

Mode = Literal["formula", "empirical"]
LOG10_MAX = math.log10(np.finfo(float).max)
DEFAULT_C_DPRIME = 2.0


def _positive(**kw) -> None:
    for k, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise InputError(f"{k} must be positive and finite, got {v}")


def from_log10(x: float) -> float:
    """``10**x``, or ``inf`` when it does not fit in a double."""
    return math.inf if x > LOG10_MAX else 10.0**x


def log10_sum(a: float, b: float) -> float:
    """``log10(10**a + 10**b)`` without overflow."""
    hi, lo = max(a, b), min(a, b)
    return hi + math.log10(1.0 + 10.0 ** (lo - hi))


def c_N(N: int) -> int:
    """``3**(2**N) * 2**((N-2) * 2**N)`` as an exact integer."""
    if int(N) != N or N < 2:
        raise InputError("dimension N must be an integer >= 2")
    N = int(N)
    if N > 6:
        raise InputError("c_N is astronomically large beyond N=6; use log10_c_N")
    return 3 ** (2**N) * 2 ** ((N - 2) * 2**N)


def log10_c_N(N: int) -> float:
    if int(N) != N or N < 2:
        raise InputError("dimension N must be an integer >= 2")
    return 2**N * math.log10(3.0) + (N - 2) * 2**N * math.log10(2.0)


def log10_harnack_chain_constant(N: int, R: float, diam1: float, diam2: float) -> float:
    _positive(R=R, diam1=diam1, diam2=diam2)
    pre = 3.0 * max(2.0 ** (N - 2) * R, diam1) * 2.0 ** (N - 2)
    return math.log10(pre) + (diam2 / R) ** N * log10_c_N(N)


def harnack_chain_constant(N: int, R: float, diam1: float, diam2: float) -> float:
    """Chain constant ``3 max(2^(N-2) R, diam1) 2^(N-2) C_N^((diam2/R)^N)``; ``inf`` on overflow."""
    return from_log10(log10_harnack_chain_constant(N, R, diam1, diam2))


def log10_sup_bound_constant(
    N: int, R: float, diamG: float, rho: float, C_dprime: float = DEFAULT_C_DPRIME, log10_base: float | None = None
) -> float:
    """log10 of ``max(1, 2d/rho, 2 rho C'') max(R, d/2^(N-2)) B^((2 + d/R)^N)``.

    ``B`` defaults to ``C_N``; pass ``log10_base`` to swap in another per-ball
    Harnack constant (the semilinear one).
    """
    _positive(R=R, diamG=diamG, rho=rho, C_dprime=C_dprime)
    base = log10_c_N(N) if log10_base is None else log10_base
    pre = max(1.0, 2.0 * diamG / rho, 2.0 * rho * C_dprime) * max(R, diamG / 2.0 ** (N - 2))
    return math.log10(pre) + (2.0 + diamG / R) ** N * base


def sup_bound_constant(N: int, R: float, diamG: float, rho: float, C_dprime: float = DEFAULT_C_DPRIME) -> float:
    return from_log10(log10_sup_bound_constant(N, R, diamG, rho, C_dprime))


def log10_semilinear_harnack_constant(N: int, R: float, L: float) -> float:
    if L < 0:
        raise InputError("Lipschitz constant L must be nonnegative")
    _positive(R=R)
    return (math.sqrt(N) + math.sqrt(L * R)) * log10_c_N(N)


def semilinear_harnack_constant(N: int, R: float, L: float) -> float:
    """``C_N^(sqrt(N) + sqrt(L R))``."""
    return from_log10(log10_semilinear_harnack_constant(N, R, L))


def empirical_K(u: ScalarField, G: Domain, trace_min: float | None = None, min_dist: float | None = None) -> float:
    """Largest ``K`` with ``K dist(x, dG) + min_dG u <= u(x)`` over grid nodes of ``G``.

    Nodes closer than ``min_dist`` (default ``2h``) to ``dG`` are skipped.
    ``trace_min`` defaults to the minimum of ``u`` on 4096 boundary samples.
    """
    if trace_min is None:
        pts, _ = G.boundary(4096)
        trace_min = float(interpolate(u, pts, order=3).min())
    if min_dist is None:
        min_dist = 2.0 * u.h
    nodes = u.mask.nodes[u.mask.inside]
    d = -G.sdf(nodes)
    sel = d >= min_dist
    if not np.any(sel):
        raise InputError("no grid node of G lies at the requested distance from its boundary")
    vals = u.values[u.mask.inside][sel]
    K = float(np.min((vals - trace_min) / d[sel]))
    if K <= 0:
        raise NonPositiveK(f"empirical K = {K:.3e} is not positive")
    return K


def empirical_d0(u: ScalarField, omega: Domain, n: int = 1024) -> float:
    """``min(-du/dnu)`` over ``n`` samples of the outer boundary."""
    _, _, un = normal_derivative(u, omega, n)
    d0 = float(np.min(-un))
    if d0 <= 0:
        raise NonPositiveD0(f"-du/dnu has minimum {d0:.3e} on the outer boundary")
    return d0


@dataclass(frozen=True)
class ConstantsBundle:
    N: int
    R: float
    diamG: float
    diamOmega: float
    rho: float
    C_N: float
    C_harnack: float
    C_dprime: float
    C_sup: float
    K: float
    C_star: float
    C_final: float
    eps_threshold: float
    log10_C_harnack: float
    log10_C_sup: float
    log10_C_star: float
    log10_C_final: float
    log10_eps_threshold: float
    modes: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)  # optional empirical fields: M, K2, L, d0

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, float) and math.isinf(v):
                out[k] = "inf"
        return out

    def rows(self) -> list[tuple[str, str]]:
        out = []
        for k, v in self.to_dict().items():
            if isinstance(v, dict):
                out.extend((f"{k}.{a}", f"{b}") for a, b in v.items())
            elif isinstance(v, float):
                out.append((k, f"{v:.12g}"))
            else:
                out.append((k, str(v)))
        return out


def assemble(
    *,
    N: int,
    R: float,
    diamG: float,
    rho: float,
    K: float,
    C_sup: float | None = None,
    C_dprime: float = DEFAULT_C_DPRIME,
    K_mode: Mode = "empirical",
    L: float | None = None,
    extras: dict | None = None,
) -> ConstantsBundle:
    """Build the bundle; identities for ``C_star``, ``C_final`` and ``eps_threshold`` hold exactly.

    ``C_sup=None`` selects the closed-form constant (formula mode). When ``L``
    is given, the per-ball Harnack base becomes the semilinear one.
    """
    _positive(R=R, diamG=diamG, rho=rho)
    if not (K > 0):
        raise NonPositiveK(f"K must be positive, got {K}")
    diamO = diamG + 2.0 * R
    lc_harn = log10_harnack_chain_constant(N, R, diamG, diamO)
    if C_sup is None:
        base = None if L is None else log10_semilinear_harnack_constant(N, R, L)
        lc33 = log10_sup_bound_constant(N, R, diamG, rho, C_dprime, base)
        C33 = from_log10(lc33)
        c_mode: Mode = "formula"
    else:
        _positive(C_sup=C_sup)
        C33 = float(C_sup)
        lc33 = math.log10(C33)
        c_mode = "empirical"
    C_star = (C33 + diamG) / K
    C_final = 16 * N * (1 + diamG) * C_star
    eps = rho / (4 * C_star)
    l_star = log10_sum(lc33, math.log10(diamG)) - math.log10(K)
    l_final = math.log10(16 * N * (1 + diamG)) + l_star
    l_eps = math.log10(rho / 4) - l_star
    extras = dict(extras or {})
    if L is not None:
        extras.setdefault("L", L)
    return ConstantsBundle(
        N=N,
        R=R,
        diamG=diamG,
        diamOmega=diamO,
        rho=rho,
        C_N=float(c_N(N)),
        C_harnack=from_log10(lc_harn),
        C_dprime=C_dprime,
        C_sup=C33,
        K=K,
        C_star=C_star,
        C_final=C_final,
        eps_threshold=eps,
        log10_C_harnack=lc_harn,
        log10_C_sup=lc33,
        log10_C_star=l_star,
        log10_C_final=l_final,
        log10_eps_threshold=l_eps,
        modes={"C_harnack": "formula", "C_sup": c_mode, "K": K_mode, "C_star": c_mode, "C_final": c_mode},
        extras=extras,
    )


def certificate_holds(gap: float, seminorm: float, bundle: ConstantsBundle) -> bool:
    """``gap <= C_final [u]`` compared in the log10 domain."""
    if gap <= 0:
        return True
    if seminorm <= 0:
        return False
    return math.log10(gap) <= bundle.log10_C_final + math.log10(seminorm)
