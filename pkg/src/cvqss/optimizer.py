"""Search for the shared modulation variance that maximizes the secret-sharing rate."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .keyrate import UnphysicalParametersError, key_rate, min_rate_fast, qss_rate
from .model import NetworkLayout, SystemParams

log = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

DEFAULT_BOUNDS = (0.01, 1000.0)
DEFAULT_GRID = 60
DEFAULT_ITERS = 64


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizationResult:
    V_A_opt: float
    R_opt: float
    evaluations: int
    bracket: tuple[float, float]
    at_boundary: bool


def make_objective(
    layout: NetworkLayout, params: SystemParams, policy: str = "min"
) -> Callable[[float], float]:
    """Rate as a function of V_A.

    ``policy="min"`` is the full minimum over honest-player choices;
    ``policy="farthest"`` only evaluates the farthest player. The noise
    budget is rebuilt for every candidate so the phase-noise term tracks V_A.
    """
    if policy == "min":
        return lambda v: min_rate_fast(layout, params, v)
    if policy == "farthest":
        return lambda v: key_rate(layout, params, v, 1)
    raise ValueError(f"unknown honest-player policy {policy!r}")


def _safe(f: Callable[[float], float], v: float) -> float:
    try:
        r = f(v)
    except (UnphysicalParametersError, ValueError, ZeroDivisionError, OverflowError):
        return -math.inf
    return r if math.isfinite(r) else -math.inf


def golden_section_max(
    f: Callable[[float], float], lo: float, hi: float, iters: int
) -> tuple[float, float, int, tuple[float, float]]:
    """Maximize ``f`` on [lo, hi]; returns best point seen, its value, evals, final bracket."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
            x, fx = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
            x, fx = d, fd
        evals += 1
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f, evals, (a, b)


def optimize_va(
    layout: NetworkLayout,
    params: SystemParams,
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
    grid_points: int = DEFAULT_GRID,
    iterations: int = DEFAULT_ITERS,
    policy: str = "min",
) -> OptimizationResult:
    """Two-phase maximization: log-spaced coarse grid, then golden section in log(V_A).

    The refinement only runs inside the two grid cells around the coarse
    argmax, so the result is at least as good as the best grid point but is
    not guaranteed to be the global optimum.
    """
    lo, hi = bounds
    if not 0.0 < lo < hi:
        raise ValueError(f"invalid V_A bounds {bounds}")
    if grid_points < 3:
        raise ValueError("grid_points must be >= 3")
    obj = make_objective(layout, params, policy)

    grid = np.logspace(math.log10(lo), math.log10(hi), grid_points)
    grid[0], grid[-1] = lo, hi
    values = [_safe(obj, float(v)) for v in grid]
    if not any(math.isfinite(v) for v in values):
        raise OptimizationError("objective is non-finite on the whole V_A grid")
    i = int(np.argmax(values))
    best_v, best_r = float(grid[i]), values[i]

    a = math.log(grid[max(i - 1, 0)])
    b = math.log(grid[min(i + 1, grid_points - 1)])
    u, r, evals, (ba, bb) = golden_section_max(lambda t: _safe(obj, math.exp(t)), a, b, iterations)
    if r > best_r:
        best_v, best_r = math.exp(u), r
    # report the exact (scalar-path) rate at the chosen point
    best_r = qss_rate(layout, params, best_v).R_qss if policy == "min" else obj(best_v)
    bracket = (math.exp(ba), math.exp(bb))

    at_boundary = i in (0, grid_points - 1) and (
        math.isclose(bracket[0], lo, rel_tol=1e-6) or math.isclose(bracket[1], hi, rel_tol=1e-6)
    )
    if at_boundary:
        log.debug("V_A optimum sits on the search boundary (%g) for n=%d, L=%g", best_v, layout.n, layout.L)
    return OptimizationResult(
        V_A_opt=best_v,
        R_opt=best_r,
        evaluations=grid_points + evals,
        bracket=bracket,
        at_boundary=at_boundary,
    )
