"""Phase-space Monte-Carlo of the quantum stage.

Each player adds a Gaussian displacement ``(x_k, p_k)`` of variance
``V_A * N0`` plus its own excess noise of variance ``epsilon0 * N0`` to the
circulating mode. The dealer's dual-homodyne outcome per quadrature is

    x_d = sqrt(eta_D / 2) * sum_k sqrt(T_k) * (x_k' + e_k) + v,
    v ~ N(0, (1 + nu_el) * N0),

where ``x_k'`` is the symbol after the residual phase-error rotation and
``v`` lumps the signal shot noise, the vacuum admitted by the 50/50 split
and the detector loss, and the electronic noise. This reproduces the
ensemble variance ``(eta_D T_j / 2) (V + chi_tot) N0`` once the other
players' symbols are subtracted. Quadratures are in absolute units
(vacuum variance ``N0``).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .model import NetworkLayout, SystemParams, transmittances
from .rng import BLOCK, CounterRNG

CHUNK = 8 * BLOCK


@dataclass
class TrialBatch:
    seed: int
    V_A: float
    N0: float
    eta_D: float
    x: np.ndarray  # (pulses, n) announced symbols
    p: np.ndarray
    x_d: np.ndarray  # (pulses,) raw dealer outcomes
    p_d: np.ndarray
    noise_x: Optional[np.ndarray] = None  # (pulses, n) injected excess noise, if kept
    noise_p: Optional[np.ndarray] = None

    @property
    def pulses(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def x_norm(self) -> np.ndarray:
        return self.x_d / math.sqrt(self.eta_D / 2.0)

    @property
    def p_norm(self) -> np.ndarray:
        return self.p_d / math.sqrt(self.eta_D / 2.0)

    def subset(self, idx: np.ndarray) -> "TrialBatch":
        return replace(
            self,
            x=self.x[idx],
            p=self.p[idx],
            x_d=self.x_d[idx],
            p_d=self.p_d[idx],
            noise_x=None if self.noise_x is None else self.noise_x[idx],
            noise_p=None if self.noise_p is None else self.noise_p[idx],
        )


def draw_symbols(
    rng: CounterRNG, V_A: float, pulses: int, n: int, N0: float = 0.25, offset: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Independent Gaussian symbols of variance ``V_A * N0``, shape ``(pulses, n)``."""
    if V_A <= 0:
        raise ValueError("V_A must be > 0")
    if pulses < 1:
        raise ValueError("pulses must be >= 1")
    s = math.sqrt(V_A * N0)
    x = rng.normal("symbol_x", pulses, n, offset)
    p = rng.normal("symbol_p", pulses, n, offset)
    x *= s
    p *= s
    return x, p


def rotate(x: np.ndarray, p: np.ndarray, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c, s = np.cos(phi), np.sin(phi)
    return x * c - p * s, x * s + p * c


def apply_phase_error(
    x: np.ndarray,
    p: np.ndarray,
    delta: float,
    rng: CounterRNG,
    offset: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rotate every player's symbol by its own residual phase error ~ N(0, delta).

    Returns the rotated symbols and the angles. ``delta == 0`` returns the
    inputs unchanged.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if delta == 0:
        return x, p, np.zeros_like(x)
    theta = rng.normal("phase", x.shape[0], x.shape[1] if x.ndim == 2 else None, offset)
    theta *= math.sqrt(delta)
    xr, pr = rotate(x, p, theta)
    return xr, pr, theta


def measured_phase_excess(
    x: np.ndarray, p: np.ndarray, x_rot: np.ndarray, p_rot: np.ndarray, N0: float
) -> float:
    """Excess noise (SNU, per quadrature) between announced and transmitted symbols."""
    d2 = (x_rot - x) ** 2 + (p_rot - p) ** 2
    return float(d2.mean() / (2.0 * N0))


def propagate_and_measure(
    layout: NetworkLayout,
    params: SystemParams,
    x: np.ndarray,
    p: np.ndarray,
    rng: CounterRNG,
    offset: int = 0,
    keep_noise: bool = False,
) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray], Optional[np.ndarray]]:
    """Dealer outcomes for transmitted symbols ``x, p`` of shape ``(pulses, n)``."""
    pulses, n = x.shape
    if n != layout.n:
        raise ValueError(f"batch has {n} players, layout has {layout.n}")
    amp = np.sqrt(np.asarray(transmittances(layout, params)))
    gain = math.sqrt(params.eta_D / 2.0)
    e_s = math.sqrt(params.epsilon0 * params.N0)
    v_s = math.sqrt((1.0 + params.nu_el) * params.N0)

    ex = rng.normal("excess_x", pulses, n, offset)
    ep = rng.normal("excess_p", pulses, n, offset)
    ex *= e_s
    ep *= e_s
    x_d = gain * ((x + ex) @ amp) + v_s * rng.normal("detector_x", pulses, None, offset)
    p_d = gain * ((p + ep) @ amp) + v_s * rng.normal("detector_p", pulses, None, offset)
    if keep_noise:
        return x_d, p_d, ex, ep
    return x_d, p_d, None, None


def normalize(x_d: np.ndarray, p_d: np.ndarray, params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Undo the detector gain so that ``E[x_d'] = sum_k sqrt(T_k) x_k``."""
    g = math.sqrt(params.eta_D / 2.0)
    return x_d / g, p_d / g


def simulate(
    layout: NetworkLayout,
    params: SystemParams,
    V_A: float,
    pulses: int,
    seed: int,
    threads: int = 1,
    keep_noise: bool = False,
) -> TrialBatch:
    """Run the quantum stage for ``pulses`` pulses.

    Work is split into block-aligned chunks that may run on several threads;
    every chunk draws from its own counter-addressed streams, so the result
    does not depend on ``threads``.
    """
    if pulses < 1:
        raise ValueError("pulses must be >= 1")
    n = layout.n
    rng = CounterRNG(seed)
    x = np.empty((pulses, n))
    p = np.empty((pulses, n))
    x_d = np.empty(pulses)
    p_d = np.empty(pulses)
    nx = np.empty((pulses, n)) if keep_noise else None
    np_ = np.empty((pulses, n)) if keep_noise else None

    def work(lo: int) -> None:
        hi = min(lo + CHUNK, pulses)
        xs, ps = draw_symbols(rng, V_A, hi - lo, n, params.N0, lo)
        xt, pt, _ = apply_phase_error(xs, ps, params.delta, rng, lo)
        xd, pd, ex, ep = propagate_and_measure(layout, params, xt, pt, rng, lo, keep_noise)
        x[lo:hi], p[lo:hi], x_d[lo:hi], p_d[lo:hi] = xs, ps, xd, pd
        if keep_noise:
            nx[lo:hi], np_[lo:hi] = ex, ep

    starts = range(0, pulses, CHUNK)
    if threads <= 1:
        for lo in starts:
            work(lo)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    return TrialBatch(
        seed=seed, V_A=V_A, N0=params.N0, eta_D=params.eta_D,
        x=x, p=p, x_d=x_d, p_d=p_d, noise_x=nx, noise_p=np_,
    )


def model_moments(layout: NetworkLayout, params: SystemParams, V_A: float) -> dict:
    """Closed-form second moments of the raw outcomes, in units of ``N0``."""
    T = np.asarray(transmittances(layout, params))
    g2 = params.eta_D / 2.0
    eps0 = params.epsilon0 + V_A * params.delta
    return {
        "var_d": g2 * float(T.sum()) * (V_A + eps0) + 1.0 + params.nu_el,
        "cov_d_k": np.sqrt(g2 * T) * V_A,
        "cov_norm_k": np.sqrt(T) * V_A,
    }


# ---------------------------------------------------------------- CSV

def csv_header(n: int) -> list[str]:
    cols = ["pulse_id"]
    for k in range(1, n + 1):
        cols += [f"x_{k}", f"p_{k}"]
    return cols + ["x_d", "p_d", "x_d_norm", "p_d_norm"]


def write_batch_csv(batch: TrialBatch, path: str | Path) -> None:
    """One row per pulse. Metadata travels in a leading ``#`` comment line."""
    n = batch.n
    meta = f"# seed={batch.seed} V_A={batch.V_A!r} N0={batch.N0!r} eta_D={batch.eta_D!r} n={n}"
    sym = np.empty((batch.pulses, 2 * n))
    sym[:, 0::2] = batch.x
    sym[:, 1::2] = batch.p
    table = np.column_stack(
        [np.arange(batch.pulses), sym, batch.x_d, batch.p_d, batch.x_norm, batch.p_norm]
    )
    fmt = ["%d"] + ["%.17g"] * (table.shape[1] - 1)
    with open(path, "w", newline="") as fh:
        fh.write(meta + "\n")
        fh.write(",".join(csv_header(n)) + "\n")
        np.savetxt(fh, table, fmt=fmt, delimiter=",")


def read_batch_csv(path: str | Path) -> TrialBatch:
    with open(path) as fh:
        first = fh.readline().strip()
        header = fh.readline().strip().split(",")
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing metadata line")
        meta = dict(kv.split("=", 1) for kv in first[1:].split())
        try:
            n = int(meta["n"])
            seed, V_A, N0, eta_D = int(meta["seed"]), float(meta["V_A"]), float(meta["N0"]), float(meta["eta_D"])
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}: bad metadata line {first!r}") from exc
        if header != csv_header(n):
            raise ValueError(f"{path}: unexpected columns")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[0] == 0:
        raise ValueError(f"{path}: no rows")
    if data.shape[1] != 2 * n + 5:
        raise ValueError(f"{path}: expected {2 * n + 5} columns, found {data.shape[1]}")
    return TrialBatch(
        seed=seed, V_A=V_A, N0=N0, eta_D=eta_D,
        x=data[:, 1 : 2 * n + 1 : 2].copy(),
        p=data[:, 2 : 2 * n + 2 : 2].copy(),
        x_d=data[:, 2 * n + 1].copy(),
        p_d=data[:, 2 * n + 2].copy(),
    )
