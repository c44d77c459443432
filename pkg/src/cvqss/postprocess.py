"""Classical post-processing on simulated batches, and XOR (n, n) sharing.

Estimators work on the normalized dealer outcomes ``x_d' = x_d / sqrt(eta_D/2)``
and use both quadratures. Detector efficiency and electronic noise are
trusted calibration inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .keyrate import PlayerRate, UnphysicalParametersError, rate_from_channel
from .model import SystemParams, chi_het
from .montecarlo import TrialBatch
from .rng import CounterRNG

MIN_SAMPLES = 1000
SIGMA = 3.0
TAMPER_SIGMA = 5.0


class EstimationError(RuntimeError):
    """Parameter estimation failed or detected inconsistent announcements."""


# ---------------------------------------------------------------- disclosure

@dataclass(frozen=True)
class DisclosureSet:
    indices: np.ndarray
    players: tuple[int, ...]
    purpose: str  # "transmittance" or "round"
    honest: Optional[int] = None


@dataclass(frozen=True)
class RoundPlan:
    honest: int
    disclosed: DisclosureSet
    kept: np.ndarray


@dataclass(frozen=True)
class DisclosurePlan:
    estimation: DisclosureSet
    rounds: tuple[RoundPlan, ...]

    def key_indices(self) -> np.ndarray:
        """Pulses left for key material once every disclosed pulse is dropped."""
        return np.sort(np.concatenate([r.kept for r in self.rounds]))

    def check_disjoint(self) -> None:
        used = [self.estimation.indices] + [r.disclosed.indices for r in self.rounds]
        used.append(self.key_indices())
        allidx = np.concatenate(used)
        if np.unique(allidx).size != allidx.size:
            raise AssertionError("disclosed pulses overlap with each other or with key material")


def plan_disclosure(
    pulses: int,
    n: int,
    seed: int,
    estimation_fraction: float = 0.1,
    round_fraction: float = 0.5,
) -> DisclosurePlan:
    """Random partition: transmittance set, then one subset per honest-player round.

    Within each round subset ``round_fraction`` is disclosed and the rest is
    kept as key material.
    """
    if not 0 < estimation_fraction < 1 or not 0 < round_fraction <= 1:
        raise ValueError("fractions must lie in (0, 1)")
    perm = CounterRNG(seed).permutation("disclosure", pulses)
    n_est = int(round(estimation_fraction * pulses))
    est = DisclosureSet(np.sort(perm[:n_est]), tuple(range(1, n + 1)), "transmittance")
    rest = perm[n_est:]
    rounds = []
    for j, part in enumerate(np.array_split(rest, n), start=1):
        m = int(round(round_fraction * part.size))
        others = tuple(k for k in range(1, n + 1) if k != j)
        rounds.append(
            RoundPlan(
                honest=j,
                disclosed=DisclosureSet(np.sort(part[:m]), others, "round", honest=j),
                kept=np.sort(part[m:]),
            )
        )
    plan = DisclosurePlan(est, tuple(rounds))
    plan.check_disjoint()
    return plan


# ---------------------------------------------------------------- transmittance estimation

@dataclass(frozen=True)
class EstimationReport:
    T_hat: tuple[float, ...]
    T_se: tuple[float, ...]
    sqrt_T_hat: tuple[float, ...]
    V_A_hat: tuple[float, ...]
    epsilon_hat: float  # total player excess noise seen at the dealer, SNU
    epsilon_se: float
    samples: int


def _quad_mean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 0.5 * (a + b)


def estimate_transmittance(
    batch: TrialBatch,
    disclosure: DisclosureSet,
    params: SystemParams,
    min_samples: int = MIN_SAMPLES,
    sigma: float = SIGMA,
    tamper_sigma: float = TAMPER_SIGMA,
) -> EstimationReport:
    """Per-player transmittance from the fully disclosed subset.

    ``sqrt(T_k) = [Cov(x_d', x_k) + Cov(p_d', p_k)] / (2 V_A N0)`` with the
    calibrated ``V_A`` and ``N0``. Each announced symbol set is also checked
    against the calibrated modulation variance; a mismatch beyond
    ``tamper_sigma`` standard errors is treated as tampering.
    """
    idx = disclosure.indices
    m = idx.size
    if m < min_samples:
        raise EstimationError(f"only {m} disclosed pulses, need {min_samples}")
    N0, V_A = batch.N0, batch.V_A
    x, p = batch.x[idx], batch.p[idx]
    xd = batch.x_norm[idx]
    pd = batch.p_norm[idx]

    va_hat = _quad_mean((x * x).mean(0), (p * p).mean(0)) / N0
    if np.any(va_hat <= 0):
        raise EstimationError("announced symbols have zero variance")
    # (x^2 + p^2) / (V_A N0) is chi-square with 2 dof: relative sd 1/sqrt(m)
    dev = np.abs(va_hat / V_A - 1.0) * math.sqrt(m)
    if np.any(dev > tamper_sigma):
        bad = [k + 1 for k in np.flatnonzero(dev > tamper_sigma)]
        raise EstimationError(f"announced modulation variance inconsistent for players {bad}: possible tampering")

    prod = _quad_mean(xd[:, None] * x, pd[:, None] * p)  # (m, n)
    cov = prod.mean(0)
    cov_se = prod.std(0, ddof=1) / math.sqrt(m)
    sqrt_t = cov / (V_A * N0)
    sqrt_se = cov_se / (V_A * N0)
    if np.any(sqrt_t < -sigma * sqrt_se):
        bad = [k + 1 for k in np.flatnonzero(sqrt_t < -sigma * sqrt_se)]
        raise EstimationError(f"negative outcome/symbol correlation for players {bad}: possible tampering")
    sqrt_t = np.clip(sqrt_t, 0.0, None)
    T_hat = sqrt_t**2
    T_se = 2.0 * sqrt_t * sqrt_se
    if np.any(T_hat > 1.0 + sigma * T_se):
        raise EstimationError("estimated transmittance exceeds 1")

    # whatever the announcements do not explain: shot, detector and excess noise
    rx = xd - x @ sqrt_t
    rp = pd - p @ sqrt_t
    w = _quad_mean(rx * rx, rp * rp) / N0
    det = 1.0 + chi_het(params)
    eps = float(w.mean() - det)
    eps_se = float(w.std(ddof=1) / math.sqrt(m))
    if eps < -sigma * eps_se:
        raise EstimationError(f"negative excess noise estimate {eps:.4g} (se {eps_se:.2g})")

    return EstimationReport(
        T_hat=tuple(float(t) for t in T_hat),
        T_se=tuple(float(s) for s in T_se),
        sqrt_T_hat=tuple(float(s) for s in sqrt_t),
        V_A_hat=tuple(float(v) for v in va_hat),
        epsilon_hat=eps,
        epsilon_se=eps_se,
        samples=m,
    )


# ---------------------------------------------------------------- per-player rounds

def displace(
    x_norm: np.ndarray,
    p_norm: np.ndarray,
    x: np.ndarray,
    p: np.ndarray,
    sqrt_T_hat: Sequence[float],
    honest: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Subtract every dishonest player's announced contribution.

    ``x`` and ``p`` hold announced symbols, shape ``(m, n)``; the honest
    player's column is ignored.
    """
    n = x.shape[1]
    if len(sqrt_T_hat) != n:
        raise ValueError("need one transmittance estimate per player")
    if not np.all(np.isfinite(np.delete(x, honest - 1, axis=1))):
        raise ValueError("missing announcements")
    w = np.asarray(sqrt_T_hat, dtype=float).copy()
    w[honest - 1] = 0.0
    return x_norm - x @ w, p_norm - p @ w


@dataclass(frozen=True)
class PlayerEstimate:
    honest: int
    samples: int
    V_A_hat: float
    T_hat: float
    T_se: float
    excess_hat: float  # all players' excess noise, referred to the honest player's input
    excess_se: float
    rate: PlayerRate

    @property
    def R(self) -> float:
        return self.rate.R


def estimate_per_player_rate(
    x_R: np.ndarray,
    p_R: np.ndarray,
    x_j: np.ndarray,
    p_j: np.ndarray,
    params: SystemParams,
    honest: int = 1,
    min_samples: int = MIN_SAMPLES,
    sigma: float = SIGMA,
) -> PlayerEstimate:
    """Method-of-moments inversion of the displaced data, then the analytic rate.

    In normalized units ``x_R = sqrt(T_j) x_j + w`` with
    ``Var(w) / N0 = 1 + T_j * excess + chi_het``.
    """
    m = x_R.size
    if m < min_samples:
        raise EstimationError(f"round {honest}: only {m} disclosed pulses, need {min_samples}")
    N0 = params.N0
    ss = _quad_mean(x_j * x_j, p_j * p_j)
    va = float(ss.mean() / N0)
    if va <= 0:
        raise EstimationError(f"round {honest}: honest player's symbols have zero variance")
    prod = _quad_mean(x_R * x_j, p_R * p_j)
    slope = float(prod.mean() / ss.mean())
    slope_se = float(prod.std(ddof=1) / math.sqrt(m) / ss.mean())
    if slope < -sigma * slope_se:
        raise EstimationError(f"round {honest}: negative correlation with the honest player")
    slope = max(slope, 0.0)
    T = slope * slope
    T_se = 2.0 * slope * slope_se
    if T > 1.0 + sigma * T_se:
        raise EstimationError(f"round {honest}: estimated transmittance {T:.4g} > 1")
    if T <= 0.0:
        raise EstimationError(f"round {honest}: no correlation with the honest player")
    T = min(T, 1.0)

    wx, wp = x_R - slope * x_j, p_R - slope * p_j
    w = _quad_mean(wx * wx, wp * wp) / N0
    w_var = float(w.sum() / (m - 1))
    excess = (w_var - 1.0 - chi_het(params)) / T
    excess_se = float(w.std(ddof=1) / math.sqrt(m) / T)
    if excess < -sigma * excess_se:
        raise EstimationError(
            f"round {honest}: negative excess noise {excess:.4g} (se {excess_se:.2g})"
        )
    # within statistical tolerance of zero: use the physical boundary
    excess = max(excess, 0.0)
    try:
        rate = rate_from_channel(va, T, excess, params, honest)
    except UnphysicalParametersError as exc:
        raise EstimationError(f"round {honest}: {exc}") from exc
    return PlayerEstimate(
        honest=honest, samples=m, V_A_hat=va, T_hat=T, T_se=T_se,
        excess_hat=excess, excess_se=excess_se, rate=rate,
    )


# ---------------------------------------------------------------- full round

@dataclass(frozen=True)
class EmpiricalReport:
    estimation: EstimationReport
    per_player: tuple[PlayerEstimate, ...]
    R_qss: float
    argmin_j: int
    aborted: bool
    reason: str = ""
    key_pulses: int = 0
    plan: Optional[DisclosurePlan] = field(default=None, repr=False)

    def lines(self) -> list[str]:
        out = [
            f"R_qss={self.R_qss!r}",
            f"argmin_j={self.argmin_j}",
            f"aborted={str(self.aborted).lower()}",
            f"reason={self.reason}",
            f"key_pulses={self.key_pulses}",
            f"estimation_samples={self.estimation.samples}",
            f"epsilon_hat_dealer={self.estimation.epsilon_hat!r}",
        ]
        for k, (t, s) in enumerate(zip(self.estimation.T_hat, self.estimation.T_se), start=1):
            out.append(f"T_hat_{k}={t!r}")
            out.append(f"T_se_{k}={s!r}")
        for e in self.per_player:
            out.append(f"R_hat_{e.honest}={e.R!r}")
        return out


PLAYER_CSV_HEADER = [
    "honest", "samples", "V_A_hat", "T_hat", "T_se", "excess_hat", "excess_se",
    "I_AB", "chi_BE", "R_hat",
]


def player_rows(report: EmpiricalReport) -> list[list]:
    return [
        [e.honest, e.samples, e.V_A_hat, e.T_hat, e.T_se, e.excess_hat, e.excess_se,
         e.rate.I_AB, e.rate.chi_BE, e.R]
        for e in report.per_player
    ]


def qss_round(
    batch: TrialBatch,
    params: SystemParams,
    seed: int = 0,
    estimation_fraction: float = 0.1,
    round_fraction: float = 0.5,
    min_samples: int = MIN_SAMPLES,
    honest: Optional[Sequence[int]] = None,
) -> EmpiricalReport:
    """Transmittance estimation followed by one estimation round per honest candidate.

    ``honest`` restricts which rounds are evaluated (default: all players);
    the pulse partition is the same either way. Raises
    :class:`EstimationError` on failed or inconsistent estimates; a
    non-positive rate marks the report as aborted.
    """
    n = batch.n
    plan = plan_disclosure(batch.pulses, n, seed, estimation_fraction, round_fraction)
    est = estimate_transmittance(batch, plan.estimation, params, min_samples)
    chosen = range(1, n + 1) if honest is None else sorted(set(honest))
    xn_all, pn_all = batch.x_norm, batch.p_norm
    results = []
    for j in chosen:
        rnd = plan.rounds[j - 1]
        idx = rnd.disclosed.indices
        xr, pr = displace(xn_all[idx], pn_all[idx], batch.x[idx], batch.p[idx], est.sqrt_T_hat, j)
        results.append(
            estimate_per_player_rate(
                xr, pr, batch.x[idx, j - 1], batch.p[idx, j - 1], params, j, min_samples
            )
        )
    best = min(results, key=lambda e: (e.R, e.honest))
    aborted = best.R <= 0.0
    return EmpiricalReport(
        estimation=est,
        per_player=tuple(results),
        R_qss=best.R,
        argmin_j=best.honest,
        aborted=aborted,
        reason=f"non-positive rate for player {best.honest}" if aborted else "",
        key_pulses=int(plan.key_indices().size),
        plan=plan,
    )


# ---------------------------------------------------------------- XOR sharing

def _xor(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).to_bytes(len(a), "little")


def combine_keys(keys: Sequence[bytes]) -> bytes:
    if not keys:
        raise ValueError("need at least one key")
    size = len(keys[0])
    if any(len(k) != size for k in keys):
        raise ValueError("all keys must have the same length")
    return reduce(_xor, keys)


def share(message: bytes, keys: Sequence[bytes]) -> bytes:
    """Broadcast ``E = M xor K_1 xor ... xor K_n``."""
    k = combine_keys(keys)
    if len(message) != len(k):
        raise ValueError("message and keys must have the same length")
    return _xor(message, k)


def recover(encrypted: bytes, keys: Sequence[bytes]) -> bytes:
    return share(encrypted, keys)
