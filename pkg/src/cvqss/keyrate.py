"""Asymptotic secure key rate with reverse reconciliation and trusted detector noise.

The dealer runs a two-party key rate estimate against every player in turn
(all other players treated as adversarial), and the secret-sharing rate is
the minimum over players.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .model import (
    NetworkLayout,
    SystemParams,
    chi_het,
    chi_line_from,
    dealer_excess,
    player_epsilon0,
    transmittances,
)

# Clamp window for round-off near pure-state limits.
REL_TOL = 1e-9
G_TOL = 1e-12
# discriminants this close to zero (relative to trace^2) are round-off of a degenerate pair

VA = Union[float, Sequence[float]]


class UnphysicalParametersError(ValueError):
    """Raised when inputs lead to a non-physical symplectic spectrum."""


def g_func(x: float) -> float:
    """Von Neumann entropy (bits) of a thermal mode with mean photon number ``x``."""
    if x < -G_TOL:
        raise UnphysicalParametersError(f"negative argument to G: {x!r}")
    if x <= 0.0:
        return 0.0
    return (x + 1.0) * math.log2(x + 1.0) - x * math.log2(x)


def mutual_information(V_A: float, chi_tot: float) -> float:
    """Dealer/player mutual information (bits per pulse), both quadratures."""
    V = V_A + 1.0
    return math.log2((V + chi_tot) / (1.0 + chi_tot))


def _pair(diff: float, prod: float) -> tuple[float, float]:
    """Symplectic pair from ``|hi - lo|`` and ``hi * lo``.

    Uses ``(hi + lo)^2 = diff^2 + 4 prod``; with both inputs free of
    cancellation, near-degenerate pairs keep full relative precision.
    """
    hi = 0.5 * (math.sqrt(diff * diff + 4.0 * prod) + diff)
    lo = prod / hi if hi > 0.0 else 0.0
    out = []
    for lam in (hi, lo):
        if lam * lam < 1.0 - REL_TOL:
            raise UnphysicalParametersError(f"symplectic eigenvalue^2 {lam * lam!r} < 1")
        out.append(max(lam, 1.0))
    return out[0], out[1]


def _check_domain(V: float, T: float, chi_line: float) -> None:
    if V < 1.0 or not 0.0 < T <= 1.0 or chi_line < 0.0:
        raise UnphysicalParametersError(
            f"need V >= 1, 0 < T <= 1, chi_line >= 0 (got {V}, {T}, {chi_line})"
        )


def invariants_12(V: float, T: float, chi_line: float) -> tuple[float, float]:
    """``(l1^2 + l2^2, l1^2 l2^2)`` of the dealer/player state."""
    # V^2 (1 - 2T) + 2T + T^2 (V + chi)^2, regrouped into non-negative terms
    A = (V * (1.0 - T)) ** 2 + 2.0 * T + T * T * chi_line * (2.0 * V + chi_line)
    B = T * T * (V * chi_line + 1.0) ** 2
    return A, B


def invariants_34(
    V: float, T: float, chi_line: float, chi_het_: float, chi_tot: float
) -> tuple[float, float]:
    """``(l3^2 + l4^2, l3^2 l4^2)`` of the conditional state."""
    A, B = invariants_12(V, T, chi_line)
    sqrt_b = math.sqrt(B)
    scale = T * (V + chi_tot)
    C = (
        A * chi_het_**2
        + B
        + 1.0
        + 2.0 * chi_het_ * (V * sqrt_b + T * (V + chi_line))
        + 2.0 * T * (V * V - 1.0)
    ) / scale**2
    D = ((V + sqrt_b * chi_het_) / scale) ** 2
    return C, D


def symplectic_12(V: float, T: float, chi_line: float) -> tuple[float, float]:
    """Symplectic eigenvalues of the dealer/player state seen by the eavesdropper."""
    _check_domain(V, T, chi_line)
    # A - 2 sqrt(B) factors as (V - T (V + chi))^2
    return _pair(abs(V - T * (V + chi_line)), T * (V * chi_line + 1.0))


def symplectic_34(
    V: float, T: float, chi_line: float, chi_het_: float, chi_tot: float
) -> tuple[float, float]:
    """Symplectic eigenvalues of the state conditioned on the dealer's outcome.

    ``chi_tot`` must equal ``chi_line + chi_het_ / T``.
    """
    _check_domain(V, T, chi_line)
    if chi_het_ < 1.0 - REL_TOL:
        raise UnphysicalParametersError(f"chi_het must be >= 1, got {chi_het_}")
    if not math.isclose(chi_tot, chi_line + chi_het_ / T, rel_tol=1e-9):
        raise ValueError("chi_tot is inconsistent with chi_line and chi_het")
    scale = T * (V + chi_tot)
    # C - 2 sqrt(D) factors as the square of this over scale^2
    diff = (1.0 - T) - T * V * chi_line + chi_het_ * (T * (V + chi_line) - V)
    prod = (V + T * (V * chi_line + 1.0) * chi_het_) / scale
    return _pair(abs(diff) / scale, prod)


def holevo_bound(lambdas: Sequence[float]) -> float:
    """Eve's Holevo information from (l1, l2, l3, l4, l5)."""
    l1, l2, l3, l4, l5 = lambdas
    terms = [g_func((lam - 1.0) / 2.0) for lam in (l1, l2, l3, l4, l5)]
    return terms[0] + terms[1] - terms[2] - terms[3] - terms[4]


def phase_noise_excess(V_A: float, delta: float) -> float:
    """Excess noise (SNU) caused by residual phase error of variance ``delta``."""
    return V_A * delta


@dataclass(frozen=True)
class PlayerRate:
    honest_index: int
    V_A: float
    T: float
    chi_line: float
    chi_tot: float
    I_AB: float
    lambdas: tuple[float, float, float, float, float]
    chi_BE: float
    R: float


@dataclass(frozen=True)
class KeyRateReport:
    V_A: tuple[float, ...]
    per_player: tuple[PlayerRate, ...]
    R_qss: float
    argmin_j: int

    def as_dict(self) -> dict:
        return {
            "V_A": list(self.V_A),
            "R_qss": self.R_qss,
            "argmin_j": self.argmin_j,
            "per_player": [
                {
                    "j": p.honest_index,
                    "T": p.T,
                    "chi_line": p.chi_line,
                    "chi_tot": p.chi_tot,
                    "I_AB": p.I_AB,
                    "lambda": list(p.lambdas),
                    "chi_BE": p.chi_BE,
                    "R": p.R,
                }
                for p in self.per_player
            ],
        }


def rate_from_channel(
    V_A: float, T: float, excess_total: float, params: SystemParams, j: int = 1
) -> PlayerRate:
    """Two-party rate given modulation, transmittance and input-referred excess noise.

    ``excess_total`` is the sum of all players' excess noise referred to the
    honest player's input. Both the analytic model and the empirical
    estimator funnel through here.
    """
    if V_A <= 0:
        raise ValueError("V_A must be > 0")
    het = chi_het(params)
    line = chi_line_from(T, excess_total)
    tot = line + het / T
    V = V_A + 1.0
    i_ab = mutual_information(V_A, tot)
    l1, l2 = symplectic_12(V, T, line)
    l3, l4 = symplectic_34(V, T, line, het, tot)
    lams = (l1, l2, l3, l4, 1.0)
    chi_be = holevo_bound(lams)
    return PlayerRate(
        honest_index=j,
        V_A=V_A,
        T=T,
        chi_line=line,
        chi_tot=tot,
        I_AB=i_ab,
        lambdas=lams,
        chi_BE=chi_be,
        R=params.f_rec * i_ab - chi_be,
    )


def _va_vector(V_A: VA, n: int) -> tuple[float, ...]:
    if isinstance(V_A, (int, float)):
        return (float(V_A),) * n
    vec = tuple(float(v) for v in V_A)
    if len(vec) != n:
        raise ValueError(f"expected {n} modulation variances, got {len(vec)}")
    return vec


def player_rate(
    layout: NetworkLayout,
    params: SystemParams,
    V_A: VA,
    j: int,
    T: Sequence[float] | None = None,
) -> PlayerRate:
    # same arithmetic as model.noise_budget, without the O(n) per-player breakdown
    layout.check_index(j)
    vec = _va_vector(V_A, layout.n)
    if T is None:
        T = transmittances(layout, params)
    excess = dealer_excess(T, player_epsilon0(layout, params, vec)) / T[j - 1]
    return rate_from_channel(vec[j - 1], T[j - 1], excess, params, j)


def key_rate(layout: NetworkLayout, params: SystemParams, V_A: VA, j: int) -> float:
    """Raw (unclamped) key rate in bits per pulse with player ``j`` as honest partner."""
    return player_rate(layout, params, V_A, j).R


def qss_rate(layout: NetworkLayout, params: SystemParams, V_A: VA) -> KeyRateReport:
    vec = _va_vector(V_A, layout.n)
    T = transmittances(layout, params)
    at_dealer = dealer_excess(T, player_epsilon0(layout, params, vec))
    rates = tuple(
        rate_from_channel(vec[j - 1], T[j - 1], at_dealer / T[j - 1], params, j)
        for j in range(1, layout.n + 1)
    )
    best = min(rates, key=lambda r: (r.R, r.honest_index))
    return KeyRateReport(V_A=vec, per_player=rates, R_qss=best.R, argmin_j=best.honest_index)


def farthest_player_rate(layout: NetworkLayout, params: SystemParams, V_A: float) -> float:
    """Rate with the farthest player as honest partner (the binding one in normal operation)."""
    return key_rate(layout, params, V_A, 1)


def _g_vec(x: np.ndarray) -> np.ndarray:
    x = np.where(x < 0.0, 0.0, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (x + 1.0) * np.log2(x + 1.0) - x * np.log2(x)
    return np.where(x > 0.0, out, 0.0)


def _pair_vec(diff: np.ndarray, prod: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    hi = 0.5 * (np.sqrt(diff * diff + 4.0 * prod) + diff)
    lo = prod / hi
    if np.any(lo * lo < 1.0 - REL_TOL):
        return None
    return np.maximum(hi, 1.0), np.maximum(lo, 1.0)


def min_rate_fast(layout: NetworkLayout, params: SystemParams, V_A: float) -> float:
    """Vectorized ``qss_rate(...).R_qss`` for a shared V_A, used as search objective.

    Agrees with the scalar path to round-off; reported rates always come from
    :func:`qss_rate`. Returns ``nan`` for unphysical spectra.
    """
    T = np.asarray(transmittances(layout, params))
    at_dealer = dealer_excess(T, player_epsilon0(layout, params, V_A))
    het = chi_het(params)
    line = 1.0 / T - 1.0 + at_dealer / T
    tot = line + het / T
    V = V_A + 1.0
    i_ab = np.log2((V + tot) / (1.0 + tot))
    prod12 = T * (V * line + 1.0)
    scale = T * (V + tot)
    diff34 = (1.0 - T) - T * V * line + het * (T * (V + line) - V)
    p12 = _pair_vec(np.abs(V - T * (V + line)), prod12)
    p34 = _pair_vec(np.abs(diff34) / scale, (V + prod12 * het) / scale)
    if p12 is None or p34 is None:
        return math.nan
    (l1, l2), (l3, l4) = p12, p34
    chi = _g_vec((l1 - 1) / 2) + _g_vec((l2 - 1) / 2) - _g_vec((l3 - 1) / 2) - _g_vec((l4 - 1) / 2)
    return float(np.min(params.f_rec * i_ab - chi))
