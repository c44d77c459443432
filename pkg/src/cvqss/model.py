"""Protocol parameters, network layout and the shared noise budget.

All noise quantities are expressed in shot-noise units (SNU), i.e. as
variances divided by ``N0``. Players are indexed 1..n, player 1 being the
farthest from the dealer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

Modulation = Union[None, float, Sequence[float]]


@dataclass(frozen=True)
class SystemParams:
    """Physical and detector parameters.

    Attributes:
        gamma: Fiber attenuation (dB/km).
        epsilon0: Excess noise added by each player, referred to that
            player's own station (SNU).
        nu_el: Electronic noise of the dealer's detector (SNU).
        eta_D: Detector efficiency.
        f_rec: Reconciliation efficiency.
        t_B: Transmittance of the coupling beam splitter at each station.
        delta: Residual phase-noise variance at each station (rad^2).
        N0: Shot-noise variance in absolute quadrature units.
    """

    gamma: float = 0.2
    epsilon0: float = 0.01
    nu_el: float = 0.1
    eta_D: float = 0.5
    f_rec: float = 0.95
    t_B: float = 1.0
    delta: float = 0.0
    N0: float = 0.25

    def __post_init__(self) -> None:
        checks = [
            (self.gamma >= 0, "gamma must be >= 0"),
            (self.epsilon0 >= 0, "epsilon0 must be >= 0"),
            (self.nu_el >= 0, "nu_el must be >= 0"),
            (0 < self.eta_D <= 1, "eta_D must be in (0, 1]"),
            (0 < self.f_rec <= 1, "f_rec must be in (0, 1]"),
            (0 < self.t_B <= 1, "t_B must be in (0, 1]"),
            (self.delta >= 0, "delta must be >= 0"),
            (self.N0 > 0, "N0 must be > 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)


@dataclass(frozen=True)
class NetworkLayout:
    """Linear chain of ``n`` players between the farthest player and the dealer.

    ``distances[k-1]`` is the fiber length from player k to the dealer. When
    omitted the players are spaced evenly, ``l_k = (n - k + 1) L / n``.
    """

    n: int
    L: float
    distances: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be an integer >= 1")
        if self.L < 0:
            raise ValueError("L must be >= 0")
        explicit = bool(self.distances)
        if not explicit:
            d = tuple((self.n - k + 1) * self.L / self.n for k in range(1, self.n + 1))
            object.__setattr__(self, "distances", d)
        else:
            object.__setattr__(self, "distances", tuple(float(x) for x in self.distances))
        if len(self.distances) != self.n:
            raise ValueError(f"expected {self.n} distances, got {len(self.distances)}")
        if any(x < 0 for x in self.distances):
            raise ValueError("distances must be >= 0")
        # ties only for L = 0, or when even spacing underflows
        if explicit and self.L > 0 and any(
            a <= b for a, b in zip(self.distances, self.distances[1:])
        ):
            raise ValueError("distances must be strictly decreasing in k")

    def check_index(self, k: int) -> None:
        if not 1 <= k <= self.n:
            raise IndexError(f"player index {k} out of range 1..{self.n}")


@dataclass(frozen=True)
class NoiseBudget:
    """Noise terms for one honest player, all referred to that player's output.

    ``excess_total`` is the sum of ``epsilon_k``, evaluated as
    ``sum_k(T_k * eps0_k) / T_j`` so that every consumer sees identical bits.
    """

    honest_index: int
    T_honest: float
    chi_het: float
    epsilon_k: tuple[float, ...]
    excess_total: float
    chi_line: float
    chi_tot: float


def transmittance(layout: NetworkLayout, params: SystemParams, k: int) -> float:
    """Overall transmittance from player k to the dealer.

    The signal of player k crosses the ``n - k`` downstream stations, each
    contributing the beam-splitter transmittance ``t_B``.
    """
    layout.check_index(k)
    fiber = 10.0 ** (-params.gamma * layout.distances[k - 1] / 10.0)
    return params.t_B ** (layout.n - k) * fiber


def transmittances(layout: NetworkLayout, params: SystemParams) -> list[float]:
    return [transmittance(layout, params, k) for k in range(1, layout.n + 1)]


def effective_epsilon0(params: SystemParams, V_A: Optional[float] = None) -> float:
    """Per-player excess noise, including the phase-noise term when ``V_A`` is given."""
    if V_A is None:
        return params.epsilon0
    return params.epsilon0 + V_A * params.delta


def _player_va(V_A: Modulation, k: int) -> Optional[float]:
    if V_A is None or isinstance(V_A, (int, float)):
        return V_A
    return V_A[k - 1]


def excess_noise_referred(
    layout: NetworkLayout,
    params: SystemParams,
    j: int,
    k: int,
    V_A: Modulation = None,
) -> float:
    """Excess noise of player k referred to the input of honest player j."""
    layout.check_index(k)
    T_j = transmittance(layout, params, j)
    if T_j <= 0:
        raise ValueError("honest-player transmittance is zero")
    eps0 = effective_epsilon0(params, _player_va(V_A, k))
    if k == j:
        return eps0
    return transmittance(layout, params, k) / T_j * eps0


def player_epsilon0(layout: NetworkLayout, params: SystemParams, V_A: Modulation = None) -> list[float]:
    return [effective_epsilon0(params, _player_va(V_A, k)) for k in range(1, layout.n + 1)]


def dealer_excess(T: Sequence[float], eps0: Sequence[float]) -> float:
    """Total player excess noise as seen at the dealer, ``sum_k T_k eps0_k``."""
    return math.fsum(t * e for t, e in zip(T, eps0))


def chi_het(params: SystemParams) -> float:
    """Noise added by the dual-homodyne detector, referred to its input."""
    return (1.0 + (1.0 - params.eta_D) + 2.0 * params.nu_el) / params.eta_D


def chi_line_from(T_j: float, excess_total: float) -> float:
    return 1.0 / T_j - 1.0 + excess_total


def noise_budget(
    layout: NetworkLayout,
    params: SystemParams,
    j: int,
    V_A: Modulation = None,
    T: Optional[Sequence[float]] = None,
) -> NoiseBudget:
    """Noise budget with player ``j`` as the honest partner.

    ``T`` may carry precomputed transmittances (as from :func:`transmittances`).
    """
    layout.check_index(j)
    if T is None:
        T = transmittances(layout, params)
    T_j = T[j - 1]
    if T_j <= 0:
        raise ValueError("honest-player transmittance is zero")
    eps0 = player_epsilon0(layout, params, V_A)
    eps = tuple(e if k == j else T[k - 1] / T_j * e for k, e in enumerate(eps0, start=1))
    excess = dealer_excess(T, eps0) / T_j
    het = chi_het(params)
    line = chi_line_from(T_j, excess)
    return NoiseBudget(
        honest_index=j,
        T_honest=T_j,
        chi_het=het,
        epsilon_k=eps,
        excess_total=excess,
        chi_line=line,
        chi_tot=line + het / T_j,
    )
