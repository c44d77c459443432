"""Brute-force Gaussian-state computations used to cross-check the closed-form spectra.

Covariance matrices are in shot-noise units with quadrature ordering
(x1, p1, x2, p2, ...), so the vacuum is the identity.
"""

from __future__ import annotations

import numpy as np

PHYS_TOL = 1e-9
PAIR_RTOL = 1e-6


def omega(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _check_cov(cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
        raise ValueError(f"covariance matrix must be square with even size, got {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise ValueError("covariance matrix is not symmetric")
    return cov


def is_physical(cov: np.ndarray, tol: float = PHYS_TOL) -> bool:
    """Robertson-Schrodinger check ``cov + i*Omega >= 0``."""
    cov = _check_cov(cov)
    m = cov + 1j * omega(cov.shape[0] // 2)
    eig = np.linalg.eigvalsh(m)
    return bool(eig.min() >= -tol * max(1.0, np.abs(cov).max()))


def symplectic_eigs(cov: np.ndarray) -> list[float]:
    """Symplectic spectrum, sorted descending, one value per mode."""
    cov = _check_cov(cov)
    n = cov.shape[0] // 2
    try:
        ev = np.linalg.eigvals(1j * omega(n) @ cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("eigen-solver failed") from exc
    vals = sorted(np.abs(ev), reverse=True)
    # eigenvalues come in +/- pairs; take every other one after checking pairing
    out = []
    for a, b in zip(vals[0::2], vals[1::2]):
        if abs(a - b) > PAIR_RTOL * max(a, 1.0):
            raise ValueError(f"unpaired symplectic eigenvalues {a!r}, {b!r}")
        out.append(0.5 * (a + b))
    if out and out[-1] < 1.0 - PHYS_TOL:
        raise ValueError(f"symplectic eigenvalue {out[-1]!r} < 1: state is unphysical")
    return out


def build_eb_state(V: float, T: float, chi_line: float) -> np.ndarray:
    """Two-mode state shared by the honest player and the dealer's detector input.

    The player holds half of an EPR pair of variance ``V``; the other half
    crosses a channel of transmittance ``T`` and input-referred noise
    ``chi_line``.
    """
    if V < 1.0 or not 0.0 < T <= 1.0 or chi_line < 0.0:
        raise ValueError(f"need V >= 1, 0 < T <= 1, chi_line >= 0 (got {V}, {T}, {chi_line})")
    z = np.diag([1.0, -1.0])
    c = np.sqrt(T * (V * V - 1.0))
    I2 = np.eye(2)
    return np.block([[V * I2, c * z], [c * z, T * (V + chi_line) * I2]])


def _embed(S2: np.ndarray, modes: tuple[int, int], n_modes: int) -> np.ndarray:
    S = np.eye(2 * n_modes)
    idx = [2 * modes[0], 2 * modes[0] + 1, 2 * modes[1], 2 * modes[1] + 1]
    S[np.ix_(idx, idx)] = S2
    return S


def beam_splitter(eta: float, i: int, j: int, n_modes: int) -> np.ndarray:
    t, r = np.sqrt(eta), np.sqrt(1.0 - eta)
    I2 = np.eye(2)
    return _embed(np.block([[t * I2, r * I2], [-r * I2, t * I2]]), (i, j), n_modes)


def two_mode_squeezer(gain: float, i: int, j: int, n_modes: int) -> np.ndarray:
    """Phase-insensitive amplifier of ``gain`` on mode i with idler j."""
    a, b = np.sqrt(gain), np.sqrt(gain - 1.0)
    z = np.diag([1.0, -1.0])
    return _embed(np.block([[a * np.eye(2), b * z], [b * z, a * np.eye(2)]]), (i, j), n_modes)


def epr(v: float) -> np.ndarray:
    z = np.diag([1.0, -1.0])
    c = np.sqrt(v * v - 1.0)
    return np.block([[v * np.eye(2), c * z], [c * z, v * np.eye(2)]])


def condition_on_heterodyne(cov: np.ndarray, mode: int) -> np.ndarray:
    """Covariance of the remaining modes after heterodyning ``mode``."""
    cov = _check_cov(cov)
    b = [2 * mode, 2 * mode + 1]
    rest = [i for i in range(cov.shape[0]) if i not in b]
    g_a = cov[np.ix_(rest, rest)]
    g_b = cov[np.ix_(b, b)]
    s = cov[np.ix_(rest, b)]
    m = g_b + np.eye(2)
    if abs(np.linalg.det(m)) < 1e-300:
        raise ValueError("singular heterodyne conditioning matrix")
    return g_a - s @ np.linalg.solve(m, s.T)


def detector_purification(cov_ab: np.ndarray, eta_D: float, nu_el: float) -> tuple[np.ndarray, int]:
    """Embed the trusted detector imperfections as a Gaussian unitary with ancillas.

    Returns the joint covariance and the index of the mode that is finally
    heterodyned. Mode 0 is the player's mode. For ``eta_D < 1`` the detector is
    a beam splitter fed by one half of an EPR pair of variance
    ``1 + 2 nu_el / (1 - eta_D)``. For ``eta_D == 1`` the electronic noise is
    an additive Gaussian channel of variance ``2 nu_el``, dilated as loss
    followed by amplification with vacuum ancillas.
    """
    cov_ab = _check_cov(cov_ab)
    if cov_ab.shape != (4, 4):
        raise ValueError("expected a two-mode covariance matrix")
    if not 0.0 < eta_D <= 1.0 or nu_el < 0.0:
        raise ValueError("need 0 < eta_D <= 1 and nu_el >= 0")
    full = np.zeros((8, 8))
    full[:4, :4] = cov_ab
    if eta_D < 1.0:
        # modes: 0 player, 1 detector input, 2 EPR half entering the splitter, 3 its twin
        full[4:, 4:] = epr(1.0 + 2.0 * nu_el / (1.0 - eta_D))
        S = beam_splitter(eta_D, 1, 2, 4)
    else:
        # modes: 0 player, 1 detector input, 2 loss ancilla, 3 amplifier idler
        full[4:, 4:] = np.eye(4)
        noise = 2.0 * nu_el
        eta_a = 2.0 / (2.0 + noise)
        S = two_mode_squeezer(1.0 / eta_a, 1, 3, 4) @ beam_splitter(eta_a, 1, 2, 4)
    return S @ full @ S.T, 1


def conditional_state_after_heterodyne(
    cov_ab: np.ndarray, eta_D: float, nu_el: float
) -> np.ndarray:
    """State of the player's mode plus detector ancillas given the dealer's outcome.

    The result is 6x6; its symplectic spectrum is (l3, l4, 1).
    """
    joint, measured = detector_purification(cov_ab, eta_D, nu_el)
    return condition_on_heterodyne(joint, measured)


def spectra(V: float, T: float, chi_line: float, eta_D: float, nu_el: float) -> tuple[list[float], list[float]]:
    """Numeric (l1, l2) and (l3, l4, l5) for one parameter tuple."""
    ab = build_eb_state(V, T, chi_line)
    cond = conditional_state_after_heterodyne(ab, eta_D, nu_el)
    return symplectic_eigs(ab), symplectic_eigs(cond)


def random_symplectic_rotation(rng: np.random.Generator, n_modes: int) -> np.ndarray:
    """Product of independent phase rotations and random beam splitters."""
    S = np.eye(2 * n_modes)
    for i in range(n_modes):
        th = rng.uniform(0, 2 * np.pi)
        R = np.eye(2 * n_modes)
        R[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]
        S = R @ S
    for i in range(n_modes - 1):
        S = beam_splitter(rng.uniform(0.05, 0.95), i, i + 1, n_modes) @ S
    return S
