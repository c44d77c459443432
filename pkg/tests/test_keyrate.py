import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvqss.gaussian_oracle import build_eb_state, spectra, symplectic_eigs
from cvqss.keyrate import (
    UnphysicalParametersError,
    g_func,
    holevo_bound,
    invariants_12,
    invariants_34,
    key_rate,
    min_rate_fast,
    mutual_information,
    player_rate,
    phase_noise_excess,
    qss_rate,
    rate_from_channel,
    symplectic_12,
    symplectic_34,
)
from cvqss.model import NetworkLayout, SystemParams, chi_het, noise_budget

IDEAL = SystemParams(gamma=0.0, epsilon0=0.0, nu_el=0.0, eta_D=1.0, f_rec=1.0)
FIG3 = SystemParams(epsilon0=0.01)
FIG4 = SystemParams(epsilon0=0.001)


def _g_ref(x):
    x = mp.mpf(x)
    return float((x + 1) * mp.log(x + 1, 2) - x * mp.log(x, 2)) if x > 0 else 0.0


@pytest.mark.parametrize("x", [0.0, 1.0, 3.0, 1e-8, 0.37, 12.5, 1e4])
def test_g_against_high_precision(x):
    assert g_func(x) == pytest.approx(_g_ref(x), rel=1e-13, abs=1e-15)


def test_g_reference_points():
    assert g_func(0.0) == 0.0
    assert g_func(1.0) == 2.0
    assert g_func(3.0) == pytest.approx(3.2451124978365313, rel=1e-14)
    with pytest.raises(UnphysicalParametersError):
        g_func(-1e-6)


def test_mutual_information_points():
    assert mutual_information(4.0, 1.0) == pytest.approx(math.log2(3.0), rel=1e-15)
    assert mutual_information(4.0, 0.0) == pytest.approx(math.log2(5.0), rel=1e-15)
    assert mutual_information(1e-12, 2.0) == pytest.approx(0.0, abs=1e-11)


def test_phase_noise_points():
    assert phase_noise_excess(4.0, 1e-3) == pytest.approx(0.004)
    assert phase_noise_excess(4.0, 0.0) == 0.0
    assert phase_noise_excess(10.0, 1e-4) == pytest.approx(0.001)


def test_lossless_eigenvalues_are_pure():
    for V in (1.5, 5.0, 101.0):
        assert symplectic_12(V, 1.0, 0.0) == (1.0, 1.0)
        assert symplectic_34(V, 1.0, 0.0, 1.0, 1.0) == pytest.approx((1.0, 1.0), abs=1e-12)


def test_closed_form_matches_oracle_reference_tuple():
    V, T, chi = 5.0, 0.1, 9.041623
    num12, _ = spectra(V, T, chi, 0.5, 0.1)
    assert symplectic_12(V, T, chi) == pytest.approx(tuple(num12), rel=1e-9)


def test_fig3_ten_km_matches_oracle():
    lay, va = NetworkLayout(n=2, L=10.0), 4.0
    b = noise_budget(lay, FIG3, 1)
    V = va + 1
    l12, l345 = spectra(V, b.T_honest, b.chi_line, FIG3.eta_D, FIG3.nu_el)
    assert symplectic_12(V, b.T_honest, b.chi_line) == pytest.approx(tuple(l12), rel=1e-9)
    l34 = symplectic_34(V, b.T_honest, b.chi_line, b.chi_het, b.chi_tot)
    assert l34 == pytest.approx(tuple(l345[:2]), rel=1e-9)
    assert l345[2] == pytest.approx(1.0, abs=1e-9)


def test_unphysical_inputs_raise():
    with pytest.raises(UnphysicalParametersError):
        symplectic_12(5.0, 0.5, -0.2)  # chi_line = -1/V is outside the domain
    with pytest.raises(UnphysicalParametersError):
        symplectic_12(0.5, 0.5, 1.0)
    with pytest.raises(UnphysicalParametersError):
        symplectic_34(5.0, 0.5, 1.0, 0.5, 3.0)


def test_holevo_zero_for_pure():
    assert holevo_bound([1.0] * 5) == 0.0


@pytest.mark.parametrize("va", [0.01, 0.5, 3.0, 40.0, 999.0])
def test_lossless_limit(va):
    r = rate_from_channel(va, 1.0, 0.0, IDEAL)
    assert r.chi_BE == 0.0
    assert abs(r.R - math.log2((va + 2.0) / 2.0)) < 1e-12
    assert r.chi_tot == 1.0


def test_lossless_rate_at_va_three():
    # chi_tot = 1 so I_AB = log2((V_A + 2) / 2)
    assert key_rate(NetworkLayout(n=1, L=0.0), IDEAL, 3.0, 1) == pytest.approx(math.log2(2.5), abs=1e-12)
    assert key_rate(NetworkLayout(n=1, L=0.0), IDEAL, 2.0, 1) == pytest.approx(1.0, abs=1e-12)


def test_vanishing_modulation_without_excess_noise():
    lay = NetworkLayout(n=2, L=10.0)
    r = player_rate(lay, SystemParams(epsilon0=0.0), 1e-9, 1)
    assert abs(r.I_AB) < 1e-9 and abs(r.chi_BE) < 1e-12
    assert abs(r.R) < 1e-9


def test_vanishing_modulation_with_excess_noise_stays_negative():
    # the eavesdropper still learns about the dealer's noise, so R tends to
    # -chi_BE(V=1) < 0 rather than to zero
    lay = NetworkLayout(n=2, L=10.0)
    rs = [player_rate(lay, FIG3, va, 1) for va in (1e-5, 1e-7, 1e-9)]
    assert all(r.I_AB < 1e-4 and r.R < 0 for r in rs)
    assert rs[-1].R == pytest.approx(rs[-2].R, rel=1e-6)
    b = noise_budget(lay, FIG3, 1)
    l12, l345 = spectra(1.0, b.T_honest, b.chi_line, FIG3.eta_D, FIG3.nu_el)
    assert -rs[-1].R == pytest.approx(holevo_bound(l12 + l345), rel=1e-6)


def test_single_player_report():
    rep = qss_rate(NetworkLayout(n=1, L=20.0), FIG3, 3.0)
    assert rep.R_qss == rep.per_player[0].R and rep.argmin_j == 1


def test_fig3_min_is_farthest_player():
    rep = qss_rate(NetworkLayout(n=2, L=10.0), FIG3, 4.0)
    assert rep.argmin_j == 1
    assert rep.per_player[0].R < rep.per_player[1].R


@pytest.mark.parametrize("n,L", [(2, 10.0), (10, 20.0), (50, 5.0), (100, 30.0)])
def test_farthest_player_binds_under_equal_spacing(n, L):
    rep = qss_rate(NetworkLayout(n=n, L=L), FIG4, 5.0)
    assert rep.argmin_j == 1
    assert all(rep.R_qss <= p.R for p in rep.per_player)


def test_fig4_operating_point_holevo_nonnegative():
    rep = qss_rate(NetworkLayout(n=100, L=20.0), FIG4, 5.74)
    assert rep.per_player[0].chi_BE >= 0.0


def test_deterministic():
    lay = NetworkLayout(n=7, L=33.0)
    a = qss_rate(lay, FIG3, 2.5)
    b = qss_rate(lay, FIG3, 2.5)
    assert a == b


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 30), st.floats(0.0, 80.0), st.floats(0.02, 200.0))
def test_fast_objective_matches_scalar_path(n, L, va):
    lay = NetworkLayout(n=n, L=L)
    try:
        ref = qss_rate(lay, FIG3, va).R_qss
    except UnphysicalParametersError:
        assert math.isnan(min_rate_fast(lay, FIG3, va))
        return
    assert min_rate_fast(lay, FIG3, va) == pytest.approx(ref, rel=1e-12, abs=1e-13)


@settings(max_examples=150, deadline=None)
@given(
    st.floats(1.001, 100.0),
    st.floats(0.001, 1.0),
    st.floats(0.0, 20.0),
    st.floats(0.05, 0.999),
    st.floats(0.0, 0.5),
)
def test_closed_forms_match_oracle_property(V, T, chi, eta, nu):
    if chi < 1 / T - 1:
        chi = 1 / T - 1 + chi  # keep the channel physical
    l12, l345 = spectra(V, T, chi, eta, nu)
    assert np.allclose(symplectic_12(V, T, chi), l12, rtol=1e-9, atol=0)
    het = (1 + (1 - eta) + 2 * nu) / eta
    tot = chi + het / T
    assert np.allclose(symplectic_34(V, T, chi, het, tot), l345[:2], rtol=1e-9, atol=0)


def test_eb_state_spectrum_pure_for_lossless():
    assert symplectic_eigs(build_eb_state(7.0, 1.0, 0.0)) == pytest.approx([1.0, 1.0], abs=1e-9)


# --- monotonicity on a sampled grid at fixed modulation


VAS = (0.5, 2.0, 5.0, 20.0)


@pytest.mark.parametrize("va", VAS)
def test_rate_nonincreasing_in_length(va):
    for n in (1, 5, 20):
        rs = [qss_rate(NetworkLayout(n=n, L=L), FIG4, va).R_qss for L in np.arange(0, 80, 2.5)]
        pos = [r for r in rs if r > 0]
        assert pos == rs[: len(pos)]
        assert all(b <= a for a, b in zip(pos, pos[1:]))


def test_raw_rate_recovers_towards_zero_in_the_no_key_tail():
    # far past the cutoff the negative rate shrinks in magnitude with distance
    lay = lambda L: NetworkLayout(n=20, L=L)
    r62, r70 = (qss_rate(lay(L), FIG4, 20.0).R_qss for L in (62.5, 70.0))
    assert r62 < r70 < 0


@pytest.mark.parametrize("va", VAS)
def test_rate_nonincreasing_in_epsilon0(va):
    lay = NetworkLayout(n=5, L=20.0)
    rs = [qss_rate(lay, SystemParams(epsilon0=e), va).R_qss for e in np.linspace(0, 0.1, 21)]
    assert all(b <= a for a, b in zip(rs, rs[1:]))


@pytest.mark.parametrize("va", VAS)
def test_rate_nonincreasing_in_electronic_noise(va):
    lay = NetworkLayout(n=5, L=20.0)
    rs = [qss_rate(lay, SystemParams(epsilon0=0.001, nu_el=v), va).R_qss for v in np.linspace(0, 0.5, 21)]
    assert all(b <= a for a, b in zip(rs, rs[1:]))


@pytest.mark.parametrize("va", VAS)
def test_rate_nonincreasing_in_players(va):
    for L in (0.0, 10.0, 40.0):
        rs = [qss_rate(NetworkLayout(n=n, L=L), FIG4, va).R_qss for n in range(1, 40)]
        assert all(b <= a for a, b in zip(rs, rs[1:]))


@pytest.mark.parametrize("va", VAS)
def test_rate_nondecreasing_in_reconciliation_efficiency(va):
    lay = NetworkLayout(n=5, L=20.0)
    rs = [qss_rate(lay, SystemParams(epsilon0=0.001, f_rec=f), va).R_qss for f in np.linspace(0.8, 1.0, 21)]
    assert all(b >= a for a, b in zip(rs, rs[1:]))


@settings(max_examples=300, deadline=None)
@given(
    st.floats(1.0, 1000.0),
    st.floats(1e-4, 1.0),
    st.floats(0.0, 20.0),
    st.floats(0.05, 1.0),
    st.floats(0.0, 0.5),
)
def test_factored_pairs_reproduce_trace_and_determinant(V, T, extra, eta, nu):
    chi = 1 / T - 1 + extra
    het = (1 + (1 - eta) + 2 * nu) / eta
    tot = chi + het / T
    A, B = invariants_12(V, T, chi)
    l1, l2 = symplectic_12(V, T, chi)
    assert l1 * l1 + l2 * l2 == pytest.approx(A, rel=1e-12)
    assert (l1 * l2) ** 2 == pytest.approx(B, rel=1e-12)
    C, D = invariants_34(V, T, chi, het, tot)
    l3, l4 = symplectic_34(V, T, chi, het, tot)
    assert l3 * l3 + l4 * l4 == pytest.approx(C, rel=1e-10)
    assert (l3 * l4) ** 2 == pytest.approx(D, rel=1e-10)


@pytest.mark.parametrize("V,T", [(1.0078125, 0.99999), (2.0, 1 - 1e-9), (500.0, 0.999999)])
def test_near_degenerate_pure_loss_pairs(V, T):
    chi = 1 / T - 1
    l12, _ = spectra(V, T, chi, 0.5, 0.0)
    assert symplectic_12(V, T, chi) == pytest.approx(tuple(l12), rel=1e-9)


def test_inconsistent_total_noise_rejected():
    with pytest.raises(ValueError):
        symplectic_34(5.0, 0.5, 1.5, 3.4, 99.0)
