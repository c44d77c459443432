import math
from collections import defaultdict
from dataclasses import replace

import pytest

from cvqss.config import OptimizerConfig
from cvqss.harness import (
    CSV_HEADER,
    FIG3,
    FIG4,
    FIG5,
    SweepRow,
    SweepSpec,
    emit_plot_script,
    max_distance,
    read_sweep_csv,
    run_sweep,
    sweep_point,
    write_sweep_csv,
)
from cvqss.model import SystemParams
from cvqss.optimizer import optimize_va
from cvqss.model import NetworkLayout


def _block(spec):
    p = spec.params
    return dict(gamma=p.gamma, epsilon0=p.epsilon0, nu_el=p.nu_el, eta_D=p.eta_D, f_rec=p.f_rec,
                t_B=p.t_B, delta=p.delta, players=spec.players, deltas=spec.deltas)


def test_figure_parameter_blocks():
    assert _block(FIG3) == dict(gamma=0.2, epsilon0=0.01, nu_el=0.1, eta_D=0.5, f_rec=0.95,
                                t_B=1.0, delta=0.0, players=(2, 5, 10, 20), deltas=(0.0,))
    assert _block(FIG4) == dict(gamma=0.2, epsilon0=0.001, nu_el=0.1, eta_D=0.5, f_rec=0.95,
                                t_B=1.0, delta=0.0, players=(10, 20, 50, 100), deltas=(0.0,))
    assert _block(FIG5) == dict(gamma=0.2, epsilon0=0.001, nu_el=0.1, eta_D=0.5, f_rec=0.95,
                                t_B=1.0, delta=0.0, players=(20,), deltas=(0.0, 1e-4, 1e-3))
    for spec in (FIG3, FIG4, FIG5):
        assert spec.lengths[0] == 0.0 and spec.lengths[1] - spec.lengths[0] == 1.0


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(lengths=(), players=(2,), params=SystemParams())
    with pytest.raises(ValueError):
        SweepSpec(lengths=(-1.0,), players=(2,), params=SystemParams())


def test_lossless_single_point_hits_upper_bound():
    ideal = SystemParams(gamma=0.0, epsilon0=0.0, nu_el=0.0, eta_D=1.0, f_rec=1.0)
    row = sweep_point(ideal, 1, 0.0, 0.0, OptimizerConfig())
    assert row.boundary and row.V_A_opt == pytest.approx(1000.0)
    assert row.R_raw == pytest.approx(math.log2((row.V_A_opt + 2) / 2), abs=1e-12)


def test_fig3_rows(fig_rows):
    rows = fig_rows("fig3")
    assert [(r.n, r.L) for r in rows] == sorted((r.n, r.L) for r in rows)
    assert all(r.R_clamped == max(r.R_raw, 0.0) for r in rows)
    by_n = defaultdict(list)
    for r in rows:
        by_n[r.n].append(r)
    for n, g in by_n.items():
        clamped = [r.R_clamped for r in g]
        assert all(b <= a for a, b in zip(clamped, clamped[1:])), n
        pos = [r.R_raw for r in g if r.R_raw > 0]
        assert all(b <= a for a, b in zip(pos, pos[1:])), n
    at = defaultdict(dict)
    for r in rows:
        at[r.L][r.n] = r.R_raw
    for L, d in at.items():
        vals = [d[n] for n in sorted(d)]
        assert all(b <= a for a, b in zip(vals, vals[1:])), L


def test_fig3_reach(fig_rows):
    rows = fig_rows("fig3")
    reach = {n: max_distance(FIG3, n, rows=rows) for n in FIG3.players}
    assert reach[2] >= reach[20]
    assert reach == {2: 82.0, 5: 39.0, 10: 20.0, 20: 7.0}


def test_fig4_hundred_players_crossover():
    # the rate turns negative just short of 20 km
    reach = max_distance(replace(FIG4, lengths=tuple(float(L) for L in range(15, 25))), 100)
    assert reach == 19.0
    p = FIG4.params
    assert optimize_va(NetworkLayout(n=100, L=19.9), p).R_opt > 0
    assert optimize_va(NetworkLayout(n=100, L=20.0), p).R_opt < 0


def test_huge_noise_has_no_reach():
    spec = replace(FIG3, params=replace(FIG3.params, epsilon0=10.0), lengths=(0.0, 1.0, 2.0))
    assert max_distance(spec, 2) is None


def test_coarse_grid_rejected():
    spec = replace(FIG3, lengths=(0.0, 5.0))
    with pytest.raises(ValueError):
        max_distance(spec, 2)


def test_fig5_phase_ordering(fig_rows):
    rows = fig_rows("fig5")
    at = defaultdict(dict)
    for r in rows:
        at[r.L][r.delta] = r.R_raw
    assert all(d[0.0] >= d[1e-4] >= d[1e-3] for d in at.values())
    assert any(d[1e-3] > 0 for d in at.values())


def test_csv_round_trip_and_plot(tmp_path, fig_rows):
    rows = fig_rows("fig3")
    path = tmp_path / "fig3.csv"
    write_sweep_csv(rows, path)
    assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    assert read_sweep_csv(path) == rows
    script = emit_plot_script(path).read_text()
    assert script.count("<< EOD") == 4
    assert "set logscale y" in script
    for n in (2, 5, 10, 20):
        assert f"title 'n={n}'" in script


def test_fig5_plot_has_three_series(tmp_path, fig_rows):
    path = tmp_path / "fig5.csv"
    write_sweep_csv(fig_rows("fig5"), path)
    script = emit_plot_script(path).read_text()
    assert script.count("<< EOD") == 3
    assert "delta=0.0001" in script and "delta=0.001" in script


def test_negative_rates_break_the_curve(tmp_path):
    rows = [SweepRow(L, 2, 0.0, 1.0, 0.1, 0.1, R, max(R, 0.0), 1, False)
            for L, R in [(0.0, 0.5), (1.0, -0.1), (2.0, -0.2), (3.0, 0.2)]]
    path = tmp_path / "s.csv"
    write_sweep_csv(rows, path)
    body = emit_plot_script(path).read_text().split("<< EOD\n")[1].split("EOD")[0]
    assert body == "0.0 0.5\n\n3.0 0.2\n"


def test_empty_csv_is_an_error(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text(",".join(CSV_HEADER) + "\n")
    with pytest.raises(ValueError):
        emit_plot_script(path)
    path.write_text("")
    with pytest.raises(ValueError):
        emit_plot_script(path)


def test_malformed_csv(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_sweep_csv(path)


def test_sweep_is_deterministic():
    spec = replace(FIG3, lengths=(0.0, 10.0, 30.0), players=(2, 5))
    assert run_sweep(spec) == run_sweep(spec)
