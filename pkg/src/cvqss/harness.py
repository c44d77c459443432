"""Distance sweeps, the built-in figure configurations, CSV and gnuplot output."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional

from .config import OptimizerConfig, length_grid
from .keyrate import qss_rate
from .model import NetworkLayout, SystemParams
from .optimizer import optimize_va

CSV_HEADER = [
    "L", "n", "delta", "V_A_opt", "I_AB", "chi_BE", "R_raw", "R_clamped", "argmin_j", "boundary",
]


@dataclass(frozen=True)
class SweepSpec:
    lengths: tuple[float, ...]
    players: tuple[int, ...]
    params: SystemParams
    deltas: tuple[float, ...] = (0.0,)
    optimizer: OptimizerConfig = OptimizerConfig()
    name: str = "sweep"

    def __post_init__(self) -> None:
        if not self.lengths or not self.players or not self.deltas:
            raise ValueError("lengths, players and deltas must be non-empty")
        if any(L < 0 for L in self.lengths):
            raise ValueError("lengths must be >= 0")


@dataclass(frozen=True)
class SweepRow:
    L: float
    n: int
    delta: float
    V_A_opt: float
    I_AB: float
    chi_BE: float
    R_raw: float
    R_clamped: float
    argmin_j: int
    boundary: bool

    def cells(self) -> list[str]:
        return [
            repr(self.L), str(self.n), repr(self.delta), repr(self.V_A_opt), repr(self.I_AB),
            repr(self.chi_BE), repr(self.R_raw), repr(self.R_clamped), str(self.argmin_j),
            str(int(self.boundary)),
        ]


FIG3 = SweepSpec(
    lengths=length_grid(0.0, 100.0, 1.0),
    players=(2, 5, 10, 20),
    params=SystemParams(gamma=0.2, epsilon0=0.01, nu_el=0.1, eta_D=0.5, f_rec=0.95),
    name="fig3",
)
FIG4 = SweepSpec(
    lengths=length_grid(0.0, 100.0, 1.0),
    players=(10, 20, 50, 100),
    params=SystemParams(gamma=0.2, epsilon0=0.001, nu_el=0.1, eta_D=0.5, f_rec=0.95),
    name="fig4",
)
FIG5 = SweepSpec(
    lengths=length_grid(0.0, 100.0, 1.0),
    players=(20,),
    params=SystemParams(gamma=0.2, epsilon0=0.001, nu_el=0.1, eta_D=0.5, f_rec=0.95),
    deltas=(0.0, 1e-4, 1e-3),
    name="fig5",
)
FIGURES = {"fig3": FIG3, "fig4": FIG4, "fig5": FIG5}


def sweep_point(params: SystemParams, n: int, L: float, delta: float, opt: OptimizerConfig) -> SweepRow:
    """Optimize V_A at one grid point and record the limiting player's figures."""
    p = replace(params, delta=delta)
    layout = NetworkLayout(n=n, L=L)
    res = optimize_va(layout, p, opt.bounds, opt.grid_points, opt.iterations, opt.policy)
    report = qss_rate(layout, p, res.V_A_opt)
    limiting = report.per_player[report.argmin_j - 1]
    return SweepRow(
        L=L, n=n, delta=delta, V_A_opt=res.V_A_opt, I_AB=limiting.I_AB, chi_BE=limiting.chi_BE,
        R_raw=report.R_qss, R_clamped=max(report.R_qss, 0.0), argmin_j=report.argmin_j,
        boundary=res.at_boundary,
    )


def _point(args) -> SweepRow:
    return sweep_point(*args)


def run_sweep(spec: SweepSpec, workers: int = 1, players: Optional[Iterable[int]] = None) -> list[SweepRow]:
    """Every (n, delta, L) point of the spec, sorted by (n, delta, L)."""
    ns = spec.players if players is None else tuple(players)
    jobs = [
        (spec.params, n, L, d, spec.optimizer)
        for n in sorted(ns) for d in sorted(spec.deltas) for L in sorted(spec.lengths)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_point, jobs, chunksize=8))
    else:
        rows = [_point(j) for j in jobs]
    return sorted(rows, key=lambda r: (r.n, r.delta, r.L))


def max_distance(
    spec: SweepSpec,
    n: int,
    rate_floor: float = 0.0,
    delta: Optional[float] = None,
    rows: Optional[list[SweepRow]] = None,
) -> Optional[float]:
    """Largest grid length with ``R_raw > rate_floor``; ``None`` if there is none."""
    lengths = sorted(spec.lengths)
    if any(b - a > 1.0 + 1e-12 for a, b in zip(lengths, lengths[1:])):
        raise ValueError("length grid must have a resolution of 1 km or finer")
    d = spec.deltas[0] if delta is None else delta
    if rows is None:
        rows = run_sweep(replace(spec, deltas=(d,)), players=(n,))
    good = [r.L for r in rows if r.n == n and r.delta == d and r.R_raw > rate_floor]
    return max(good) if good else None


def write_sweep_csv(rows: list[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.cells())


def read_sweep_csv(path: str | Path) -> list[SweepRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        for i, rec in enumerate(reader, start=2):
            if len(rec) != len(CSV_HEADER):
                raise ValueError(f"{path}:{i}: expected {len(CSV_HEADER)} fields")
            try:
                rows.append(
                    SweepRow(
                        L=float(rec[0]), n=int(rec[1]), delta=float(rec[2]), V_A_opt=float(rec[3]),
                        I_AB=float(rec[4]), chi_BE=float(rec[5]), R_raw=float(rec[6]),
                        R_clamped=float(rec[7]), argmin_j=int(rec[8]), boundary=rec[9] == "1",
                    )
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{i}: {exc}") from exc
    return rows


def series(rows: list[SweepRow]) -> dict[tuple[int, float], list[SweepRow]]:
    out: dict[tuple[int, float], list[SweepRow]] = {}
    for r in rows:
        out.setdefault((r.n, r.delta), []).append(r)
    return out


def emit_plot_script(csv_path: str | Path, script_path: str | Path | None = None) -> Path:
    """Write a gnuplot script with the data inlined, one curve per (n, delta).

    Points with ``R_raw <= 0`` are written as blank lines so the curve breaks
    there instead of dropping to the log-scale floor.
    """
    csv_path = Path(csv_path)
    rows = read_sweep_csv(csv_path)
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    groups = series(rows)
    vary_delta = len({d for _, d in groups}) > 1
    vary_n = len({n for n, _ in groups}) > 1 or not vary_delta
    lines = [
        f"# generated from {csv_path.name}",
        f"set title '{csv_path.stem}'",
        "set xlabel 'Fiber length L (km)'",
        "set ylabel 'Secure key rate (bits/pulse)'",
        "set logscale y",
        "set format y '10^{%L}'",
        "set key top right",
        "",
    ]
    plots = []
    for i, ((n, d), grp) in enumerate(sorted(groups.items()), start=1):
        lines.append(f"$s{i} << EOD")
        gap = False
        for r in sorted(grp, key=lambda r: r.L):
            if r.R_raw > 0:
                lines.append(f"{r.L!r} {r.R_raw!r}")
                gap = False
            elif not gap:
                lines.append("")
                gap = True
        lines.append("EOD")
        label = []
        if vary_n:
            label.append(f"n={n}")
        if vary_delta:
            label.append(f"delta={d:g}")
        plots.append(f"$s{i} using 1:2 with lines lw 2 title '{', '.join(label)}'")
    lines.append("")
    lines.append("plot " + ", \\\n     ".join(plots))
    out = Path(script_path) if script_path else csv_path.with_suffix(".gp")
    out.write_text("\n".join(lines) + "\n")
    return out


def run_figures(out_dir: str | Path, workers: int = 1) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, spec in FIGURES.items():
        csv_path = out_dir / f"{name}.csv"
        write_sweep_csv(run_sweep(spec, workers), csv_path)
        written += [csv_path, emit_plot_script(csv_path)]
    return written
