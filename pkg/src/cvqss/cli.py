"""Command-line entry point.

Exit codes: 0 success, 2 config/usage error, 3 no positive key rate,
4 estimation failure or tamper signal, 5 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .config import Config, ConfigError, load_config
from .harness import (
    SweepSpec,
    emit_plot_script,
    max_distance,
    run_figures,
    run_sweep,
    write_sweep_csv,
)
from .keyrate import UnphysicalParametersError, qss_rate
from .model import NetworkLayout
from .montecarlo import read_batch_csv, simulate, write_batch_csv
from .optimizer import OptimizationError, optimize_va
from .postprocess import (
    PLAYER_CSV_HEADER,
    EstimationError,
    player_rows,
    qss_round,
    recover,
    share,
)

EXIT_OK, EXIT_CONFIG, EXIT_NO_KEY, EXIT_ESTIMATION, EXIT_IO = 0, 2, 3, 4, 5

log = logging.getLogger("cvqss")


class UsageError(Exception):
    pass


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="JSON configuration file")
    parser.add_argument("--seed", type=int, default=d(None), help="unsigned 64-bit master seed")
    parser.add_argument("--out", default=d(None), help="output file or directory")
    parser.add_argument("--threads", type=int, default=d(None), help="worker count (env CVQSS_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvqss", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help)
        _global_flags(sp, suppress=True)
        return sp

    for name, help in (("keyrate", "key rate at a single operating point"),
                       ("optimize", "optimize the modulation variance")):
        sp = add(name, help)
        sp.add_argument("--n", type=int, help="number of players")
        sp.add_argument("--L", type=float, help="dealer to farthest player distance (km)")
        if name == "keyrate":
            sp.add_argument("--va", type=float, help="modulation variance (optimized if omitted)")
        sp.add_argument("--json", action="store_true", help="print JSON instead of key=value lines")

    sp = add("sweep", "distance sweep from the config's sweep section")
    sp.add_argument("--no-plot", action="store_true")
    sp.add_argument("--max-distance", action="store_true", help="also print the reach of every n")

    sp = add("simulate", "Monte-Carlo batch to CSV")
    sp.add_argument("--n", type=int)
    sp.add_argument("--L", type=float)
    sp.add_argument("--va", type=float)
    sp.add_argument("--pulses", type=int)

    sp = add("estimate", "post-process a simulated batch CSV")
    sp.add_argument("batch", help="batch CSV written by 'simulate'")
    sp.add_argument("--csv", help="also write per-player estimates to this CSV")

    add("figures", "run the three built-in figure sweeps")

    for name in ("share", "recover"):
        sp = add(name, "XOR (n, n) sharing of a file" if name == "share" else "undo 'share'")
        sp.add_argument("input", help="message (share) or broadcast (recover) file")
        sp.add_argument("keys", nargs="+", help="key files, one per player")
    return parser


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("CVQSS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"CVQSS_THREADS must be an integer, got {env!r}") from None
    return 1


def _layout(cfg: Config, args) -> NetworkLayout:
    n = getattr(args, "n", None)
    L = getattr(args, "L", None)
    if n is None and L is None:
        if cfg.layout is None:
            raise UsageError("no layout: give --n and --L or a 'layout' config section")
        return cfg.layout
    base = cfg.layout
    n = n if n is not None else (base.n if base else None)
    L = L if L is not None else (base.L if base else None)
    if n is None or L is None:
        raise UsageError("both --n and --L are required without a config layout")
    try:
        return NetworkLayout(n=n, L=L)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _emit(lines: Sequence[str], out: Optional[str]) -> None:
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _optimize(cfg: Config, layout: NetworkLayout):
    o = cfg.optimizer
    return optimize_va(layout, cfg.params, o.bounds, o.grid_points, o.iterations, o.policy)


def cmd_keyrate(cfg: Config, args) -> int:
    layout = _layout(cfg, args)
    va = args.va if args.va is not None else cfg.V_A
    opt = None
    if va is None:
        opt = _optimize(cfg, layout)
        va = opt.V_A_opt
    report = qss_rate(layout, cfg.params, va)
    if args.json:
        d = report.as_dict()
        if opt is not None:
            d["optimizer"] = {"evaluations": opt.evaluations, "at_boundary": opt.at_boundary,
                              "bounds": list(cfg.optimizer.bounds)}
        _emit([json.dumps(d, indent=2)], args.out)
    else:
        lines = [f"n={layout.n}", f"L={layout.L!r}", f"V_A={va!r}",
                 f"R_qss={report.R_qss!r}", f"argmin_j={report.argmin_j}"]
        for pr in report.per_player:
            lines.append(
                f"player={pr.honest_index} T={pr.T!r} I_AB={pr.I_AB!r} chi_BE={pr.chi_BE!r} "
                f"R={pr.R!r} lambda={','.join(repr(x) for x in pr.lambdas)}"
            )
        if opt is not None:
            lines.append(f"optimizer_boundary={str(opt.at_boundary).lower()}")
        _emit(lines, args.out)
    return EXIT_OK if report.R_qss > 0 else EXIT_NO_KEY


def cmd_optimize(cfg: Config, args) -> int:
    layout = _layout(cfg, args)
    res = _optimize(cfg, layout)
    d = {"n": layout.n, "L": layout.L, "V_A_opt": res.V_A_opt, "R_opt": res.R_opt,
         "evaluations": res.evaluations, "bracket": list(res.bracket),
         "at_boundary": res.at_boundary, "bounds": list(cfg.optimizer.bounds)}
    if args.json:
        _emit([json.dumps(d, indent=2)], args.out)
    else:
        _emit([f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in d.items()], args.out)
    return EXIT_OK


def cmd_sweep(cfg: Config, args) -> int:
    if cfg.sweep is None:
        raise UsageError("sweep needs a 'sweep' section in the config")
    spec = SweepSpec(lengths=cfg.sweep.lengths, players=cfg.sweep.players, params=cfg.params,
                     deltas=cfg.sweep.deltas, optimizer=cfg.optimizer)
    rows = run_sweep(spec, _threads(args))
    out = Path(args.out or "sweep.csv")
    write_sweep_csv(rows, out)
    if not args.no_plot:
        emit_plot_script(out)
    if args.max_distance:
        for n in sorted(spec.players):
            for d in sorted(spec.deltas):
                reach = max_distance(spec, n, delta=d, rows=rows)
                print(f"n={n} delta={d!r} max_distance={'none' if reach is None else repr(reach)}")
    return EXIT_OK


def cmd_simulate(cfg: Config, args) -> int:
    layout = _layout(cfg, args)
    va = args.va if args.va is not None else cfg.V_A
    if va is None:
        va = _optimize(cfg, layout).V_A_opt
    pulses = args.pulses if args.pulses is not None else cfg.simulation.pulses
    seed = args.seed if args.seed is not None else 0
    try:
        batch = simulate(layout, cfg.params, va, pulses, seed, _threads(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_batch_csv(batch, args.out or "batch.csv")
    return EXIT_OK


def cmd_estimate(cfg: Config, args) -> int:
    try:
        batch = read_batch_csv(args.batch)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    params = replace(cfg.params, N0=batch.N0, eta_D=batch.eta_D)
    pp = cfg.postprocess
    seed = args.seed if args.seed is not None else pp.seed
    report = qss_round(batch, params, seed, pp.estimation_fraction, pp.round_fraction, pp.min_samples)
    _emit(report.lines(), args.out)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PLAYER_CSV_HEADER)
            for row in player_rows(report):
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return EXIT_NO_KEY if report.aborted else EXIT_OK


def cmd_figures(cfg: Config, args) -> int:
    for path in run_figures(args.out or "figures", _threads(args)):
        print(path)
    return EXIT_OK


def _read_keys(paths: Sequence[str]) -> list[bytes]:
    return [Path(p).read_bytes() for p in paths]


def cmd_share(cfg: Config, args) -> int:
    fn = share if args.cmd == "share" else recover
    try:
        data = fn(Path(args.input).read_bytes(), _read_keys(args.keys))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
    return EXIT_OK


COMMANDS = {
    "keyrate": cmd_keyrate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "figures": cmd_figures,
    "share": cmd_share,
    "recover": cmd_share,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.cmd](cfg, args)
    except (ConfigError, UsageError, OptimizationError, UnphysicalParametersError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EstimationError as exc:
        print(f"estimation failure: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
