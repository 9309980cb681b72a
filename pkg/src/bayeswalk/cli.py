"""Command-line interface.

Exit codes: 0 success, 1 parameter error, 2 fit or selection error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import io
from .bib_core import InferenceParams, ParameterError
from .harness import FIGURES, BatchConfig, FigureDataset, emit_figure_data, figure_batches, run_batch
from .imitation_game import WALK, GameConfig, run_game, stream_rng
from .levy_fit import FitError, fit_report
from .walk_model import WalkParams, extract_steps, map_to_walk

EXIT_OK, EXIT_PARAM, EXIT_FIT, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAM, f"{self.prog}: error: {message}\n")


def _model_args(p):
    p.add_argument("--beta", type=float, default=0.0, help="forgetting rate (default 0)")
    p.add_argument("--gamma", type=float, default=0.0, help="learning rate (default 0)")
    p.add_argument("--alpha", type=float, default=None, help="set beta = gamma = ALPHA")
    p.add_argument("--steps", type=int, default=2000, help="steps per game (default 2000)")
    p.add_argument("--window", type=int, nargs=2, default=(1000, 2000), metavar=("START", "END"),
                   help="inclusive analysis window (default 1000 2000)")
    p.add_argument("--seed", type=int, default=0, help="game seed or batch base seed")


def _out_arg(p):
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bayeswalk", description="Simulate imitation-game walks and fit their step lengths.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="play one game and write its full trace")
    _model_args(p)
    _out_arg(p)

    p = sub.add_parser("walk", help="turn a trace into a trajectory and segment lengths")
    p.add_argument("trace", type=Path)
    p.add_argument("--agent", default="agent1", choices=["agent1", "agent2"])
    p.add_argument("--window", type=int, nargs=2, default=None, metavar=("START", "END"),
                   help="defaults to the window recorded in the trace")
    p.add_argument("--seed", type=int, default=None, help="walk seed (defaults to the trace seed)")
    p.add_argument("--include-censored", action="store_true")
    _out_arg(p)

    p = sub.add_parser("fit", help="fit TP and EP models to a segments file")
    p.add_argument("segments", type=Path)
    _out_arg(p)

    p = sub.add_parser("batch", help="run seeded trials, pool segments and fit")
    _model_args(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--agent", default="agent1", choices=["agent1", "both"])
    p.add_argument("--include-censored", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    _out_arg(p)

    p = sub.add_parser("figures", help="compute and write the datasets behind a figure")
    p.add_argument("--figure", required=True, help=f"one of {', '.join(FIGURES)} or 'all'")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--window", type=int, nargs=2, default=(1000, 2000), metavar=("START", "END"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--agent", default="agent1", choices=["agent1", "both"])
    p.add_argument("--workers", type=int, default=1)
    _out_arg(p)
    return parser


def _params(args) -> InferenceParams:
    if args.alpha is not None:
        return InferenceParams(beta=args.alpha, gamma=args.alpha)
    return InferenceParams(beta=args.beta, gamma=args.gamma)


def _game(args, params) -> GameConfig:
    return GameConfig(params=params, total_steps=args.steps, analysis_window=tuple(args.window), seed=args.seed)


def cmd_simulate(args):
    trace = run_game(_game(args, _params(args)))
    path = io.write_trace(args.out / "trace.tsv", trace)
    print(path)
    return EXIT_OK


def cmd_walk(args):
    trace = io.read_trace(args.trace)
    cfg = trace.config
    window = tuple(args.window) if args.window else (cfg.analysis_window if cfg else (1, len(trace)))
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    h, _ = trace.window(args.agent, window)
    traj = map_to_walk(h, WalkParams(), stream_rng(seed, WALK))
    segs = extract_steps(h, include_censored=args.include_censored)
    meta = {"agent": args.agent, "window": f"{window[0]}:{window[1]}", "walk_seed": seed}
    if cfg is not None:
        meta.update(beta=cfg.params.beta, gamma=cfg.params.gamma, seed=cfg.seed)
    print(io.write_trajectory(args.out / "trajectory.tsv", traj, meta))
    print(io.write_segments(args.out / "segments.txt", segs.lengths, meta))
    return EXIT_OK


def _print_report(report):
    print(f"verdict={report.verdict} levy={io.fmt(report.levy)} n_total={report.n_total}")
    sel = report.selection
    if sel is not None:
        print(f"tp: eta={sel.tp.eta_hat:.2f} range=[{sel.tp.l_min},{sel.tp.l_max}] n={sel.tp.n} D={sel.tp.ks:.4g}")
        print(f"ep: lambda={sel.ep.lambda_hat:.4f} l_min={sel.ep.l_min} m={sel.ep.m} D={sel.ep.ks:.4g}")
        print(f"w_tp={sel.w_tp:.4g} w_ep={sel.w_ep:.4g} decided_by={sel.decided_by}")
    elif report.error:
        print(f"error: {report.error}", file=sys.stderr)


def cmd_fit(args):
    lengths = io.read_segments(args.segments)
    report = fit_report(lengths)
    print(io.write_fit_report(args.out / "fit_report.txt", report, lengths, {"source": args.segments.name}))
    _print_report(report)
    return EXIT_OK if report.selection is not None else EXIT_FIT


def _batch_config(args, params) -> BatchConfig:
    return BatchConfig(params=params, game=_game(args, params), trials=args.trials, base_seed=args.seed,
                       which_agent=args.agent, workers=args.workers,
                       include_censored=getattr(args, "include_censored", False))


def cmd_batch(args):
    config = replace(_batch_config(args, _params(args)), outputs=args.out)
    result = run_batch(config)
    print(f"mean_confidence={result.mean_confidence:.6f} segments={len(result.lengths)}")
    _print_report(result.report)
    return EXIT_OK if result.report.selection is not None else EXIT_FIT


def cmd_figures(args):
    template = _batch_config(args, InferenceParams())
    ids = list(FIGURES) if args.figure.lower() == "all" else [args.figure.upper()]
    dataset = FigureDataset()
    for fid in ids:
        for cfg in figure_batches(fid, template):
            if dataset.find(cfg.params.beta, cfg.params.gamma) is None:
                dataset.fragments.append(run_batch(cfg))
        for path in emit_figure_data(dataset, fid, args.out):
            print(path)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "walk": cmd_walk, "fit": cmd_fit, "batch": cmd_batch,
            "figures": cmd_figures}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except OSError as exc:
        print(f"I/O error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
