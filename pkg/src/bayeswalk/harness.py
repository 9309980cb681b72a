"""Seeded batches of games, pooling, parameter sweeps and figure datasets.

Trial ``i`` of a batch plays a game seeded with ``split_seed(base_seed, i)``.
Games are advanced together in chunks of trials; since each game only reads
its own random streams, neither the chunk size nor the worker count changes
any result.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bib_core import InferenceParams, ParameterError
from .imitation_game import WALK, GameConfig, GameTrace, run_game, simulate, stream_rng
from .levy_fit import FitReport, fit_report, survival_table
from .walk_model import (
    Trajectory, WalkParams, extract_steps, group_by_length, map_to_walk, segment_confidence_means,
)
from . import io

log = logging.getLogger(__name__)


def split_seed(base_seed: int, trial: int) -> int:
    """64-bit seed of trial ``trial``, derived with ``SeedSequence(base_seed, spawn_key=(trial,))``."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(trial),))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class BatchConfig:
    """One (beta, gamma) configuration run over many seeded trials.

    ``game`` supplies ``total_steps`` and ``analysis_window``; its params and
    seed are ignored in favour of ``params`` and the per-trial seeds.
    ``alpha``, when set, overrides both beta and gamma.
    """

    params: InferenceParams = field(default_factory=InferenceParams)
    game: GameConfig = field(default_factory=GameConfig)
    trials: int = 1000
    base_seed: int = 0
    alpha: float | None = None
    outputs: Path | None = None
    which_agent: str = "agent1"
    include_censored: bool = False
    workers: int = 1
    chunk_size: int = 250

    def __post_init__(self):
        if self.alpha is not None:
            object.__setattr__(self, "params", replace(self.params, beta=self.alpha, gamma=self.alpha))
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if self.which_agent not in ("agent1", "both"):
            raise ParameterError(f"which_agent must be 'agent1' or 'both', got {self.which_agent!r}")
        if self.workers < 1 or self.chunk_size < 1:
            raise ParameterError("workers and chunk_size must be >= 1")

    @property
    def agents(self) -> tuple[int, ...]:
        return (0,) if self.which_agent == "agent1" else (0, 1)

    def trial_config(self, trial: int) -> GameConfig:
        return replace(self.game, params=self.params, seed=split_seed(self.base_seed, trial))


@dataclass
class BatchResult:
    """Pooled outcome of one batch (a fragment of a figure dataset)."""

    config: BatchConfig
    lengths: np.ndarray
    segment_confidence: np.ndarray     # within-segment mean confidence, aligned with lengths
    trial_confidence: np.ndarray       # (trials, n_agents) time-averaged confidence in h_max
    report: FitReport
    example_trace: GameTrace | None = None
    example_trajectory: Trajectory | None = None

    @property
    def beta(self) -> float:
        return self.config.params.beta

    @property
    def gamma(self) -> float:
        return self.config.params.gamma

    @property
    def provenance(self) -> dict:
        return {"beta": self.beta, "gamma": self.gamma,
                "trials": self.config.trials, "base_seed": self.config.base_seed}

    @property
    def mean_confidence(self) -> float:
        return float(self.trial_confidence.mean())

    def confidence_by_length(self) -> dict[int, float]:
        uniq, sums, counts = group_by_length(self.lengths, self.segment_confidence)
        return {int(l): float(s / c) for l, s, c in zip(uniq, sums, counts)}

    def length_table(self):
        """Rows ``(length, mean confidence, number of segments)``."""
        uniq, sums, counts = group_by_length(self.lengths, self.segment_confidence)
        return [(int(l), float(s / c), int(c)) for l, s, c in zip(uniq, sums, counts)]


def _run_chunk(args):
    config, trials = args
    seeds = [split_seed(config.base_seed, i) for i in trials]
    res = simulate(config.params, seeds, config.game.total_steps, full=False)
    window = config.game.window_slice
    lengths, seg_conf, trial_conf = [], [], np.empty((len(seeds), len(config.agents)))
    for i in range(len(seeds)):
        for j, a in enumerate(config.agents):
            h = res["h_max"][i, a, window]
            c = res["confidence"][i, a, window]
            segs = extract_steps(h, include_censored=config.include_censored)
            lengths.append(segs.lengths)
            seg_conf.append(segment_confidence_means(c, segs))
            trial_conf[i, j] = c.mean()
    return np.concatenate(lengths), np.concatenate(seg_conf), trial_conf


def run_batch(config: BatchConfig, keep_example: bool = True) -> BatchResult:
    """Play all trials, pool their step lengths and fit the pooled sample.

    With ``keep_example`` the full trace and walk of trial 0 are kept for
    plotting.
    """
    idx = list(range(config.trials))
    chunks = [(config, idx[i:i + config.chunk_size]) for i in range(0, len(idx), config.chunk_size)]
    log.info("batch beta=%g gamma=%g trials=%d", config.params.beta, config.params.gamma, config.trials)
    if config.workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(_run_chunk, chunks))
    else:
        parts = [_run_chunk(c) for c in chunks]
    lengths = np.concatenate([p[0] for p in parts])
    seg_conf = np.concatenate([p[1] for p in parts])
    trial_conf = np.concatenate([p[2] for p in parts])
    report = fit_report(lengths)
    trace = traj = None
    if keep_example:
        game = config.trial_config(0)
        trace = run_game(game)
        h, _ = trace.window(0, game.analysis_window)
        traj = map_to_walk(h, WalkParams(), stream_rng(game.seed, WALK))
    result = BatchResult(config, lengths, seg_conf, trial_conf, report, trace, traj)
    if config.outputs is not None:
        write_batch(result, config.outputs)
    return result


def write_batch(result: BatchResult, out_dir) -> list[Path]:
    out = Path(out_dir)
    meta = dict(result.provenance, which_agent=result.config.which_agent)
    paths = [
        io.write_segments(out / "segments.txt", result.lengths, meta),
        io.write_fit_report(out / "fit_report.txt", result.report, result.lengths, meta),
        io.write_table(out / "confidence_by_length.tsv", "confidence_by_length",
                       ["length", "mean_confidence", "segments"], result.length_table(),
                       dict(meta, mean_confidence=result.mean_confidence)),
    ]
    if result.example_trajectory is not None:
        paths.append(io.write_trajectory(out / "trajectory_trial0.tsv", result.example_trajectory, meta))
    return paths


@dataclass
class FigureDataset:
    fragments: list[BatchResult] = field(default_factory=list)

    def find(self, beta: float, gamma: float) -> BatchResult | None:
        for f in self.fragments:
            if math.isclose(f.beta, beta, abs_tol=1e-12) and math.isclose(f.gamma, gamma, abs_tol=1e-12):
                return f
        return None

    def __len__(self):
        return len(self.fragments)


def sweep(configs, keep_example: bool = True) -> FigureDataset:
    """Run every batch in order; duplicates are kept."""
    configs = list(configs)
    if not configs:
        raise ParameterError("sweep needs at least one batch configuration")
    return FigureDataset([run_batch(c, keep_example=keep_example) for c in configs])


# --------------------------------------------------------------------------- #
# figure datasets
# --------------------------------------------------------------------------- #
BETAS = (0.3, 0.5, 0.7)
BETA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))

FIGURES: dict[str, tuple[tuple[float, float], ...]] = {
    "2": ((0.3, 0.0), (0.3, 0.1)),
    "3A": tuple((b, 0.0) for b in BETAS),
    "3B": tuple((b, 0.0) for b in BETAS),
    "3C": tuple((b, 0.1) for b in BETAS),
    "3D": tuple((b, 0.1) for b in BETAS),
    "4": tuple((a, a) for a in BETAS),
    "5": ((0.0, 0.0), (0.005, 0.0)),
    "6A": tuple((b, g) for g in (0.0, 0.1) for b in BETA_GRID),
    "6B": ((0.3, 0.0), (0.3, 0.1)),
}


def figure_requirements(figure_id: str) -> tuple[tuple[float, float], ...]:
    try:
        return FIGURES[figure_id.upper()]
    except KeyError:
        raise ParameterError(
            f"unknown figure id {figure_id!r}; valid ids: {', '.join(FIGURES)}") from None


def figure_batches(figure_id: str, template: BatchConfig) -> list[BatchConfig]:
    """Batch configurations needed to emit ``figure_id``."""
    return [replace(template, params=replace(template.params, beta=b, gamma=g), alpha=None, outputs=None)
            for b, g in figure_requirements(figure_id)]


def _fragments(dataset: FigureDataset, figure_id: str, *, need_trace=False):
    found, missing = [], []
    for b, g in figure_requirements(figure_id):
        f = dataset.find(b, g)
        if f is None or (need_trace and f.example_trace is None):
            missing.append(f"beta={b:g} gamma={g:g}" + (" (with example trace)" if need_trace else ""))
        else:
            found.append(f)
    if missing:
        raise ParameterError(f"figure {figure_id} needs batches for: {'; '.join(missing)}")
    return found


PROV_COLS = ["beta", "gamma", "trials", "base_seed"]


def _prov_row(f: BatchResult):
    p = f.provenance
    return [p["beta"], p["gamma"], p["trials"], p["base_seed"]]


def _meta(figure_id, frags):
    meta = {"figure": figure_id}
    for i, f in enumerate(frags):
        meta[f"provenance_{i}"] = ",".join(f"{k}:{io.fmt(v)}" for k, v in f.provenance.items())
    return meta


def _survival_file(path, figure_id, frags):
    rows = []
    meta = _meta(figure_id, frags)
    for i, f in enumerate(frags):
        sel = f.report.selection
        meta[f"fit_{i}"] = (f"verdict:{f.report.verdict}" + (
            f",eta:{sel.tp.eta_hat:.2f},tp_range:{sel.tp.l_min}-{sel.tp.l_max}"
            f",lambda:{sel.ep.lambda_hat:.4f},ep_l_min:{sel.ep.l_min}" if sel else ""))
        for row in survival_table(f.lengths, sel):
            rows.append(_prov_row(f) + list(row))
    return io.write_table(path, "survival", PROV_COLS + ["l", "empirical", "tp_model", "ep_model"], rows, meta)


def _trajectory_file(path, figure_id, frags):
    rows = []
    for f in frags:
        tr = f.example_trajectory
        rows.append(_prov_row(f) + [0, 0.0, 0.0, math.nan])
        for t, ((x, y), th) in enumerate(zip(tr.points[1:], tr.headings)):
            rows.append(_prov_row(f) + [t + 1, x, y, th])
    return io.write_table(path, "trajectory", PROV_COLS + ["t", "x", "y", "theta"], rows,
                          _meta(figure_id, frags))


def _trace_file(path, figure_id, frags):
    K = frags[0].config.params.num_hypotheses
    cols = PROV_COLS + ["step", "agent", "h_max", "confidence"] + [f"mean_{k}" for k in range(K)] \
        + [f"conf_{k}" for k in range(K)]
    rows = []
    for f in frags:
        tr = f.example_trace
        for i in range(len(tr)):
            for a in (0, 1):
                rows.append(_prov_row(f) + [i + 1, a + 1, tr.h_max[a, i], tr.confidence[a, i],
                                            *tr.means[a, i], *tr.confidences[a, i]])
    meta = _meta(figure_id, frags)
    meta["trace_seed"] = frags[0].example_trace.config.seed if frags[0].example_trace.config else "na"
    return io.write_table(path, "trace", cols, rows, meta)


def emit_figure_data(dataset: FigureDataset, figure_id: str, out_dir) -> list[Path]:
    """Write plot-ready tables for one figure; existing files are overwritten."""
    fid = figure_id.upper()
    figure_requirements(fid)
    out = Path(out_dir)
    if fid == "2":
        return [_trace_file(out / "fig2_trace.tsv", fid, _fragments(dataset, fid, need_trace=True))]
    if fid in ("3A", "3C"):
        return [_trajectory_file(out / f"fig{fid}_trajectories.tsv", fid,
                                 _fragments(dataset, fid, need_trace=True))]
    if fid in ("3B", "3D", "4"):
        return [_survival_file(out / f"fig{fid}_survival.tsv", fid, _fragments(dataset, fid))]
    if fid == "5":
        frags = _fragments(dataset, fid, need_trace=True)
        return [_trajectory_file(out / "fig5AB_trajectories.tsv", fid, frags),
                _survival_file(out / "fig5C_survival.tsv", fid, frags[1:])]
    if fid == "6A":
        frags = _fragments(dataset, fid)
        rows = [_prov_row(f) + [f.mean_confidence] for f in frags]
        return [io.write_table(out / "fig6A_mean_confidence.tsv", "mean_confidence",
                               PROV_COLS + ["mean_confidence"], rows, _meta(fid, frags))]
    # 6B
    frags = _fragments(dataset, fid)
    rows = [_prov_row(f) + list(r) for f in frags for r in f.length_table()]
    return [io.write_table(out / "fig6B_confidence_by_length.tsv", "confidence_by_length",
                           PROV_COLS + ["length", "mean_confidence", "segments"], rows, _meta(fid, frags))]
