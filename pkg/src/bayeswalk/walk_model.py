"""Map a sequence of chosen hypotheses to a 2D walk and cut it into straight segments.

The heading is redrawn uniformly on [0, 2 pi) whenever the chosen hypothesis
changes and kept otherwise; each step advances ``step_size`` along the
heading.  The first step always draws a heading.  A straight segment is
therefore a run of identical hypotheses, and its length is the run length.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bib_core import ParameterError


@dataclass(frozen=True)
class WalkParams:
    step_size: float = 1.0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ParameterError(f"step_size must be positive, got {self.step_size}")


@dataclass
class Trajectory:
    """``points[0]`` is the origin; ``points[t]`` is the position after step t."""

    points: np.ndarray      # (n + 1, 2)
    headings: np.ndarray    # (n,)
    turns: np.ndarray       # (n,) bool, heading redrawn at this step

    def __len__(self):
        return len(self.headings)


@dataclass(frozen=True)
class Segments:
    """Run lengths of constant heading.

    ``starts`` are zero-based offsets into the mapped sequence; ``censored``
    tells whether the trailing, still-running segment was dropped.
    """

    lengths: np.ndarray
    starts: np.ndarray
    total_steps: int
    censored: bool = True

    def __len__(self):
        return len(self.lengths)


def _as_sequence(hmax_seq) -> np.ndarray:
    seq = np.asarray(hmax_seq)
    if seq.ndim != 1 or seq.size == 0:
        raise ParameterError("hypothesis sequence must be a non-empty 1-D sequence")
    return seq


def turn_mask(hmax_seq) -> np.ndarray:
    """True where the heading is redrawn; always True at the first step."""
    seq = _as_sequence(hmax_seq)
    turns = np.empty(seq.size, dtype=bool)
    turns[0] = True
    turns[1:] = seq[1:] != seq[:-1]
    return turns


def map_to_walk(hmax_seq, params: WalkParams | None = None, rng: np.random.Generator | None = None) -> Trajectory:
    """Integrate the walk.

    Draws exactly ``len(hmax_seq)`` uniforms from ``rng`` in one block; the
    draw for step t is used only if the heading turns at t.
    """
    params = params or WalkParams()
    if rng is None:
        raise ParameterError("map_to_walk needs a random generator")
    turns = turn_mask(hmax_seq)
    u = rng.random(turns.size)
    # carry the last redrawn heading forward
    last_turn = np.maximum.accumulate(np.where(turns, np.arange(turns.size), 0))
    theta = 2.0 * np.pi * u[last_turn]
    steps = params.step_size * np.column_stack([np.cos(theta), np.sin(theta)])
    points = np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)])
    return Trajectory(points, theta, turns)


def extract_steps(hmax_seq, include_censored: bool = False) -> Segments:
    """Run-length encode the sequence.

    The final run is still in progress when the sequence ends, so it is
    dropped unless ``include_censored``.
    """
    seq = _as_sequence(hmax_seq)
    starts = np.flatnonzero(turn_mask(seq))
    lengths = np.diff(np.append(starts, seq.size))
    if not include_censored:
        starts, lengths = starts[:-1], lengths[:-1]
    return Segments(lengths.astype(np.int64), starts.astype(np.int64), int(seq.size), not include_censored)


def segment_confidence_means(confidence_seq, segments: Segments) -> np.ndarray:
    """Mean of ``confidence_seq`` within each segment."""
    conf = np.asarray(confidence_seq, dtype=float)
    if conf.size != segments.total_steps:
        raise ParameterError(
            f"confidence sequence has {conf.size} steps but segments cover {segments.total_steps}")
    csum = np.concatenate([[0.0], np.cumsum(conf)])
    ends = segments.starts + segments.lengths
    return (csum[ends] - csum[segments.starts]) / segments.lengths


def group_by_length(lengths, values):
    """Sum and count of ``values`` for each distinct length, as arrays ``(lengths, sums, counts)``."""
    lengths = np.asarray(lengths, dtype=np.int64)
    uniq, inv = np.unique(lengths, return_inverse=True)
    sums = np.bincount(inv, weights=np.asarray(values, dtype=float), minlength=len(uniq))
    counts = np.bincount(inv, minlength=len(uniq))
    return uniq, sums, counts


def confidence_by_step_length(trace, segments: Segments, agent, window=None) -> dict[int, float]:
    """Average confidence during straight moves of each length.

    For every distinct length: the mean, over segments of that length, of the
    within-segment mean confidence in the chosen hypothesis.  ``window`` is
    the 1-based inclusive step interval the segments were cut from (defaults
    to the trace's analysis window, else the whole trace).
    """
    if window is None:
        cfg = getattr(trace, "config", None)
        window = cfg.analysis_window if cfg is not None else (1, len(trace))
    hmax, conf = trace.window(agent, window)
    expected = extract_steps(hmax, include_censored=not segments.censored)
    if (hmax.size != segments.total_steps or len(expected) != len(segments)
            or not np.array_equal(expected.lengths, segments.lengths)):
        raise ParameterError("segments were not extracted from this trace window")
    uniq, sums, counts = group_by_length(segments.lengths, segment_confidence_means(conf, segments))
    return {int(l): float(s / c) for l, s, c in zip(uniq, sums, counts)}
