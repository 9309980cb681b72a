"""Two-agent imitation game.

Every round both agents pick their most trusted hypothesis, sample a datum
from its Gaussian model and show it to the other agent.  Each agent then
updates on the opponent's datum.  Sampling happens before either agent
updates, so neither has a first-mover advantage.

Randomness
----------
A game seed ``s`` is expanded into three independent streams with
``numpy.random.SeedSequence(s, spawn_key=(stream,))`` where ``stream`` is
0 (agent 1), 1 (agent 2) or 2 (walk headings).  Each agent stream draws, in
this order, ``total_steps`` tie-break uniforms and then ``total_steps``
standard normals; step ``t`` consumes element ``t`` of both blocks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bib_core import (
    InferenceParams,
    ParameterError,
    StepRecord,
    argmax_with_ties,
    confidence_targets,
    initial_means,
    learned_means,
)

AGENT1, AGENT2, WALK = 0, 1, 2
AGENT_NAMES = ("agent1", "agent2")


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for one stream of a game seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream),)))


def agent_index(agent) -> int:
    if agent in (0, 1):
        return int(agent)
    names = {"agent1": 0, "agent2": 1, "1": 0, "2": 1}
    try:
        return names[str(agent).lower()]
    except KeyError:
        raise ParameterError(f"unknown agent {agent!r}; use agent1 or agent2") from None


@dataclass(frozen=True)
class GameConfig:
    params: InferenceParams = field(default_factory=InferenceParams)
    total_steps: int = 2000
    analysis_window: tuple[int, int] = (1000, 2000)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.analysis_window
        if self.total_steps < 1:
            raise ParameterError("total_steps must be >= 1")
        if not 1 <= lo <= hi <= self.total_steps:
            raise ParameterError(
                f"analysis_window {self.analysis_window} must satisfy 1 <= start <= end <= {self.total_steps}")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be a non-negative 64-bit integer")

    @property
    def window_slice(self) -> slice:
        """Zero-based slice of the 1-based inclusive analysis window."""
        lo, hi = self.analysis_window
        return slice(lo - 1, hi)


@dataclass
class GameTrace:
    """Per-step log of both agents, stored column-wise.

    Arrays are indexed ``[agent, step]`` with step 0 being t=1.  ``means``
    and ``confidences`` hold the pre-update state each step acted on.
    """

    h_max: np.ndarray            # (2, T) int
    confidence: np.ndarray       # (2, T) confidence in h_max
    presented: np.ndarray        # (2, T) datum shown to the opponent
    observed: np.ndarray         # (2, T) datum received from the opponent
    means: np.ndarray            # (2, T, K)
    confidences: np.ndarray      # (2, T, K)
    config: GameConfig | None = None

    def __len__(self):
        return self.h_max.shape[1]

    def record(self, agent, t: int) -> StepRecord:
        """StepRecord of ``agent`` at 1-based step ``t``."""
        a = agent_index(agent)
        i = t - 1
        return StepRecord(
            h_max=int(self.h_max[a, i]),
            confidence_in_h_max=float(self.confidence[a, i]),
            presented_datum=float(self.presented[a, i]),
            observed_datum=float(self.observed[a, i]),
            means_snapshot=self.means[a, i].copy(),
        )

    def window(self, agent, window: tuple[int, int]):
        """``(h_max, confidence)`` slices of one agent over a 1-based inclusive window."""
        a = agent_index(agent)
        lo, hi = _check_window(window, len(self))
        return self.h_max[a, lo - 1:hi], self.confidence[a, lo - 1:hi]


def _check_window(window, n):
    lo, hi = int(window[0]), int(window[1])
    if not 1 <= lo <= hi <= n:
        raise ParameterError(f"window {window} is empty or outside steps 1..{n}")
    return lo, hi


def simulate(params: InferenceParams, seeds, total_steps: int, full: bool = True) -> dict:
    """Run one game per seed, all stacked along a leading axis.

    Each game's trajectory depends only on its own seed.  With ``full`` the
    result also carries the per-step means and confidence vectors, which
    cost ``O(n * T * K)`` memory.

    Returns a dict of arrays shaped ``(n, 2, T[, K])``.
    """
    params.validate()
    seeds = [int(s) for s in seeds]
    n, T, K = len(seeds), int(total_steps), params.num_hypotheses
    tie = np.empty((n, 2, T))
    z = np.empty((n, 2, T))
    for i, s in enumerate(seeds):
        for a in (AGENT1, AGENT2):
            rng = stream_rng(s, a)
            tie[i, a] = rng.random(T)
            z[i, a] = rng.standard_normal(T)

    conf = np.full((n, 2, K), 1.0 / K)
    means = np.broadcast_to(initial_means(K), (n, 2, K)).copy()
    sd = np.sqrt(params.variance)

    h_log = np.empty((n, 2, T), dtype=np.int64)
    c_log = np.empty((n, 2, T))
    d_log = np.empty((n, 2, T))
    if full:
        m_log = np.empty((n, 2, T, K))
        cv_log = np.empty((n, 2, T, K))

    for t in range(T):
        h = argmax_with_ties(conf, tie[:, :, t])
        hh = h[..., None]
        presented = np.take_along_axis(means, hh, axis=-1)[..., 0] + sd * z[:, :, t]
        observed = presented[:, ::-1]
        h_log[:, :, t] = h
        c_log[:, :, t] = np.take_along_axis(conf, hh, axis=-1)[..., 0]
        d_log[:, :, t] = presented
        if full:
            m_log[:, :, t] = means
            cv_log[:, :, t] = conf
        new_means = learned_means(conf, means, h, observed, params)
        conf = confidence_targets(conf, means, observed, params)
        means = new_means

    out = {"h_max": h_log, "confidence": c_log, "presented": d_log,
           "observed": d_log[:, ::-1].copy()}
    if full:
        out["means"] = m_log
        out["confidences"] = cv_log
    return out


def run_game(config: GameConfig) -> GameTrace:
    """Play one imitation game and return its full trace."""
    res = simulate(config.params, [config.seed], config.total_steps, full=True)
    return GameTrace(
        h_max=res["h_max"][0],
        confidence=res["confidence"][0],
        presented=res["presented"][0],
        observed=res["observed"][0],
        means=res["means"][0],
        confidences=res["confidences"][0],
        config=config,
    )


def mean_confidence(trace: GameTrace, agent, window) -> float:
    """Time-average of the confidence in h_max over a 1-based inclusive window."""
    _, conf = trace.window(agent, window)
    return float(conf.mean())
