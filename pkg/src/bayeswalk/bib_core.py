"""Extended Bayesian inference with forgetting and inverse-Bayesian learning.

Each hypothesis k carries a Gaussian generative model ``N(d | mu_k, variance)``
and a confidence ``C(h_k)``.  On every observation the confidences are updated
with a forgetting rate ``beta`` and the mean of the currently most trusted
hypothesis is pulled toward the datum with learning rate ``gamma``.

All array routines broadcast over leading axes, so the same code drives a
single agent (shape ``(K,)``) and a stack of independent agents
(shape ``(n, K)``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Raised for invalid model, game or walk parameters."""


@dataclass(frozen=True)
class InferenceParams:
    """Scalar knobs of the inference engine.

    ``delta`` defaults to ``sqrt(2 pi variance)`` when left as ``None``.
    """

    beta: float = 0.0
    gamma: float = 0.0
    epsilon: float = 1e-8
    num_hypotheses: int = 11
    variance: float = 0.25
    delta: float | None = None

    def __post_init__(self):
        if self.delta is None:
            object.__setattr__(self, "delta", math.sqrt(2.0 * math.pi * self.variance)
                               if self.variance > 0 else float("nan"))
        self.validate()

    def validate(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ParameterError(f"beta must lie in [0, 1], got {self.beta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ParameterError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not self.variance > 0:
            raise ParameterError(f"variance must be positive, got {self.variance}")
        if not self.delta > 0:
            raise ParameterError(f"delta must be positive, got {self.delta}")
        if int(self.num_hypotheses) != self.num_hypotheses or self.num_hypotheses < 2:
            raise ParameterError(f"num_hypotheses must be an integer >= 2, got {self.num_hypotheses}")

    @property
    def peak_density(self) -> float:
        """Maximum of the Gaussian density, ``1 / sqrt(2 pi variance)``."""
        return 1.0 / math.sqrt(2.0 * math.pi * self.variance)


@dataclass
class AgentState:
    confidences: np.ndarray
    means: np.ndarray

    def copy(self) -> "AgentState":
        return AgentState(self.confidences.copy(), self.means.copy())


@dataclass(frozen=True)
class StepRecord:
    h_max: int
    confidence_in_h_max: float
    presented_datum: float
    observed_datum: float
    means_snapshot: np.ndarray = field(repr=False)


def initial_means(num_hypotheses: int) -> np.ndarray:
    """Means equally spaced on [-0.5, 0.5]."""
    k = np.arange(num_hypotheses, dtype=float)
    return k / (num_hypotheses - 1) - 0.5


def init_agent(params: InferenceParams) -> AgentState:
    """Uniform confidences and equally spaced means."""
    params.validate()
    K = params.num_hypotheses
    return AgentState(np.full(K, 1.0 / K), initial_means(K))


def gaussian_density(d, mu, sigma):
    """Normal density with mean ``mu`` and *variance* ``sigma``."""
    if not np.all(np.asarray(sigma) > 0):
        raise ParameterError("variance must be positive")
    return np.exp(-((d - mu) ** 2) / (2.0 * sigma)) / np.sqrt(2.0 * np.pi * sigma)


def log_gaussian_density(d, mu, sigma):
    return -((d - mu) ** 2) / (2.0 * sigma) - 0.5 * np.log(2.0 * np.pi * sigma)


def argmax_with_ties(confidences: np.ndarray, u) -> np.ndarray:
    """Index of the maximum along the last axis, ties resolved by ``u`` in [0, 1).

    Among the ``m`` indices attaining the maximum, the ``floor(u * m)``-th one
    (in ascending index order) is returned.
    """
    c = np.asarray(confidences)
    is_max = c == c.max(axis=-1, keepdims=True)
    n_max = is_max.sum(axis=-1)
    pick = np.minimum((np.asarray(u) * n_max).astype(np.int64), n_max - 1)
    # position of the (pick+1)-th True along the last axis
    rank = np.cumsum(is_max, axis=-1) - 1
    hit = is_max & (rank == pick[..., None])
    return hit.argmax(axis=-1)


def select_h_max(state: AgentState, rng: np.random.Generator) -> int:
    """Most confident hypothesis; one uniform draw from ``rng`` breaks ties."""
    return int(argmax_with_ties(state.confidences, rng.random()))


def sample_datum(state: AgentState, h_max: int, rng: np.random.Generator, variance: float = 0.25,
                 size=None):
    """Draw from the Gaussian model of hypothesis ``h_max`` (one float unless ``size``)."""
    z = rng.standard_normal(size)
    if size is None:
        return float(state.means[h_max] + math.sqrt(variance) * z)
    return state.means[h_max] + math.sqrt(variance) * z


def smoothed_confidences(log_weights: np.ndarray, epsilon: float) -> np.ndarray:
    """Add ``epsilon`` to the unnormalised weights ``exp(log_weights)`` and renormalise.

    Done after factoring out the largest weight so nothing underflows; the
    smoothing constant is rescaled by the same factor, which keeps the result
    identical to smoothing the raw weights.
    """
    top = log_weights.max(axis=-1, keepdims=True)
    w = np.exp(log_weights - top)
    K = log_weights.shape[-1]
    with np.errstate(over="ignore", invalid="ignore"):
        eps = np.exp(math.log(epsilon) - top)
        out = (w + eps) / (w.sum(axis=-1, keepdims=True) + K * eps)
    # smoothing swamps every weight: the limit is uniform
    swamped = ~np.isfinite(eps[..., 0])
    if np.any(swamped):
        out[swamped] = 1.0 / K
    return out


def confidence_targets(confidences, means, d, params: InferenceParams):
    """New confidence vectors given observation(s) ``d``.

    ``d`` has the shape of the leading axes of ``confidences``.
    """
    d = np.asarray(d, dtype=float)[..., None]
    logw = (1.0 - params.beta) * np.log(confidences) + log_gaussian_density(d, means, params.variance)
    return smoothed_confidences(logw, params.epsilon)


def update_confidences(state: AgentState, d: float, params: InferenceParams) -> np.ndarray:
    """Forgetting-discounted Bayes update followed by epsilon smoothing."""
    return confidence_targets(state.confidences, state.means, d, params)


def learned_likelihood(confidences, means, h_max, d, params: InferenceParams):
    """Target likelihood of ``d`` under ``h_max`` after learning, clamped.

    Clamped to ``[epsilon, peak_density]`` so the inversion back to a mean
    always has real roots.
    """
    d = np.asarray(d, dtype=float)
    h = np.asarray(h_max)[..., None]
    dens = gaussian_density(d[..., None], means, params.variance)
    marginal = (confidences * dens).sum(axis=-1)
    c_max = np.take_along_axis(confidences, h, axis=-1)[..., 0]
    n_max = np.take_along_axis(dens, h, axis=-1)[..., 0]
    gamma = params.gamma
    target = params.delta ** (-gamma) * (c_max / marginal) ** gamma * n_max
    return np.clip(target, params.epsilon, params.peak_density)


def mean_from_likelihood(likelihood, d, old_mean, variance):
    """Invert ``N(d | mu, variance) = likelihood`` for the root nearest ``old_mean``.

    The two roots are ``d +/- r``; on an exact tie the ``+`` root wins.
    """
    arg = np.asarray(likelihood) * math.sqrt(2.0 * math.pi * variance)
    # clamp guarantees arg in (0, 1]; guard against rounding above 1
    r = np.sqrt(np.maximum(-2.0 * variance * np.log(np.minimum(arg, 1.0)), 0.0))
    plus = d + r
    minus = d - r
    return np.where(np.abs(plus - old_mean) <= np.abs(minus - old_mean), plus, minus)


def learned_means(confidences, means, h_max, d, params: InferenceParams):
    """Means after moving hypothesis ``h_max`` toward the datum ``d``."""
    h = np.asarray(h_max)[..., None]
    old = np.take_along_axis(means, h, axis=-1)[..., 0]
    if params.gamma == 0.0:
        return means.copy()
    target = learned_likelihood(confidences, means, h_max, d, params)
    new = mean_from_likelihood(target, np.asarray(d, dtype=float), old, params.variance)
    out = means.copy()
    np.put_along_axis(out, h, new[..., None], axis=-1)
    return out


def inverse_bayes_update(state: AgentState, h_max: int, d: float, params: InferenceParams) -> float:
    """New mean of hypothesis ``h_max`` after observing ``d``."""
    if params.gamma == 0.0:
        return float(state.means[h_max])
    target = learned_likelihood(state.confidences, state.means, h_max, d, params)
    return float(mean_from_likelihood(target, d, state.means[h_max], params.variance))


def step_agent(state: AgentState, observed_d: float, params: InferenceParams,
               rng: np.random.Generator | None = None, h_max: int | None = None,
               presented_d: float = float("nan")):
    """Advance one agent by one observation.

    ``h_max`` is selected from ``state`` (drawing a tie-break uniform from
    ``rng``) unless supplied.  Both updates read the same pre-update
    snapshot and are committed together.

    Returns
    -------
    new_state : AgentState
    record : StepRecord
        Describes the pre-update snapshot used for this step.
    """
    if h_max is None:
        if rng is None:
            raise ParameterError("rng is required when h_max is not given")
        h_max = select_h_max(state, rng)
    conf = update_confidences(state, observed_d, params)
    means = state.means.copy()
    means[h_max] = inverse_bayes_update(state, h_max, observed_d, params)
    record = StepRecord(
        h_max=int(h_max),
        confidence_in_h_max=float(state.confidences[h_max]),
        presented_datum=float(presented_d),
        observed_datum=float(observed_d),
        means_snapshot=state.means.copy(),
    )
    return AgentState(conf, means), record
