"""Discrete truncated power law (TP) and exponential (EP) fits of step lengths.

TP on ``[l_min, l_max]``::

    p(l) = l**-eta / zeta(eta, l_min, l_max),   zeta(eta, a, b) = sum_{i=a}^{b} i**-eta

EP on ``l >= l_min``::

    p(l) = (1 - exp(-lam)) * exp(-lam * (l - l_min))

``l_max`` is the largest observation.  ``l_min`` is picked among the observed
values by minimising the Kolmogorov-Smirnov distance between empirical and
model survival functions, both normalised to 1 at ``l_min``.  The exponent
``eta`` is found on the grid 0.50, 0.51, ..., 3.50; ``lam`` is closed-form.
The two models are then compared with Akaike weights on each model's range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ETA_GRID = np.round(np.arange(50, 351) / 100.0, 2)
MIN_POINTS = 10

TRUNCATED_POWER_LAW = "TruncatedPowerLaw"
EXPONENTIAL = "Exponential"
INDETERMINATE = "indeterminate"


class FitError(RuntimeError):
    """A model could not be fitted to the data."""


class SelectionError(FitError):
    """Model selection failed because one of the fits failed."""


@dataclass(frozen=True)
class EmpiricalSteps:
    """Distinct step lengths (ascending) with their multiplicities."""

    values: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_lengths(cls, lengths) -> "EmpiricalSteps":
        arr = np.asarray(lengths)
        if arr.size and (np.any(arr < 1) or np.any(arr != np.round(arr))):
            raise FitError("step lengths must be positive integers")
        values, counts = np.unique(arr.astype(np.int64), return_counts=True)
        return cls(values, counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def count_at_least(self) -> np.ndarray:
        """Number of observations >= each distinct value."""
        return np.cumsum(self.counts[::-1])[::-1]

    def in_range(self, l_min, l_max=None) -> "EmpiricalSteps":
        keep = self.values >= l_min
        if l_max is not None:
            keep &= self.values <= l_max
        return EmpiricalSteps(self.values[keep], self.counts[keep])

    def lengths(self) -> np.ndarray:
        return np.repeat(self.values, self.counts)


def _as_steps(data) -> EmpiricalSteps:
    return data if isinstance(data, EmpiricalSteps) else EmpiricalSteps.from_lengths(data)


# --------------------------------------------------------------------------- #
# truncated power law
# --------------------------------------------------------------------------- #
def zeta_tail(eta, a: int, b: int) -> np.ndarray:
    """``zeta(eta, l, b)`` for every integer ``l`` in ``[a, b]``.

    Result has shape ``eta.shape + (b - a + 1,)``; entry ``j`` is the sum over
    ``i = a + j .. b``.  Accumulated from the largest term down.
    """
    eta = np.asarray(eta, dtype=float)
    i = np.arange(a, b + 1, dtype=float)
    terms = i ** (-eta[..., None])
    return np.cumsum(terms[..., ::-1], axis=-1)[..., ::-1]


def finite_zeta(eta, a: int, b: int):
    """``sum_{i=a}^{b} i**-eta``."""
    if a > b:
        raise FitError(f"empty zeta range [{a}, {b}]")
    return zeta_tail(eta, a, b)[..., 0]


def tp_survival(l, eta, l_min, l_max):
    """P(L >= l) under the TP model; equals 1 at ``l_min``."""
    l_arr = np.asarray(l)
    if np.any(l_arr < l_min) or np.any(l_arr > l_max):
        raise FitError(f"l must lie in [{l_min}, {l_max}]")
    tail = zeta_tail(eta, int(l_min), int(l_max))
    out = tail[..., l_arr - int(l_min)] / tail[..., :1]
    return float(out) if np.ndim(out) == 0 else out


def tp_log_likelihood(eta, n, sum_log, zeta):
    return -n * np.log(zeta) - eta * sum_log


def tp_fit_exponent(data, l_min: int, l_max: int):
    """Grid-search MLE of ``eta`` on ``[l_min, l_max]``.

    Returns
    -------
    eta_hat : float
    log_lik : float
    """
    steps = _as_steps(data).in_range(l_min, l_max)
    if steps.n == 0:
        raise FitError(f"no data in [{l_min}, {l_max}]")
    if l_min >= l_max:
        raise FitError("TP range must satisfy l_min < l_max")
    z = finite_zeta(ETA_GRID, int(l_min), int(l_max))
    s = float((steps.counts * np.log(steps.values)).sum())
    ll = tp_log_likelihood(ETA_GRID, steps.n, s, z)
    j = int(np.argmax(ll))  # first maximum, i.e. smallest eta on ties
    return float(ETA_GRID[j]), float(ll[j])


def empirical_survival(steps: EmpiricalSteps) -> np.ndarray:
    """Fraction of observations >= each distinct value."""
    return steps.count_at_least() / steps.n


def ks_statistic(data, survival, l_min, l_max=None) -> float:
    """Max |empirical - model| survival over observed values in range.

    ``survival`` is a callable mapping an integer array of lengths to model
    survival probabilities normalised to 1 at ``l_min``.
    """
    steps = _as_steps(data).in_range(l_min, l_max)
    if steps.n == 0:
        raise FitError("no data in range for KS statistic")
    emp = empirical_survival(steps)
    model = np.asarray(survival(steps.values), dtype=float)
    return float(np.max(np.abs(emp - model)))


@dataclass(frozen=True)
class TpFit:
    eta_hat: float
    l_min: int
    l_max: int
    log_lik: float
    ks: float
    n: int
    warnings: tuple[str, ...] = ()


def _tp_scan(steps: EmpiricalSteps, candidates):
    """Fit eta and the KS distance for every candidate l_min (candidates index ``steps.values``)."""
    v = steps.values
    lo, hi = int(v[0]), int(v[-1])
    tail = zeta_tail(ETA_GRID, lo, hi)            # (G, hi-lo+1)
    at_v = tail[:, v - lo]                         # zeta(eta, v_j, hi), (G, J)
    ge = steps.count_at_least()
    slog = np.cumsum((steps.counts * np.log(v))[::-1])[::-1]
    c = np.asarray(candidates)
    ll = -ge[c] * np.log(at_v[:, c]) - ETA_GRID[:, None] * slog[c]   # (G, C)
    best = ll.argmax(axis=0)
    d = np.empty(len(c))
    for k, (j, g) in enumerate(zip(c, best)):
        model = at_v[g, j:] / at_v[g, j]
        emp = ge[j:] / ge[j]
        d[k] = np.max(np.abs(emp - model))
    return ETA_GRID[best], ll[best, np.arange(len(c))], d, ge[c]


def _candidates(steps: EmpiricalSteps, need_spread: bool):
    ge = steps.count_at_least()
    ok = ge >= MIN_POINTS
    if need_spread:
        ok &= np.arange(len(steps.values)) < len(steps.values) - 1
    return np.flatnonzero(ok)


def tp_select_lmin(data) -> int:
    """l_min minimising the KS distance of the TP fit (ties -> smaller l_min)."""
    return tp_fit(data).l_min


def tp_fit(data, l_min: int | None = None) -> TpFit:
    """TP fit with ``l_max`` = largest observation and ``l_min`` chosen by KS.

    Passing ``l_min`` fixes the lower bound instead of scanning.
    """
    steps = _as_steps(data)
    if len(steps.values) < 2:
        raise FitError("TP fit needs at least two distinct step lengths")
    v = steps.values
    if l_min is None:
        cand = _candidates(steps, need_spread=True)
        if len(cand) == 0:
            raise FitError(f"no candidate l_min leaves {MIN_POINTS} points over two distinct values")
    else:
        idx = np.searchsorted(v, l_min)
        if idx >= len(v) - 1 or v[idx] != l_min:
            raise FitError(f"l_min={l_min} is not an observed value below the maximum")
        cand = np.array([idx])
    eta, ll, d, n = _tp_scan(steps, cand)
    k = int(np.argmin(d))  # first minimum, i.e. smallest l_min
    warnings = ()
    if eta[k] in (ETA_GRID[0], ETA_GRID[-1]):
        warnings = (f"eta_hat={eta[k]:.2f} lies on the search grid boundary",)
    return TpFit(float(eta[k]), int(v[cand[k]]), int(v[-1]), float(ll[k]), float(d[k]), int(n[k]), warnings)


# --------------------------------------------------------------------------- #
# exponential
# --------------------------------------------------------------------------- #
def ep_survival(l, lam, l_min):
    """P(L >= l) under the EP model."""
    return np.exp(-lam * (np.asarray(l) - l_min))


def ep_log_likelihood(lam, m, excess):
    return m * np.log1p(-np.exp(-lam)) - lam * excess


def ep_lambda(data, l_min: int) -> float:
    """Closed-form MLE ``ln(m / sum(l - l_min) + 1)`` over data >= l_min."""
    steps = _as_steps(data).in_range(l_min)
    excess = float((steps.counts * (steps.values - l_min)).sum())
    if steps.n == 0 or excess <= 0:
        raise FitError(f"no data above l_min={l_min}; exponential rate undefined")
    return math.log(steps.n / excess + 1.0)


@dataclass(frozen=True)
class EpFit:
    lambda_hat: float
    l_min: int
    log_lik: float
    ks: float
    m: int


def _ep_at(steps: EmpiricalSteps, j: int):
    v = steps.values
    sub = EmpiricalSteps(v[j:], steps.counts[j:])
    c = int(v[j])
    excess = float((sub.counts * (sub.values - c)).sum())
    lam = math.log(sub.n / excess + 1.0)
    d = float(np.max(np.abs(empirical_survival(sub) - ep_survival(sub.values, lam, c))))
    return lam, float(ep_log_likelihood(lam, sub.n, excess)), d, sub.n


def ep_fit(data, l_min: int | None = None) -> EpFit:
    """EP fit with ``l_min`` chosen by KS (ties -> smaller l_min) unless given."""
    steps = _as_steps(data)
    v = steps.values
    if len(v) < 2:
        raise FitError("EP fit needs at least two distinct step lengths")
    if l_min is None:
        cand = _candidates(steps, need_spread=True)
        if len(cand) == 0:
            raise FitError(f"no candidate l_min leaves {MIN_POINTS} points over two distinct values")
    else:
        idx = int(np.searchsorted(v, l_min))
        if idx >= len(v) - 1 or v[idx] != l_min:
            raise FitError(f"l_min={l_min} is not an observed value below the maximum")
        cand = [idx]
    best = None
    for j in cand:
        fit = _ep_at(steps, int(j))
        if best is None or fit[2] < best[1][2]:
            best = (int(j), fit)
    j, (lam, ll, d, m) = best
    return EpFit(lam, int(v[j]), ll, d, int(m))


# --------------------------------------------------------------------------- #
# model selection
# --------------------------------------------------------------------------- #
def aic(log_lik: float) -> float:
    """AIC with one free parameter (the exponent)."""
    return -2.0 * log_lik + 2.0


def aic_weights(aic_tp: float, aic_ep: float):
    """Akaike differences and weights ``(delta_tp, delta_ep, w_tp, w_ep)``."""
    low = min(aic_tp, aic_ep)
    d_tp, d_ep = aic_tp - low, aic_ep - low
    e_tp, e_ep = math.exp(-d_tp / 2.0), math.exp(-d_ep / 2.0)
    return d_tp, d_ep, e_tp / (e_tp + e_ep), e_ep / (e_tp + e_ep)


@dataclass(frozen=True)
class RangeComparison:
    """Both models fitted on the same data range, compared by Akaike weights."""

    l_min: int
    l_max: int
    eta_hat: float
    lambda_hat: float
    log_lik_tp: float
    log_lik_ep: float
    delta_tp: float
    delta_ep: float
    w_tp: float
    w_ep: float

    @property
    def prefers(self) -> str:
        return TRUNCATED_POWER_LAW if self.w_tp > self.w_ep else EXPONENTIAL


@dataclass(frozen=True)
class ModelSelection:
    """Outcome of the TP versus EP comparison.

    ``w_tp``, ``w_ep``, ``delta_tp`` and ``delta_ep`` are taken from the
    comparison on the TP fitting range; the EP-range comparison is kept in
    ``on_ep_range``.
    """

    tp: TpFit
    ep: EpFit
    on_tp_range: RangeComparison
    on_ep_range: RangeComparison
    d_adj_tp: float
    d_adj_ep: float
    verdict: str
    decided_by: str
    n_total: int

    @property
    def w_tp(self):
        return self.on_tp_range.w_tp

    @property
    def w_ep(self):
        return self.on_tp_range.w_ep

    @property
    def delta_tp(self):
        return self.on_tp_range.delta_tp

    @property
    def delta_ep(self):
        return self.on_tp_range.delta_ep

    @property
    def levy(self) -> bool:
        return self.verdict == TRUNCATED_POWER_LAW and 1.0 < self.tp.eta_hat <= 3.0


def compare_on_range(steps: EmpiricalSteps, l_min: int, l_max: int) -> RangeComparison:
    eta, ll_tp = tp_fit_exponent(steps, l_min, l_max)
    sub = steps.in_range(l_min, l_max)
    lam = ep_lambda(sub, l_min)
    excess = float((sub.counts * (sub.values - l_min)).sum())
    ll_ep = float(ep_log_likelihood(lam, sub.n, excess))
    d_tp, d_ep, w_tp, w_ep = aic_weights(aic(ll_tp), aic(ll_ep))
    return RangeComparison(int(l_min), int(l_max), eta, lam, ll_tp, ll_ep, d_tp, d_ep, w_tp, w_ep)


def adjusted_ks(d: float, n_total: int, n_used: int) -> float:
    """KS distance scaled by ``ln N / ln n``; favours models covering more data."""
    if n_used <= 1:
        return math.inf
    if n_total <= 1:
        return d
    return d * math.log(n_total) / math.log(n_used)


def select_model(data) -> ModelSelection:
    """Fit both models and decide which describes the step lengths better."""
    steps = _as_steps(data)
    try:
        tp = tp_fit(steps)
    except FitError as exc:
        raise SelectionError(f"truncated power law fit failed: {exc}") from exc
    try:
        ep = ep_fit(steps)
    except FitError as exc:
        raise SelectionError(f"exponential fit failed: {exc}") from exc
    l_max = int(steps.values[-1])
    on_tp = compare_on_range(steps, tp.l_min, l_max)
    on_ep = compare_on_range(steps, ep.l_min, l_max)
    N = steps.n
    d_adj_tp = adjusted_ks(tp.ks, N, tp.n)
    d_adj_ep = adjusted_ks(ep.ks, N, ep.m)
    if on_tp.prefers == on_ep.prefers:
        verdict, how = on_tp.prefers, "aic"
    else:
        verdict = TRUNCATED_POWER_LAW if d_adj_tp < d_adj_ep else EXPONENTIAL
        how = "d_adj"
    return ModelSelection(tp, ep, on_tp, on_ep, d_adj_tp, d_adj_ep, verdict, how, N)


@dataclass
class FitReport:
    """Everything produced by fitting one pooled sample.

    ``selection`` is ``None`` when the data could not be fitted; ``verdict``
    is then ``"indeterminate"`` and ``error`` says why.
    """

    n_total: int
    selection: ModelSelection | None = None
    error: str | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return self.selection.verdict if self.selection else INDETERMINATE

    @property
    def levy(self) -> bool:
        return bool(self.selection and self.selection.levy)


def fit_report(data) -> FitReport:
    steps = _as_steps(data)
    try:
        sel = select_model(steps)
    except SelectionError as exc:
        return FitReport(steps.n, None, str(exc))
    return FitReport(steps.n, sel, None, list(sel.tp.warnings))


def survival_table(data, selection: ModelSelection | None):
    """Rows ``(l, empirical, tp_model, ep_model)`` over the union fitting range.

    Each column is normalised to 1 at its own model's ``l_min``; out-of-range
    entries are NaN.
    """
    steps = _as_steps(data)
    rows = []
    if selection is None:
        emp = empirical_survival(steps) if steps.n else []
        return [(int(v), float(e), math.nan, math.nan) for v, e in zip(steps.values, emp)]
    tp, ep = selection.tp, selection.ep
    lo = min(tp.l_min, ep.l_min)
    sub = steps.in_range(lo)
    emp = empirical_survival(sub)
    tail = zeta_tail(tp.eta_hat, tp.l_min, tp.l_max)
    for v, e in zip(sub.values, emp):
        p_tp = tail[v - tp.l_min] / tail[0] if tp.l_min <= v <= tp.l_max else math.nan
        p_ep = float(ep_survival(v, ep.lambda_hat, ep.l_min)) if v >= ep.l_min else math.nan
        rows.append((int(v), float(e), float(p_tp), p_ep))
    return rows
