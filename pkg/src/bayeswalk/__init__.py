"""Lévy-like walks from extended Bayesian inference in a two-agent imitation game."""
from .bib_core import (
    AgentState, InferenceParams, ParameterError, StepRecord, gaussian_density, init_agent,
    inverse_bayes_update, sample_datum, select_h_max, step_agent, update_confidences,
)
from .imitation_game import GameConfig, GameTrace, mean_confidence, run_game
from .walk_model import (
    Segments, Trajectory, WalkParams, confidence_by_step_length, extract_steps, map_to_walk,
)
from .levy_fit import (
    EmpiricalSteps, EpFit, FitError, FitReport, ModelSelection, SelectionError, TpFit, ep_fit,
    ep_lambda, fit_report, ks_statistic, select_model, tp_fit, tp_fit_exponent, tp_select_lmin,
    tp_survival,
)
from .harness import BatchConfig, BatchResult, FigureDataset, emit_figure_data, run_batch, split_seed, sweep

__version__ = "0.1.0"
