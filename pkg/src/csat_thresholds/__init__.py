"""Fit ordinal decision thresholds so predicted CSAT matches survey CSAT."""

__version__ = "0.1.0"

from .domain import (
    CallTable,
    CsatError,
    DEFAULT_BASELINE,
    GroupTrainingStats,
    LossBreakdown,
    OrdinalDistribution,
    ScoredCall,
    Thresholds,
    validate_call,
)
from .experiment import (
    CONDITIONS,
    DEFAULT_BINS,
    ConditionReport,
    HarnessSettings,
    TrialWindows,
    VolumeBin,
    aggregate_bins,
    run_experiment,
    run_trials,
)
from .loss import loss_between, mean_of, normalize_unit, pct_satisfied
from .mapping import map_all, map_proba, map_probas
from .optimizer import FitResult, fit_exhaustive, fit_random_search
from .strategy import StrategyConfig, assign_thresholds, eligibility
from .synthdata import SynthConfig, generate
