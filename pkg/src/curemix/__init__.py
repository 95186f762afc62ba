"""Mixture cure models that use known-cured individuals.

Fits the generalized mixture cure model by EM under three
cure-identification mechanisms (deterministic cutoff, stochastic
time-to-cure, diagnostic test), with semiparametric or Weibull/exponential
proportional-hazards latency, optional LASSO penalties, bootstrap
confidence intervals, and a Monte Carlo study harness.
"""

__version__ = "0.1.0"

from .data import (BaselineHazard, Coefficients, Dataset, EMControls, Family,
                   Mechanism, ModelSpec, Status, SubjectRecord, WeibullParams,
                   validate_weights)
from .em import FitResult, Strategy, apply_strategy, em_fit, estep, initialize_weights
from .errors import (BootstrapDegenerateError, CalibrationError, CureMixError,
                     DataError, DegenerateRiskSetError, InsufficientCuredError,
                     NonConvergenceError, OrderingError, RankError,
                     SeparationError)
from .estimators import (PenaltyConfig, SolverReport, fit_cureid,
                         fit_incidence, fit_latency_parametric,
                         fit_latency_semiparametric, select_lambda_bic)
from .inference import (BootstrapResult, StudyReport, bootstrap_ci,
                        compare_strategies, default_fit_spec, run_study)
from .likelihood import (Diagnostics, expected_complete_loglik, incidence_prob,
                         observed_loglik, survival_C, survival_T)
from .simgen import (CutoffCureId, DiagnosticCureId, GeneratedDataset,
                     Ordering, ScenarioConfig, StochasticCureId,
                     calibrate_censoring, generate, make_ordering_params,
                     table_scenario, verify_ordering)

__all__ = [name for name in dir() if not name.startswith("_")]
