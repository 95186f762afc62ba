"""EM driver: weight initialization, E-step, M-step dispatch, strategies.

The fit alternates an E-step, which replaces each censored subject's
unknown susceptibility indicator with its conditional expectation

    w_i = p_Y * S_T / ((1 - p_Y) * S_c + p_Y * S_T),

and an M-step that maximizes the three separable components via the
estimators module. Event subjects keep w_i = 1 and known-cured subjects
w_i = 0 throughout.

Four strategies control how known-cured information enters the fit:
use it fully (including identification times), collapse it to a crude
observation probability, push the known cured out to a censoring time
beyond the last observation, or discard the cure labels entirely.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from .data import (Coefficients, Dataset, Family, Mechanism, ModelSpec,
                   Status, validate_weights)
from .errors import CureMixError, InsufficientCuredError
from .estimators import (_CoxWorkspace, fit_cureid, fit_incidence,
                         fit_latency_parametric, fit_latency_semiparametric,
                         select_lambda_bic)
from .likelihood import (LIKELIHOOD_FLOOR, Diagnostics, _cureid_log_surv_all,
                         _latency_log_surv_all, observed_loglik)

#: Multiplier applied to the largest observed time by the infinite-time
#: strategy when relocating known-cured subjects.
INFINITE_TIME_FACTOR = 1.01


class Strategy(Enum):
    """How to use (or ignore) the known-cured information."""

    FULL_INFORMATION = "full"
    CRUDE_CURE_PROBABILITY = "crude"
    INFINITE_TIME = "infinite"
    IGNORE_CURE_STATUS = "ignore"


@dataclass
class FitResult:
    """EM output: coefficients, weights, trace, and convergence state."""

    coef: Coefficients
    weights: np.ndarray
    loglik_trace: list
    iterations: int
    converged: bool
    strategy: Strategy
    spec: ModelSpec
    diagnostics: Diagnostics
    solver_reports: dict


def initialize_weights(data: Dataset) -> np.ndarray:
    """Starting weights that ignore censoring: 1 on events, 0 elsewhere."""
    return (data.status == Status.EVENT).astype(float)


def estep(data: Dataset, coef: Coefficients, spec: ModelSpec,
          diag: Diagnostics | None = None) -> np.ndarray:
    """Posterior susceptibility weights at the current parameters."""
    w = np.zeros(data.n)
    w[data.event] = 1.0
    cens = data.censored
    if not np.any(cens):
        return w
    z1 = np.column_stack([np.ones(data.n), data.z])
    p = expit(z1 @ coef.beta)
    log_st, _ = _latency_log_surv_all(data, coef, spec.latency_family)
    log_sc, _ = _cureid_log_surv_all(data, coef, spec)
    st = np.exp(log_st[cens])
    sc = np.exp(log_sc[cens])
    pc = p[cens]
    num = pc * st
    den = (1.0 - pc) * sc + num
    low = den < LIKELIHOOD_FLOOR
    if np.any(low):
        den = np.maximum(den, LIKELIHOOD_FLOOR)
        if diag is not None:
            diag.weight_clamps += int(np.count_nonzero(low))
    w[cens] = num / den
    return w


def apply_strategy(data: Dataset, spec: ModelSpec,
                   strategy: Strategy) -> tuple[Dataset, ModelSpec]:
    """Transform (dataset, spec) according to the cure-information strategy."""
    if strategy is Strategy.FULL_INFORMATION:
        return data, spec
    if strategy is Strategy.CRUDE_CURE_PROBABILITY:
        # constant observation probability: drop q, keep statuses and times
        new_data = data.replace(q=np.zeros((data.n, 0)), q_names=())
        new_spec = dataclasses.replace(spec,
                                       mechanism=Mechanism.DIAGNOSTIC_TEST,
                                       cureid_family=Family.BERNOULLI_LOGIT)
        return new_data, new_spec
    kc = data.known_cured
    status = data.status.copy()
    status[kc] = Status.CENSORED
    time = data.time.copy()
    if strategy is Strategy.INFINITE_TIME:
        time[kc] = INFINITE_TIME_FACTOR * float(data.time.max())
    new_data = data.replace(time=time, status=status)
    new_spec = dataclasses.replace(spec,
                                   mechanism=Mechanism.DETERMINISTIC_CUTOFF,
                                   cureid_family=None)
    return new_data, new_spec


def _mstep(data, w, spec, warm, workspaces, check_rank):
    reports = {}
    beta, reports["incidence"] = fit_incidence(
        data, w, spec.penalty, init=None if warm is None else warm.beta,
        check_rank=check_rank)

    baseline_T = weibull_T = None
    if spec.latency_family is Family.SEMIPARAMETRIC_PH:
        gamma, baseline_T, reports["latency"] = fit_latency_semiparametric(
            data, w, spec.penalty, init=None if warm is None else warm.gamma,
            workspace=workspaces.get("latency"), check_rank=check_rank)
    else:
        init = None
        if warm is not None and warm.weibull_T is not None:
            init = (warm.gamma, warm.weibull_T)
        gamma, weibull_T, reports["latency"] = fit_latency_parametric(
            data, w, spec.latency_family, spec.penalty, init=init,
            check_rank=check_rank)

    theta = np.zeros(0)
    baseline_C = weibull_C = None
    if spec.mechanism is not Mechanism.DETERMINISTIC_CUTOFF:
        init = None
        if warm is not None and warm.theta.size:
            if (spec.mechanism is Mechanism.STOCHASTIC_TIME
                    and spec.cureid_family is not Family.SEMIPARAMETRIC_PH):
                init = (warm.theta, warm.weibull_C)
            else:
                init = warm.theta
        theta, aux, reports["cureid"] = fit_cureid(
            data, w, spec, spec.penalty, init=init,
            workspace=workspaces.get("cureid"), check_rank=check_rank)
        if spec.mechanism is Mechanism.STOCHASTIC_TIME:
            if spec.cureid_family is Family.SEMIPARAMETRIC_PH:
                baseline_C = aux
            else:
                weibull_C = aux

    coef = Coefficients(beta=beta, gamma=gamma, theta=theta,
                        baseline_T=baseline_T, baseline_C=baseline_C,
                        weibull_T=weibull_T, weibull_C=weibull_C)
    return coef, reports


def em_fit(data: Dataset, spec: ModelSpec,
           strategy: Strategy = Strategy.FULL_INFORMATION,
           init: Coefficients | None = None) -> FitResult:
    """Fit the mixture cure model by EM.

    Parameters
    ----------
    data : Dataset
    spec : ModelSpec
        Mechanism, families, optional penalty, and EM controls. A penalty
        with BIC selection is resolved to a fixed penalty first.
    strategy : Strategy
        Applied to (data, spec) before fitting.
    init : Coefficients, optional
        Warm start; skips the default initialization (an M-step on weights
        that treat every censored subject as cured).

    Returns
    -------
    FitResult
        ``converged`` is False when the iteration cap was reached; the
        trace then still holds every observed log likelihood evaluated.

    Raises
    ------
    InsufficientCuredError
        Stochastic time-to-cure mechanism with no known-cured subjects.
    SeparationError, NonConvergenceError, and friends
        Propagated from the component estimators with the partial
        FitResult attached as ``exc.partial`` when iterations completed.
    """
    data, spec = apply_strategy(data, spec, strategy)
    if spec.penalty is not None and spec.penalty.selection == "bic":
        resolved = select_lambda_bic(data, spec, spec.penalty.grid)
        spec = dataclasses.replace(spec, penalty=resolved)
    if (spec.mechanism is Mechanism.STOCHASTIC_TIME
            and not np.any(data.known_cured)):
        raise InsufficientCuredError(
            "stochastic time-to-cure mechanism needs at least one "
            "known-cured subject")

    workspaces = {}
    if spec.latency_family is Family.SEMIPARAMETRIC_PH:
        workspaces["latency"] = _CoxWorkspace(data.time, data.event, data.x)
    if (spec.mechanism is Mechanism.STOCHASTIC_TIME
            and spec.cureid_family is Family.SEMIPARAMETRIC_PH):
        workspaces["cureid"] = _CoxWorkspace(data.time, data.known_cured,
                                             data.q)

    diag = Diagnostics()
    trace: list[float] = []
    it = 0
    w = initialize_weights(data)
    coef = init
    reports: dict = {}
    converged = False
    try:
        if coef is None:
            coef, reports = _mstep(data, w, spec, None, workspaces,
                                   check_rank=True)
        trace.append(observed_loglik(data, coef, spec, diag))
        for it in range(1, spec.em.max_iter + 1):
            w = estep(data, coef, spec, diag)
            new_coef, reports = _mstep(data, w, spec, coef, workspaces,
                                       check_rank=(it == 1 and init is not None))
            trace.append(observed_loglik(data, new_coef, spec, diag))
            dpar = float(np.max(np.abs(new_coef.flat() - coef.flat())))
            dll = abs(trace[-1] - trace[-2])
            coef = new_coef
            if dpar < spec.em.param_tol or dll < spec.em.loglik_tol:
                converged = True
                break
    except CureMixError as exc:
        # attach the last completed iterate so callers can report the
        # runaway estimate alongside the failure
        if coef is not None:
            exc.partial = FitResult(coef=coef, weights=w, loglik_trace=trace,
                                    iterations=it, converged=False,
                                    strategy=strategy, spec=spec,
                                    diagnostics=diag, solver_reports=reports)
        raise
    return FitResult(coef=coef, weights=validate_weights(w, data),
                     loglik_trace=trace, iterations=it, converged=converged,
                     strategy=strategy, spec=spec, diagnostics=diag,
                     solver_reports=reports)
