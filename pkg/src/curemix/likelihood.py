"""Survival primitives and likelihood evaluators.

The observed-data log likelihood sums, per subject,

* event:        log p_Y + log h_T + log S_T
* known cured:  log(1 - p_Y) + log h_c + log S_c
* censored:     log(p_Y * S_T + (1 - p_Y) * S_c)

where S_c depends on the cure-identification mechanism: constant 1 under a
deterministic cutoff, a proper survival function under a stochastic
time-to-cure, and the constant 1 - p_obs(q) under a diagnostic test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit

from .data import (Coefficients, Dataset, Family, Mechanism, ModelSpec,
                   validate_weights)
from .errors import DataError

#: Smallest per-subject likelihood contribution before taking logs.
LIKELIHOOD_FLOOR = np.exp(-700.0)


@dataclass
class Diagnostics:
    """Counters for numerical guard rails hit during evaluation."""

    loglik_clamps: int = 0
    weight_clamps: int = 0
    notes: list = field(default_factory=list)

    def merge(self, other: "Diagnostics") -> None:
        self.loglik_clamps += other.loglik_clamps
        self.weight_clamps += other.weight_clamps
        self.notes.extend(other.notes)


def incidence_prob(z, beta):
    """Susceptibility probability p_Y(z) under the logit link.

    Parameters
    ----------
    z : array_like
        One covariate vector (without the constant), or an (n, pz) matrix.
    beta : array_like
        Incidence coefficients, intercept first; length pz + 1.

    Returns
    -------
    float or ndarray
        expit(beta0 + beta' z), in (0, 1).
    """
    z = np.asarray(z, dtype=float)
    beta = np.asarray(beta, dtype=float)
    one_row = z.ndim <= 1
    zmat = z.reshape(1, -1) if one_row else z
    if zmat.shape[1] + 1 != beta.shape[0]:
        raise DataError(f"incidence dimensions disagree: z has {zmat.shape[1]} "
                        f"columns but beta has length {beta.shape[0]}")
    p = expit(beta[0] + zmat @ beta[1:])
    return float(p[0]) if one_row else p


def _linear_predictor(mat, coefs, part):
    coefs = np.asarray(coefs, dtype=float)
    if mat.shape[1] != coefs.shape[0]:
        raise DataError(f"{part} dimensions disagree: covariates have "
                        f"{mat.shape[1]} columns but coefficients have length "
                        f"{coefs.shape[0]}")
    return mat @ coefs if mat.shape[1] else np.zeros(mat.shape[0])


def _ph_log_survival(t, eta, family, weibull, baseline, zero_tail):
    """log S(t | eta) for one survival part; -inf encodes survival zero."""
    t = np.asarray(t, dtype=float)
    if family is Family.SEMIPARAMETRIC_PH:
        if baseline is None:
            raise DataError("semiparametric survival needs a baseline hazard")
        logs = -baseline.cum_hazard(t) * np.exp(eta)
        if zero_tail:
            logs = np.where(t > baseline.final_time, -np.inf, logs)
        return logs
    if weibull is None:
        raise DataError(f"{family} survival needs Weibull parameters")
    return -np.power(t / weibull.scale, weibull.shape) * np.exp(eta)


def survival_T(t, x, coef: Coefficients, family: Family):
    """Latency survival S_T(t, x) for one subject.

    Semiparametric baselines use the zero-tail convention: survival is 0
    beyond the largest event time in the baseline.
    """
    if t < 0:
        raise DataError("time must be nonnegative")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    eta = _linear_predictor(x, coef.gamma, "latency")
    logs = _ph_log_survival(np.asarray([t]), eta, family, coef.weibull_T,
                            coef.baseline_T, zero_tail=True)
    return float(np.exp(logs[0]))


def survival_C(t, q, coef: Coefficients, spec: ModelSpec):
    """Cure-identification survival S_c(t, q) under the spec's mechanism.

    Returns 1 under a deterministic cutoff, the Bernoulli survival
    1 - p_obs(q) (constant in t) under a diagnostic test, and the
    proportional-hazards survival of the time-to-cure otherwise.
    """
    if t < 0:
        raise DataError("time must be nonnegative")
    if spec.mechanism is Mechanism.DETERMINISTIC_CUTOFF:
        return 1.0
    q = np.asarray(q, dtype=float).reshape(1, -1)
    if spec.mechanism is Mechanism.DIAGNOSTIC_TEST:
        return 1.0 - incidence_prob(q[0], coef.theta)
    eta = _linear_predictor(q, coef.theta, "cure-identification")
    logs = _ph_log_survival(np.asarray([t]), eta, spec.cureid_family,
                            coef.weibull_C, coef.baseline_C, zero_tail=False)
    return float(np.exp(logs[0]))


def _latency_log_surv_all(data: Dataset, coef: Coefficients, family: Family):
    eta = _linear_predictor(data.x, coef.gamma, "latency")
    return _ph_log_survival(data.time, eta, family, coef.weibull_T,
                            coef.baseline_T, zero_tail=True), eta


def _cureid_log_surv_all(data: Dataset, coef: Coefficients, spec: ModelSpec):
    """(log S_c, eta_c) for every subject; eta is None for non-PH families."""
    n = data.n
    if spec.mechanism is Mechanism.DETERMINISTIC_CUTOFF:
        return np.zeros(n), None
    if spec.mechanism is Mechanism.DIAGNOSTIC_TEST:
        q1 = np.column_stack([np.ones(n), data.q])
        if q1.shape[1] != coef.theta.shape[0]:
            raise DataError("theta length does not match q columns + intercept")
        # log(1 - p_obs) = log_expit(-eta)
        return log_expit(-(q1 @ coef.theta)), None
    eta = _linear_predictor(data.q, coef.theta, "cure-identification")
    logs = _ph_log_survival(data.time, eta, spec.cureid_family,
                            coef.weibull_C, coef.baseline_C, zero_tail=False)
    return logs, eta


def _log_hazard(t, eta, family, weibull, baseline):
    """log h(t | eta) at event times; semiparametric uses the hazard mass."""
    t = np.asarray(t, dtype=float)
    if family is Family.SEMIPARAMETRIC_PH:
        inc = np.maximum(baseline.increment_at(t), LIKELIHOOD_FLOOR)
        return np.log(inc) + eta
    k, lam = weibull.shape, weibull.scale
    if k == 1.0:
        shape_term = 0.0
    else:
        with np.errstate(divide="ignore"):
            shape_term = (k - 1.0) * np.log(t)
    return np.log(k) + shape_term - k * np.log(lam) + eta


def observed_loglik(data: Dataset, coef: Coefficients, spec: ModelSpec,
                    diag: Diagnostics | None = None) -> float:
    """Observed-data log likelihood of the full sample.

    Per-subject contributions are floored at ``LIKELIHOOD_FLOOR`` before
    taking logs; any clamp is counted in ``diag`` when provided.
    """
    z1 = np.column_stack([np.ones(data.n), data.z])
    if z1.shape[1] != coef.beta.shape[0]:
        raise DataError("beta length does not match z columns + intercept")
    eta_inc = z1 @ coef.beta
    log_p = log_expit(eta_inc)
    log_1mp = log_expit(-eta_inc)

    log_st, eta_t = _latency_log_surv_all(data, coef, spec.latency_family)
    log_sc, eta_c = _cureid_log_surv_all(data, coef, spec)

    clamps = 0
    total = 0.0

    ev = data.event
    if np.any(ev):
        lh = _log_hazard(data.time[ev], eta_t[ev], spec.latency_family,
                         coef.weibull_T, coef.baseline_T)
        total += float(np.sum(log_p[ev] + lh + log_st[ev]))

    kc = data.known_cured
    if np.any(kc):
        if spec.mechanism is Mechanism.DETERMINISTIC_CUTOFF:
            # identification at the cutoff is parameter free
            contrib = log_1mp[kc]
        elif spec.mechanism is Mechanism.DIAGNOSTIC_TEST:
            q1 = np.column_stack([np.ones(data.n), data.q])
            log_pobs = log_expit(q1[kc] @ coef.theta)
            contrib = log_1mp[kc] + log_pobs
        else:
            lh = _log_hazard(data.time[kc], eta_c[kc], spec.cureid_family,
                             coef.weibull_C, coef.baseline_C)
            contrib = log_1mp[kc] + lh + log_sc[kc]
        total += float(np.sum(contrib))

    cens = data.censored
    if np.any(cens):
        mix = (np.exp(log_p[cens] + log_st[cens])
               + np.exp(log_1mp[cens] + log_sc[cens]))
        low = mix < LIKELIHOOD_FLOOR
        clamps += int(np.count_nonzero(low))
        total += float(np.sum(np.log(np.maximum(mix, LIKELIHOOD_FLOOR))))

    if diag is not None and clamps:
        diag.loglik_clamps += clamps
    return total


def expected_complete_loglik(data: Dataset, coef: Coefficients, w,
                             spec: ModelSpec) -> tuple[float, float, float]:
    """The three M-step objectives (incidence, latency, cure identification).

    Their sum is the expected complete-data log likelihood given the
    susceptibility weights ``w``; each piece depends on its own
    coefficient block only, which is what makes the M-step separable.
    Uncensored subjects contribute hazard terms weighted by w (latency)
    and 1 - w (cure identification); under EM weights those factors are
    exactly 1 on events and known-cured subjects respectively.
    """
    w = validate_weights(w, data, pinned=False)
    uncensored = ~data.censored
    z1 = np.column_stack([np.ones(data.n), data.z])
    if z1.shape[1] != coef.beta.shape[0]:
        raise DataError("beta length does not match z columns + intercept")
    eta_inc = z1 @ coef.beta
    el1 = float(np.sum(w * log_expit(eta_inc) + (1.0 - w) * log_expit(-eta_inc)))

    log_st, eta_t = _latency_log_surv_all(data, coef, spec.latency_family)
    el2 = 0.0
    ev = uncensored & (w > 0)
    if np.any(ev):
        el2 += float(np.sum(w[ev] * _log_hazard(data.time[ev], eta_t[ev],
                                                spec.latency_family,
                                                coef.weibull_T,
                                                coef.baseline_T)))
    wpos = w > 0
    el2 += float(np.sum(w[wpos] * log_st[wpos]))

    el3 = 0.0
    if spec.mechanism is not Mechanism.DETERMINISTIC_CUTOFF:
        log_sc, eta_c = _cureid_log_surv_all(data, coef, spec)
        sub = w < 1
        if spec.mechanism is Mechanism.DIAGNOSTIC_TEST:
            q1 = np.column_stack([np.ones(data.n), data.q])
            log_pobs = log_expit(q1 @ coef.theta)
            resp = np.where(uncensored, log_pobs, log_sc)
            el3 += float(np.sum((1.0 - w[sub]) * resp[sub]))
        else:
            kc = uncensored & sub
            if np.any(kc):
                el3 += float(np.sum((1.0 - w[kc])
                                    * _log_hazard(data.time[kc], eta_c[kc],
                                                  spec.cureid_family,
                                                  coef.weibull_C,
                                                  coef.baseline_C)))
            el3 += float(np.sum((1.0 - w[sub]) * log_sc[sub]))
    return el1, el2, el3
