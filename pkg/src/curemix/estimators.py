"""M-step component estimators.

The expected complete-data log likelihood separates into three pieces that
are maximized independently given the susceptibility weights:

* incidence: a weighted Bernoulli/logit regression with the weights as
  fractional responses,
* latency: a weighted survival fit (Cox partial likelihood with a
  Breslow-type baseline, or a Weibull/exponential proportional-hazards
  model) where subject i contributes risk mass w_i,
* cure identification: the same survival machinery run on weights 1 - w_i
  with known-cured subjects as the events, or a weighted logit fit of the
  probability that a cured subject is observed.

Each estimator optionally applies per-coefficient LASSO penalties of the
form n * lambda_j * |coef_j|; intercepts are never penalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import (BaselineHazard, Dataset, Family, Mechanism, ModelSpec,
                   WeibullParams, validate_weights)
from .errors import (DataError, DegenerateRiskSetError, InsufficientCuredError,
                     NonConvergenceError, RankError, SeparationError)

#: Coefficients with magnitude beyond this are treated as quasi-separation
#: in logistic fits.
SEPARATION_BOUND = 50.0

#: Inner-solver stopping rule: max |parameter change| below this, or the
#: iteration cap is reached.
INNER_TOL = 1e-8
INNER_MAX_ITER = 100
MAX_HALVINGS = 20

_RISK_FLOOR = 1e-300
_ETA_CAP = 300.0


@dataclass
class SolverReport:
    """Outcome of one inner maximization."""

    iterations: int
    converged: bool
    final_objective: float
    gradient_norm: float
    kkt_residual: float | None = None


@dataclass(frozen=True)
class PenaltyConfig:
    """LASSO penalty configuration.

    Each ``lambda_*`` is a nonnegative scalar or a per-coefficient vector
    over the penalized coordinates of that block (incidence and logit
    cure-identification intercepts are excluded). ``selection`` is either
    ``"fixed"`` or ``"bic"``; with ``"bic"`` the ``grid`` of candidate
    scalar penalties is searched by :func:`select_lambda_bic` before
    fitting.
    """

    lambda_beta: object = 0.0
    lambda_gamma: object = 0.0
    lambda_theta: object = 0.0
    selection: str = "fixed"
    grid: tuple | None = None

    def __post_init__(self):
        for name in ("lambda_beta", "lambda_gamma", "lambda_theta"):
            lam = np.asarray(getattr(self, name), dtype=float)
            if np.any(lam < 0):
                raise DataError(f"{name} must be nonnegative")
        if self.selection not in ("fixed", "bic"):
            raise DataError("penalty selection must be 'fixed' or 'bic'")
        if self.selection == "bic" and not self.grid:
            raise DataError("BIC selection needs a nonempty grid")

    def block(self, name: str, size: int) -> np.ndarray:
        """Per-coefficient penalty vector for one block."""
        lam = np.asarray(getattr(self, f"lambda_{name}"), dtype=float)
        if lam.ndim == 0:
            return np.full(size, float(lam))
        if lam.shape != (size,):
            raise DataError(f"lambda_{name} has shape {lam.shape}, expected "
                            f"({size},)")
        return lam.copy()


def _check_design(X, n_unpenalized_lead=0, what="design"):
    """Reject constant columns and rank deficiency."""
    p = X.shape[1]
    if p == 0:
        return
    sd = X.std(axis=0)
    for j in range(n_unpenalized_lead, p):
        if sd[j] < 1e-12:
            raise RankError(f"{what} column {j} is constant")
    if np.linalg.matrix_rank(X) < p:
        raise RankError(f"{what} matrix is rank deficient")


def _soft(u, lam):
    return np.sign(u) * max(abs(u) - lam, 0.0)


def _newton_maximize(vgh, x0, *, guard=None, tol=INNER_TOL,
                     max_iter=INNER_MAX_ITER, accept_equal=False):
    """Newton-Raphson with step halving; steps never decrease the objective.

    ``accept_equal`` lets full steps through when the objective has
    saturated in float precision, so boundary drift (quasi-separation)
    still reaches the guard instead of stalling.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g, H = vgh(x)
    if not np.isfinite(f):
        raise DataError("objective not finite at the starting point")
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError:
            step = np.full_like(x, np.nan)
        candidates = []
        if np.all(np.isfinite(step)) and float(g @ step) > 0:
            candidates.append(step)
        # fallback when the Hessian is indefinite or Newton overshoots:
        # a diagonally scaled gradient step, halved as needed
        scale = np.abs(np.diag(H)).max() + 1e-12
        fallback = g / scale
        if np.all(np.isfinite(fallback)):
            candidates.append(fallback)
        accepted = False
        for cand in candidates:
            alpha = 1.0
            for _ in range(MAX_HALVINGS):
                x_new = x + alpha * cand
                f_new, g_new, H_new = vgh(x_new)
                if np.isfinite(f_new) and (f_new > f
                                           or (accept_equal and f_new == f
                                               and alpha == 1.0)):
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                break
        if not accepted:
            break
        dx = float(np.max(np.abs(x_new - x))) if len(x) else 0.0
        x, f, g, H = x_new, f_new, g_new, H_new
        if guard is not None:
            guard(x)
        if dx < tol:
            converged = True
            break
    grad_norm = float(np.max(np.abs(g))) if len(x) else 0.0
    if not converged:
        # a stall with a numerically flat gradient still counts
        converged = grad_norm <= 1e-5 * (1.0 + abs(f))
    return x, SolverReport(it, converged, float(f), grad_norm)


def _penalized_maximize(vgh, x0, pen, *, guard=None, tol=INNER_TOL,
                        max_iter=INNER_MAX_ITER):
    """Proximal Newton for f(x) - pen'|x|: coordinate descent on the local
    quadratic model, then a halving line search on the true objective."""
    x = np.asarray(x0, dtype=float).copy()
    pen = np.asarray(pen, dtype=float)
    p = len(x)
    f, g, H = vgh(x)
    if not np.isfinite(f):
        raise DataError("objective not finite at the starting point")
    obj = f - float(pen @ np.abs(x))

    def concave_model(H):
        # the CD subproblem needs a negative-definite quadratic
        eigmax = float(np.linalg.eigvalsh(H).max())
        if eigmax < -1e-10:
            return H
        return H - (eigmax + 1e-6) * np.eye(p)

    def cd_direction(g, H, x):
        v = x.copy()
        r = g.copy()
        a = np.maximum(-np.diag(H), 1e-12)
        for _ in range(200):
            biggest = 0.0
            for j in range(p):
                u = r[j] + a[j] * v[j]
                vj = _soft(u, pen[j]) / a[j]
                dj = vj - v[j]
                if dj != 0.0:
                    r += H[:, j] * dj
                    v[j] = vj
                    biggest = max(biggest, abs(dj))
            if biggest < 1e-12:
                break
        return v

    def prox_gradient(g, H, x):
        step = 1.0 / (np.abs(np.diag(H)).max() + 1e-12)
        u = x + step * g
        return np.sign(u) * np.maximum(np.abs(u) - step * pen, 0.0)

    it = 0
    converged = False
    stalled = False
    for it in range(1, max_iter + 1):
        Hm = concave_model(H)
        candidates = [cd_direction(g, Hm, x), prox_gradient(g, Hm, x)]
        accepted = False
        for v in candidates:
            alpha = 1.0
            for _ in range(MAX_HALVINGS):
                x_new = v if alpha == 1.0 else x + alpha * (v - x)
                f_new, g_new, H_new = vgh(x_new)
                obj_new = f_new - float(pen @ np.abs(x_new))
                if np.isfinite(obj_new) and obj_new > obj - 1e-14 * (1 + abs(obj)):
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                break
        if not accepted:
            stalled = True
            break
        dx = float(np.max(np.abs(x_new - x))) if p else 0.0
        x, f, g, H, obj = x_new, f_new, g_new, H_new, obj_new
        if guard is not None:
            guard(x)
        if dx < tol:
            converged = True
            break

    kkt = 0.0
    for j in range(p):
        if pen[j] > 0 and x[j] == 0.0:
            kkt = max(kkt, max(abs(g[j]) - pen[j], 0.0))
        elif pen[j] > 0:
            kkt = max(kkt, abs(g[j] - pen[j] * np.sign(x[j])))
        else:
            kkt = max(kkt, abs(g[j]))
    if stalled:
        converged = kkt <= 1e-5 * (1.0 + abs(obj))
    return x, SolverReport(it, converged, float(obj), float(np.max(np.abs(g))) if p else 0.0,
                           kkt_residual=kkt)


def _logistic_vgh(X, r, omega):
    def vgh(beta):
        eta = X @ beta
        f = float(np.sum(omega * (r * eta - np.logaddexp(0.0, eta))))
        prob = expit(eta)
        g = X.T @ (omega * (r - prob))
        wt = omega * prob * (1.0 - prob)
        H = -(X * wt[:, None]).T @ X
        return f, g, H
    return vgh


def _separation_guard(x):
    if np.any(np.abs(x) > SEPARATION_BOUND):
        raise SeparationError("a logistic coefficient exceeded "
                              f"{SEPARATION_BOUND} in magnitude")


def _fit_weighted_logit(X, r, omega, pen, init=None, check_rank=True,
                        what="incidence"):
    """Shared solver for the incidence and diagnostic-test fits.

    ``r`` are (possibly fractional) responses, ``omega`` case weights and
    ``pen`` the per-coefficient penalty vector (0 for the intercept).
    """
    n, p = X.shape
    if check_rank:
        _check_design(X, n_unpenalized_lead=1, what=what)
    x0 = np.zeros(p) if init is None else np.asarray(init, dtype=float).copy()
    vgh = _logistic_vgh(X, r, omega)
    if np.any(pen > 0):
        # scale-only standardization; penalties transform with the scale
        sd = X.std(axis=0)
        scale = np.where(sd > 1e-12, sd, 1.0)
        scale[0] = 1.0
        Xs = X / scale
        vgh_s = _logistic_vgh(Xs, r, omega)
        beta_s, report = _penalized_maximize(vgh_s, x0 * scale, pen / scale,
                                             guard=_separation_guard)
        beta = beta_s / scale
        # report KKT on the original scale
        _, g, _ = vgh(beta)
        kkt = 0.0
        for j in range(p):
            if pen[j] > 0 and beta[j] == 0.0:
                kkt = max(kkt, max(abs(g[j]) - pen[j], 0.0))
            elif pen[j] > 0:
                kkt = max(kkt, abs(g[j] - pen[j] * np.sign(beta[j])))
            else:
                kkt = max(kkt, abs(g[j]))
        report.kkt_residual = float(kkt)
        report.final_objective = vgh(beta)[0] - float(pen @ np.abs(beta))
        return beta, report
    beta, report = _newton_maximize(vgh, x0, guard=_separation_guard,
                                    accept_equal=True)
    # Boundary fit: every contributing response is binary and matched to
    # within fp, so the data are separated and the MLE sits at infinity.
    m = omega > 0
    if np.any(m):
        rm = r[m]
        if np.all((rm == 0.0) | (rm == 1.0)):
            pm = expit(X[m] @ beta)
            if np.all(np.abs(rm - pm) < 1e-10):
                raise SeparationError("fitted probabilities reached the 0/1 "
                                      "boundary on every contributing row")
    return beta, report


def fit_incidence(data: Dataset, w, penalty: PenaltyConfig | None = None,
                  init=None, check_rank=True):
    """Maximize the weighted incidence log likelihood.

    Parameters
    ----------
    data : Dataset
    w : array_like
        Susceptibility weights, used as fractional Bernoulli responses.
    penalty : PenaltyConfig, optional
        LASSO penalties on the non-intercept coefficients.
    init : array_like, optional
        Warm start for the coefficient vector (intercept first).

    Returns
    -------
    beta : ndarray, shape (pz + 1,)
    report : SolverReport
    """
    w = validate_weights(w, data, pinned=False)
    X = np.column_stack([np.ones(data.n), data.z])
    pen = np.zeros(X.shape[1])
    if penalty is not None:
        pen[1:] = data.n * penalty.block("beta", data.z.shape[1])
    return _fit_weighted_logit(X, w, np.ones(data.n), pen, init=init,
                               check_rank=check_rank, what="incidence")


class _CoxWorkspace:
    """Sorted structures for a weighted Cox partial likelihood.

    Built once per (time, event flag, covariates); weights and
    coefficients vary across calls. Ties use Breslow handling: the events
    at one distinct time share a single risk-set denominator.
    """

    def __init__(self, time, is_event, X):
        if not np.any(is_event):
            raise DataError("no event subjects for the survival fit")
        if np.any(time[is_event] <= 0):
            raise DataError("event times must be positive")
        order = np.argsort(-time, kind="stable")
        self.order = order
        self.t = time[order]
        self.ev = is_event[order]
        self.X = X[order]
        self.p = X.shape[1]
        # distinct event times, descending, with their tie-group risk prefix
        ev_times = np.unique(self.t[self.ev])[::-1]
        self.event_times_desc = ev_times
        # prefix end (exclusive) of the risk set {m : t_m >= tau_j}
        self.risk_end = np.searchsorted(-self.t, -ev_times, side="right")
        self.d = np.empty(ev_times.size)
        self.xsum = np.empty((ev_times.size, self.p))
        for j, tau in enumerate(ev_times):
            rows = self.ev & (self.t == tau)
            self.d[j] = np.count_nonzero(rows)
            self.xsum[j] = self.X[rows].sum(axis=0)

    def _risk_sums(self, w_sorted, gamma):
        eta = self.X @ gamma if self.p else np.zeros(self.t.size)
        eta = np.clip(eta, -_ETA_CAP, _ETA_CAP)
        s = w_sorted * np.exp(eta)
        s0 = np.cumsum(s)[self.risk_end - 1]
        return eta, s, s0

    def value(self, w_sorted, gamma):
        eta, _, s0 = self._risk_sums(w_sorted, gamma)
        if np.any(s0 < _RISK_FLOOR):
            raise DegenerateRiskSetError("risk-set weight sum vanished at an "
                                         "event time")
        ev_eta = (self.xsum @ gamma) if self.p else np.zeros(self.d.size)
        return float(np.sum(ev_eta - self.d * np.log(s0)))

    def vgh(self, w_sorted):
        def fn(gamma):
            eta, s, s0 = self._risk_sums(w_sorted, gamma)
            if np.any(s0 < _RISK_FLOOR):
                return -np.inf, np.zeros(self.p), -np.eye(max(self.p, 1))[:self.p, :self.p]
            sx = np.cumsum(s[:, None] * self.X, axis=0)[self.risk_end - 1]
            sxx = np.cumsum(s[:, None, None]
                            * (self.X[:, :, None] * self.X[:, None, :]),
                            axis=0)[self.risk_end - 1]
            xbar = sx / s0[:, None]
            ev_eta = self.xsum @ gamma
            f = float(np.sum(ev_eta - self.d * np.log(s0)))
            g = (self.xsum - self.d[:, None] * xbar).sum(axis=0)
            cov = sxx / s0[:, None, None] - xbar[:, :, None] * xbar[:, None, :]
            H = -(self.d[:, None, None] * cov).sum(axis=0)
            return f, g, H
        return fn

    def breslow(self, w_sorted, gamma) -> BaselineHazard:
        _, _, s0 = self._risk_sums(w_sorted, gamma)
        if np.any(s0 < _RISK_FLOOR):
            raise DegenerateRiskSetError("risk-set weight sum vanished at an "
                                         "event time")
        inc = self.d / s0
        return BaselineHazard(self.event_times_desc[::-1], inc[::-1])


def _fit_cox(time, is_event, X, w, pen, init=None, workspace=None,
             check_rank=True):
    ws = workspace if workspace is not None else _CoxWorkspace(time, is_event, X)
    if check_rank and ws.p:
        _check_design(ws.X, what="survival design")
    w_sorted = w[ws.order]
    if ws.p == 0:
        base = ws.breslow(w_sorted, np.zeros(0))
        report = SolverReport(0, True, ws.value(w_sorted, np.zeros(0)), 0.0)
        return np.zeros(0), base, report
    x0 = np.zeros(ws.p) if init is None else np.asarray(init, dtype=float).copy()
    if np.any(pen > 0):
        sd = ws.X.std(axis=0)
        scale = np.where(sd > 1e-12, sd, 1.0)
        ws_s = _CoxWorkspace(time, is_event, X / scale)
        gam_s, report = _penalized_maximize(ws_s.vgh(w[ws_s.order]), x0 * scale,
                                            pen / scale)
        gamma = gam_s / scale
        _, g, _ = ws.vgh(w_sorted)(gamma)
        kkt = 0.0
        for j in range(ws.p):
            if pen[j] > 0 and gamma[j] == 0.0:
                kkt = max(kkt, max(abs(g[j]) - pen[j], 0.0))
            elif pen[j] > 0:
                kkt = max(kkt, abs(g[j] - pen[j] * np.sign(gamma[j])))
            else:
                kkt = max(kkt, abs(g[j]))
        report.kkt_residual = float(kkt)
    else:
        gamma, report = _newton_maximize(ws.vgh(w_sorted), x0)
    base = ws.breslow(w_sorted, gamma)
    return gamma, base, report


def fit_latency_semiparametric(data: Dataset, w,
                               penalty: PenaltyConfig | None = None,
                               init=None, workspace=None, check_rank=True):
    """Weighted Cox fit of the latency part with a Breslow-type baseline.

    Subject m contributes risk mass w_m * exp(gamma' x_m); only event
    subjects contribute event terms, and known-cured subjects carry zero
    weight so they drop from every risk sum.

    Returns
    -------
    gamma : ndarray, shape (px,)
    baseline : BaselineHazard
        Cumulative baseline hazard with increments d_i over the weighted
        risk-set sums.
    report : SolverReport
    """
    w = validate_weights(w, data)
    pen = np.zeros(data.x.shape[1])
    if penalty is not None:
        pen = data.n * penalty.block("gamma", data.x.shape[1])
    return _fit_cox(data.time, data.event, data.x, w, pen, init=init,
                    workspace=workspace, check_rank=check_rank)


def _weibull_vgh(time, is_event, X, w, fix_shape):
    """value/gradient/Hessian for the Weibull PH objective.

    Parameter vector is (log shape, log scale, gamma...) or
    (log scale, gamma...) when the shape is fixed at 1 (exponential).
    """
    ev = is_event
    n_ev = int(np.count_nonzero(ev))
    logt_ev = np.log(time[ev])
    x_ev_sum = X[ev].sum(axis=0) if X.shape[1] else np.zeros(0)
    m = (w > 0) & (time > 0)
    tm = time[m]
    wm = w[m]
    Xm = X[m]
    logtm = np.log(tm)
    p = X.shape[1]
    off = 1 if fix_shape else 2

    def vgh(psi):
        # reject absurd regions outright so no intermediate can overflow;
        # the line search only needs a rejectable value out there
        if np.max(np.abs(psi)) > 200.0:
            return -np.inf, np.zeros(psi.size), -np.eye(psi.size)
        if fix_shape:
            a = 0.0
            k = 1.0
        else:
            a = psi[0]
            k = np.exp(min(a, 50.0))
        b = psi[off - 1]
        gamma = psi[off:]
        eta_m = Xm @ gamma if p else np.zeros(Xm.shape[0])
        u = k * (logtm - b)
        r = np.exp(np.minimum(u + eta_m, 300.0))
        # objective
        ev_eta_sum = float(x_ev_sum @ gamma) if p else 0.0
        f = (n_ev * (a - k * b) + (k - 1.0) * float(logt_ev.sum())
             + ev_eta_sum - float(np.sum(wm * r)))
        if not np.isfinite(f):
            return -np.inf, np.zeros(psi.size), -np.eye(psi.size)
        wr = wm * r
        swr = float(wr.sum())
        g = np.empty(psi.size)
        H = np.zeros((psi.size, psi.size))
        u_ev = k * (logt_ev - b)
        if not fix_shape:
            g[0] = n_ev + float(u_ev.sum()) - float(np.sum(wr * u))
            H[0, 0] = float(u_ev.sum()) - float(np.sum(wr * (u * u + u)))
            H[0, off - 1] = -k * n_ev + k * float(np.sum(wr * (u + 1.0)))
            H[off - 1, 0] = H[0, off - 1]
        g[off - 1] = k * (swr - n_ev)
        H[off - 1, off - 1] = -k * k * swr
        if p:
            g[off:] = x_ev_sum - Xm.T @ wr
            wrX = Xm * wr[:, None]
            if not fix_shape:
                H[0, off:] = -(wrX * u[:, None]).sum(axis=0)
                H[off:, 0] = H[0, off:]
            H[off - 1, off:] = k * wrX.sum(axis=0)
            H[off:, off - 1] = H[off - 1, off:]
            H[off:, off:] = -wrX.T @ Xm
        return f, g, H

    return vgh


def _fit_weibull_ph(time, is_event, X, w, family, pen_gamma, init=None,
                    check_rank=True, what="latency"):
    if not np.any(is_event):
        raise DataError(f"no event subjects for the {what} fit")
    if np.any(time[is_event] <= 0):
        raise DataError("event times must be positive")
    if check_rank and X.shape[1]:
        _check_design(X, what=f"{what} design")
    fix_shape = family is Family.EXPONENTIAL_PH
    off = 1 if fix_shape else 2
    p = X.shape[1]
    if init is None:
        # exponential moment start: rate = weighted events / weighted time
        denom = max(float(np.sum(w * time)), 1e-12)
        scale0 = denom / max(float(np.count_nonzero(is_event)), 1.0)
        psi0 = np.zeros(off + p)
        psi0[off - 1] = np.log(scale0)
    else:
        gamma0, wb0 = init
        psi0 = np.zeros(off + p)
        if not fix_shape:
            psi0[0] = np.log(wb0.shape)
        psi0[off - 1] = np.log(wb0.scale)
        psi0[off:] = gamma0
    vgh = _weibull_vgh(time, is_event, X, w, fix_shape)
    if np.any(pen_gamma > 0):
        pen = np.concatenate([np.zeros(off), pen_gamma])
        sd = X.std(axis=0)
        scale = np.where(sd > 1e-12, sd, 1.0)
        vgh_s = _weibull_vgh(time, is_event, X / scale, w, fix_shape)
        psi0_s = psi0.copy()
        psi0_s[off:] = psi0[off:] * scale
        pen_s = pen.copy()
        pen_s[off:] = pen[off:] / scale
        psi_s, report = _penalized_maximize(vgh_s, psi0_s, pen_s)
        psi = psi_s.copy()
        psi[off:] = psi_s[off:] / scale
        _, g, _ = vgh(psi)
        kkt = 0.0
        for j in range(psi.size):
            if pen[j] > 0 and psi[j] == 0.0:
                kkt = max(kkt, max(abs(g[j]) - pen[j], 0.0))
            elif pen[j] > 0:
                kkt = max(kkt, abs(g[j] - pen[j] * np.sign(psi[j])))
            else:
                kkt = max(kkt, abs(g[j]))
        report.kkt_residual = float(kkt)
    else:
        psi, report = _newton_maximize(vgh, psi0)
    shape = 1.0 if fix_shape else float(np.exp(psi[0]))
    params = WeibullParams(shape=shape, scale=float(np.exp(psi[off - 1])))
    gamma = psi[off:]
    if not report.converged and report.iterations >= INNER_MAX_ITER:
        raise NonConvergenceError(f"{what} fit hit the iteration cap",
                                  best=(gamma, params, report))
    return gamma, params, report


def fit_latency_parametric(data: Dataset, w, family: Family,
                           penalty: PenaltyConfig | None = None, init=None,
                           check_rank=True):
    """Weibull or exponential proportional-hazards fit of the latency part.

    Returns
    -------
    gamma : ndarray, shape (px,)
    params : WeibullParams
        Baseline shape and scale; the exponential family fixes shape = 1.
    report : SolverReport

    Raises
    ------
    NonConvergenceError
        If the Newton solver hits its iteration cap; the best iterate is
        attached.
    """
    if family not in (Family.WEIBULL_PH, Family.EXPONENTIAL_PH):
        raise DataError(f"{family} is not a parametric latency family")
    w = validate_weights(w, data)
    pen = np.zeros(data.x.shape[1])
    if penalty is not None:
        pen = data.n * penalty.block("gamma", data.x.shape[1])
    return _fit_weibull_ph(data.time, data.event, data.x, w, family, pen,
                           init=init, check_rank=check_rank, what="latency")


def fit_cureid(data: Dataset, w, spec: ModelSpec,
               penalty: PenaltyConfig | None = None, init=None,
               workspace=None, check_rank=True):
    """Fit the cure-identification part given susceptibility weights.

    Under a stochastic time-to-cure this is the latency machinery with
    case weights 1 - w and known-cured subjects as the events. Under a
    diagnostic test it is a weighted logit fit of p_obs(q): known-cured
    subjects respond 1 with weight 1, censored subjects respond 0 with
    weight 1 - w_i, and event subjects drop out.

    Returns
    -------
    theta : ndarray
        Regression coefficients (intercept first under the logit family).
    aux : BaselineHazard or WeibullParams or None
        Baseline of the time-to-cure model; None under the logit family.
    report : SolverReport
    """
    if spec.mechanism is Mechanism.DETERMINISTIC_CUTOFF:
        raise DataError("deterministic cutoff has no cure-identification "
                        "model to fit")
    w = validate_weights(w, data)
    cure_w = 1.0 - w
    if float(cure_w.sum()) <= 0:
        raise DataError("no cure-side mass: all susceptibility weights are 1")

    if spec.mechanism is Mechanism.DIAGNOSTIC_TEST:
        X = np.column_stack([np.ones(data.n), data.q])
        r = data.known_cured.astype(float)
        pen = np.zeros(X.shape[1])
        if penalty is not None:
            pen[1:] = data.n * penalty.block("theta", data.q.shape[1])
        theta, report = _fit_weighted_logit(X, r, cure_w, pen, init=init,
                                            check_rank=check_rank,
                                            what="cure identification")
        return theta, None, report

    kc = data.known_cured
    if not np.any(kc):
        raise InsufficientCuredError(
            "no known-cured subjects: the time-to-cure model cannot be "
            "estimated (consider the crude-cure-probability or "
            "infinite-time strategies)")
    pen = np.zeros(data.q.shape[1])
    if penalty is not None:
        pen = data.n * penalty.block("theta", data.q.shape[1])
    if spec.cureid_family is Family.SEMIPARAMETRIC_PH:
        theta, base, report = _fit_cox(data.time, kc, data.q, cure_w, pen,
                                       init=init, workspace=workspace,
                                       check_rank=check_rank)
        return theta, base, report
    theta, params, report = _fit_weibull_ph(
        data.time, kc, data.q, cure_w, spec.cureid_family, pen, init=init,
        check_rank=check_rank, what="cure identification")
    return theta, params, report


def select_lambda_bic(data: Dataset, spec: ModelSpec, grid) -> PenaltyConfig:
    """Pick the LASSO penalty from a grid by BIC over full EM fits.

    BIC = -2 * observed log likelihood + df * log(n), where df counts the
    nonzero penalized coefficients. The same scalar penalty is applied to
    every penalized coefficient of every block. Ties keep the earliest
    grid point.
    """
    from .em import em_fit  # deferred: em imports this module

    grid = [float(v) for v in grid]
    if not grid:
        raise DataError("empty penalty grid")
    if any(v < 0 for v in grid):
        raise DataError("penalty grid values must be nonnegative")
    import dataclasses

    best = None
    failures = []
    logn = np.log(data.n)
    for lam in grid:
        pc = PenaltyConfig(lambda_beta=lam, lambda_gamma=lam, lambda_theta=lam)
        try:
            fit = em_fit(data, dataclasses.replace(spec, penalty=pc))
        except (SeparationError, NonConvergenceError, InsufficientCuredError,
                DegenerateRiskSetError) as exc:
            failures.append((lam, exc))
            continue
        coef = fit.coef
        penalized = np.concatenate([coef.beta[1:], coef.gamma,
                                    coef.theta[1:] if spec.mechanism is
                                    Mechanism.DIAGNOSTIC_TEST else coef.theta])
        df = int(np.count_nonzero(np.abs(penalized) > 1e-10))
        bic = -2.0 * fit.loglik_trace[-1] + df * logn
        if best is None or bic < best[0]:
            best = (bic, lam)
    if best is None:
        raise NonConvergenceError(
            "every penalty grid point failed to fit", best=failures)
    lam = best[1]
    return PenaltyConfig(lambda_beta=lam, lambda_gamma=lam, lambda_theta=lam)
