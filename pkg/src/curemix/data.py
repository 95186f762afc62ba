"""Domain types for mixture cure models with known-cured individuals.

A subject is observed in one of three states: the event occurred
(susceptible, uncensored), the subject was positively identified as cured
(known cured), or follow-up ended first (censored, cure status unknown).
Three covariate vectors enter the model: ``z`` drives the probability of
being susceptible (incidence), ``x`` drives the time to event among the
susceptible (latency), and ``q`` drives the time to cure identification
among the cured.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from .errors import DataError


class Status(IntEnum):
    """Observed subject state; integer values match the on-disk encoding."""

    CENSORED = 0
    EVENT = 1
    KNOWN_CURED = 2


class Mechanism(Enum):
    """How cured subjects can become identified as cured."""

    DETERMINISTIC_CUTOFF = "cutoff"
    STOCHASTIC_TIME = "stochastic"
    DIAGNOSTIC_TEST = "diagnostic"


class Family(Enum):
    """Distribution family for the latency or cure-identification part."""

    SEMIPARAMETRIC_PH = "semiparametric"
    WEIBULL_PH = "weibull"
    EXPONENTIAL_PH = "exponential"
    BERNOULLI_LOGIT = "logit"


#: Families usable for the time-to-cure model under a stochastic mechanism.
TIME_FAMILIES = (Family.SEMIPARAMETRIC_PH, Family.WEIBULL_PH, Family.EXPONENTIAL_PH)


@dataclass(frozen=True)
class SubjectRecord:
    """One observation: follow-up time, state, and the three covariate vectors."""

    time: float
    status: Status
    x: tuple[float, ...] = ()
    z: tuple[float, ...] = ()
    q: tuple[float, ...] = ()


class Dataset:
    """Columnar view of a sample of independent subjects.

    Parameters
    ----------
    time : array_like, shape (n,)
        Nonnegative, finite follow-up times.
    status : array_like, shape (n,)
        Per-subject :class:`Status` (or its integer encoding 0/1/2).
    x, z, q : array_like, shape (n, px) / (n, pz) / (n, pq)
        Latency, incidence, and cure-identification covariates. ``z`` and
        ``q`` exclude the constant column; intercepts live in the
        coefficient vectors.
    x_names, z_names, q_names : sequence of str, optional
        Column names; defaults are ``x1..``, ``z1..``, ``q1..``.
    """

    def __init__(self, time, status, x=None, z=None, q=None,
                 x_names=None, z_names=None, q_names=None):
        self.time = np.atleast_1d(np.asarray(time, dtype=float))
        status = np.atleast_1d(np.asarray(status))
        n = self.time.shape[0]
        if status.shape != (n,):
            raise DataError(f"status has shape {status.shape}, expected ({n},)")
        if not np.all(np.isin(status, (0, 1, 2))):
            raise DataError("status values must be 0 (censored), 1 (event) or "
                            "2 (known cured)")
        self.status = status.astype(np.int64)
        if not np.all(np.isfinite(self.time)):
            raise DataError("times must be finite")
        if np.any(self.time < 0):
            raise DataError("times must be nonnegative")
        if not np.any(self.status == Status.EVENT):
            raise DataError("dataset needs at least one event subject for "
                            "latency estimation")

        self.x = _as_matrix(x, n, "x")
        self.z = _as_matrix(z, n, "z")
        self.q = _as_matrix(q, n, "q")
        self.x_names = _names(x_names, self.x.shape[1], "x")
        self.z_names = _names(z_names, self.z.shape[1], "z")
        self.q_names = _names(q_names, self.q.shape[1], "q")
        for arr in (self.time, self.status, self.x, self.z, self.q):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.time.shape[0]

    @property
    def event(self) -> np.ndarray:
        return self.status == Status.EVENT

    @property
    def known_cured(self) -> np.ndarray:
        return self.status == Status.KNOWN_CURED

    @property
    def censored(self) -> np.ndarray:
        return self.status == Status.CENSORED

    @classmethod
    def from_subjects(cls, subjects, x_names=None, z_names=None, q_names=None):
        """Build a Dataset from an ordered list of :class:`SubjectRecord`."""
        subjects = list(subjects)
        if not subjects:
            raise DataError("empty subject list")
        for name in ("x", "z", "q"):
            dims = {len(getattr(s, name)) for s in subjects}
            if len(dims) > 1:
                raise DataError(f"subjects disagree on {name} dimension: {sorted(dims)}")
        return cls(
            time=[s.time for s in subjects],
            status=[s.status for s in subjects],
            x=[s.x for s in subjects],
            z=[s.z for s in subjects],
            q=[s.q for s in subjects],
            x_names=x_names, z_names=z_names, q_names=q_names,
        )

    def subset(self, idx) -> "Dataset":
        """Row subset (used for bootstrap resampling); copies arrays."""
        return Dataset(
            self.time[idx].copy(), self.status[idx].copy(),
            self.x[idx].copy(), self.z[idx].copy(), self.q[idx].copy(),
            self.x_names, self.z_names, self.q_names,
        )

    def replace(self, **kw) -> "Dataset":
        """Copy of the dataset with selected columns replaced."""
        args = dict(time=self.time, status=self.status, x=self.x, z=self.z,
                    q=self.q, x_names=self.x_names, z_names=self.z_names,
                    q_names=self.q_names)
        args.update(kw)
        return Dataset(**args)

    def __len__(self) -> int:
        return self.n


def _as_matrix(a, n, name):
    if a is None:
        return np.zeros((n, 0))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(n, -1) if a.size == n else a.reshape(n, 0)
    if a.ndim != 2 or a.shape[0] != n:
        raise DataError(f"{name} has shape {a.shape}, expected ({n}, p)")
    if a.size and not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains non-finite values")
    return a


def _names(names, p, prefix):
    if names is None:
        return tuple(f"{prefix}{j + 1}" for j in range(p))
    names = tuple(names)
    if len(names) != p:
        raise DataError(f"{prefix}_names has {len(names)} entries for {p} columns")
    return names


@dataclass(frozen=True)
class EMControls:
    """Outer EM stopping rule."""

    max_iter: int = 500
    param_tol: float = 1e-6
    loglik_tol: float = 1e-8

    def __post_init__(self):
        if self.max_iter < 1 or self.param_tol <= 0 or self.loglik_tol <= 0:
            raise DataError("EM controls must be positive")


@dataclass(frozen=True)
class ModelSpec:
    """Model configuration: mechanism, families, penalty, EM controls.

    The cure-identification family is tied to the mechanism: a
    deterministic cutoff needs no time-to-cure model, a diagnostic test
    uses a Bernoulli/logit model, and a stochastic time-to-cure uses one
    of the survival families.
    """

    mechanism: Mechanism
    latency_family: Family = Family.SEMIPARAMETRIC_PH
    cureid_family: Family | None = None
    penalty: "object | None" = None  # PenaltyConfig; kept loose to avoid an import cycle
    em: EMControls = field(default_factory=EMControls)

    def __post_init__(self):
        if self.latency_family not in TIME_FAMILIES:
            raise DataError(f"latency family {self.latency_family} is not a "
                            "survival family")
        m, c = self.mechanism, self.cureid_family
        if m is Mechanism.DETERMINISTIC_CUTOFF and c is not None:
            raise DataError("deterministic cutoff takes no cure-identification "
                            "model (cureid_family must be None)")
        if m is Mechanism.DIAGNOSTIC_TEST and c is not Family.BERNOULLI_LOGIT:
            raise DataError("diagnostic-test mechanism requires the "
                            "Bernoulli/logit cure-identification family")
        if m is Mechanism.STOCHASTIC_TIME and c not in TIME_FAMILIES:
            raise DataError("stochastic time-to-cure requires a survival "
                            "cure-identification family")


@dataclass(frozen=True)
class WeibullParams:
    """Weibull baseline: S0(t) = exp(-(t/scale)^shape). shape=1 is exponential."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DataError("Weibull shape and scale must be positive")

    @property
    def rate(self) -> float:
        """Hazard rate of the exponential special case (1/scale)."""
        return 1.0 / self.scale


class BaselineHazard:
    """Step-function cumulative baseline hazard (Breslow / Nelson-Aalen type).

    Right continuous, zero before the first event time; the jump at each
    event time is a nonnegative increment.
    """

    def __init__(self, event_times, increments):
        t = np.asarray(event_times, dtype=float)
        d = np.asarray(increments, dtype=float)
        if t.shape != d.shape or t.ndim != 1:
            raise DataError("event_times and increments must be 1-d and aligned")
        if t.size:
            if np.any(t <= 0) or np.any(np.diff(t) <= 0):
                raise DataError("event times must be positive and strictly increasing")
            if np.any(d < 0):
                raise DataError("hazard increments must be nonnegative")
        self.event_times = t
        self.increments = d
        self.cumulative = np.cumsum(d)
        for arr in (self.event_times, self.increments, self.cumulative):
            arr.setflags(write=False)

    @property
    def final_time(self) -> float:
        """Largest event time (inf when there are no events)."""
        return float(self.event_times[-1]) if self.event_times.size else np.inf

    def cum_hazard(self, t):
        """Cumulative hazard at time(s) t (right-continuous lookup)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.event_times, t, side="right")
        out = np.where(idx > 0, self.cumulative[np.maximum(idx - 1, 0)], 0.0)
        return out if out.ndim else float(out)

    def increment_at(self, t):
        """Hazard jump exactly at time(s) t; zero off the event grid."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.event_times, t)
        idx_c = np.minimum(idx, max(self.event_times.size - 1, 0))
        if self.event_times.size == 0:
            out = np.zeros_like(t)
        else:
            hit = self.event_times[idx_c] == t
            out = np.where(hit, self.increments[idx_c], 0.0)
        return out if out.ndim else float(out)


@dataclass
class Coefficients:
    """Fitted parameters for the three model parts.

    ``beta`` carries the incidence intercept in position 0; ``theta``
    carries an intercept only under the Bernoulli/logit family. Exactly
    one of the baseline/Weibull fields is populated per survival part,
    matching the family in the :class:`ModelSpec`.
    """

    beta: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    baseline_T: BaselineHazard | None = None
    baseline_C: BaselineHazard | None = None
    weibull_T: WeibullParams | None = None
    weibull_C: WeibullParams | None = None

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)

    def flat(self) -> np.ndarray:
        """Regression coefficients (beta, gamma, theta) as one vector."""
        return np.concatenate([self.beta, self.gamma, self.theta])


def validate_weights(w, data: Dataset, pinned: bool = True) -> np.ndarray:
    """Check susceptibility weights against the dataset.

    Weights live in [0, 1]. When ``pinned`` (the EM invariant, relied on
    by the survival fitters' event terms) they are exactly 1 on event
    subjects and exactly 0 on known-cured subjects.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (data.n,):
        raise DataError(f"weight vector has shape {w.shape}, expected ({data.n},)")
    if np.any(w < 0) or np.any(w > 1) or not np.all(np.isfinite(w)):
        raise DataError("weights must lie in [0, 1]")
    if pinned:
        if not np.all(w[data.event] == 1.0):
            raise DataError("event subjects must carry weight exactly 1")
        if not np.all(w[data.known_cured] == 0.0):
            raise DataError("known-cured subjects must carry weight exactly 0")
    return w
