import numpy as np
import pytest

from curemix import Dataset, EMControls, Family, Mechanism, ModelSpec


def toy_dataset(n=60, seed=0, pz=1, px=1, pq=1, cure_frac=0.25, ident_frac=0.5):
    """Small mixed dataset with all three statuses, arbitrary but fixed."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, pz))
    x = rng.standard_normal((n, px))
    q = rng.standard_normal((n, pq))
    y = rng.uniform(size=n) > cure_frac
    t_event = rng.exponential(1.0, n) * np.exp(-0.5 * x[:, 0])
    t_cure = 0.5 * rng.exponential(1.0, n)
    c = rng.exponential(2.0, n)
    time = np.where(y, np.minimum(t_event, c), np.minimum(t_cure, c))
    status = np.zeros(n, dtype=int)
    status[y & (t_event <= c)] = 1
    ident = rng.uniform(size=n) < ident_frac
    status[~y & (t_cure <= c) & ident] = 2
    time[~y & ~((t_cure <= c) & ident)] = c[~y & ~((t_cure <= c) & ident)]
    if not np.any(status == 1):
        status[0] = 1
    return Dataset(time, status, x=x, z=z, q=q)


@pytest.fixture
def diag_spec():
    return ModelSpec(Mechanism.DIAGNOSTIC_TEST, Family.EXPONENTIAL_PH,
                     Family.BERNOULLI_LOGIT)


@pytest.fixture
def stoch_spec():
    return ModelSpec(Mechanism.STOCHASTIC_TIME, Family.WEIBULL_PH,
                     Family.WEIBULL_PH)


@pytest.fixture
def cutoff_spec():
    return ModelSpec(Mechanism.DETERMINISTIC_CUTOFF, Family.SEMIPARAMETRIC_PH)


def fast_em(**kw):
    defaults = dict(max_iter=200, param_tol=1e-6, loglik_tol=1e-8)
    defaults.update(kw)
    return EMControls(**defaults)
