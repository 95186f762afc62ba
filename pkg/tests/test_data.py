import numpy as np
import pytest

from curemix import (BaselineHazard, DataError, Dataset, EMControls, Family,
                     Mechanism, ModelSpec, Status, SubjectRecord,
                     WeibullParams, validate_weights)


def test_dataset_basic():
    d = Dataset(time=[1.0, 2.0], status=[1, 0], x=[[0.5], [1.0]])
    assert d.n == 2
    assert d.event.tolist() == [True, False]
    assert d.x.shape == (2, 1)
    assert d.z.shape == (2, 0)


def test_dataset_rejects_negative_time():
    with pytest.raises(DataError):
        Dataset(time=[-1.0, 2.0], status=[1, 0])


def test_dataset_rejects_nonfinite_time():
    with pytest.raises(DataError):
        Dataset(time=[np.inf, 2.0], status=[1, 0])


def test_dataset_requires_an_event():
    with pytest.raises(DataError):
        Dataset(time=[1.0, 2.0], status=[0, 2])


def test_dataset_rejects_bad_status():
    with pytest.raises(DataError):
        Dataset(time=[1.0], status=[3])


def test_from_subjects_checks_dimensions():
    subs = [SubjectRecord(1.0, Status.EVENT, x=(1.0,)),
            SubjectRecord(2.0, Status.CENSORED, x=(1.0, 2.0))]
    with pytest.raises(DataError):
        Dataset.from_subjects(subs)
    subs = [SubjectRecord(1.0, Status.EVENT, x=(1.0,), z=(0.0,)),
            SubjectRecord(2.0, Status.CENSORED, x=(2.0,), z=(1.0,))]
    d = Dataset.from_subjects(subs)
    assert d.n == 2 and d.x[1, 0] == 2.0


def test_modelspec_mechanism_family_coupling():
    ModelSpec(Mechanism.DETERMINISTIC_CUTOFF, Family.WEIBULL_PH)
    with pytest.raises(DataError):
        ModelSpec(Mechanism.DETERMINISTIC_CUTOFF, Family.WEIBULL_PH,
                  Family.WEIBULL_PH)
    with pytest.raises(DataError):
        ModelSpec(Mechanism.DIAGNOSTIC_TEST, Family.WEIBULL_PH,
                  Family.WEIBULL_PH)
    with pytest.raises(DataError):
        ModelSpec(Mechanism.STOCHASTIC_TIME, Family.WEIBULL_PH,
                  Family.BERNOULLI_LOGIT)
    with pytest.raises(DataError):
        ModelSpec(Mechanism.STOCHASTIC_TIME, Family.BERNOULLI_LOGIT,
                  Family.WEIBULL_PH)


def test_em_controls_positive():
    with pytest.raises(DataError):
        EMControls(max_iter=0)
    with pytest.raises(DataError):
        EMControls(param_tol=0.0)


def test_weibull_params_positive():
    with pytest.raises(DataError):
        WeibullParams(0.0, 1.0)
    assert WeibullParams(1.0, 4.0).rate == 0.25


def test_baseline_hazard_step_lookup():
    base = BaselineHazard([1.0, 2.0, 4.0], [0.1, 0.2, 0.3])
    assert base.cum_hazard(0.5) == 0.0
    assert base.cum_hazard(1.0) == pytest.approx(0.1)
    assert base.cum_hazard(3.9) == pytest.approx(0.3)
    assert base.cum_hazard(10.0) == pytest.approx(0.6)
    assert base.increment_at(2.0) == pytest.approx(0.2)
    assert base.increment_at(2.5) == 0.0
    assert base.final_time == 4.0
    # nondecreasing right-continuous steps
    grid = np.linspace(0, 5, 101)
    vals = base.cum_hazard(grid)
    assert np.all(np.diff(vals) >= 0)


def test_baseline_hazard_rejects_unsorted():
    with pytest.raises(DataError):
        BaselineHazard([2.0, 1.0], [0.1, 0.1])
    with pytest.raises(DataError):
        BaselineHazard([1.0, 2.0], [0.1, -0.1])


def test_validate_weights_pinning():
    d = Dataset(time=[1.0, 2.0, 3.0], status=[1, 0, 2])
    validate_weights([1.0, 0.4, 0.0], d)
    with pytest.raises(DataError):
        validate_weights([0.9, 0.4, 0.0], d)
    with pytest.raises(DataError):
        validate_weights([1.0, 0.4, 0.1], d)
    with pytest.raises(DataError):
        validate_weights([1.0, 1.4, 0.0], d)
    # unpinned form only checks bounds
    validate_weights([0.9, 0.4, 0.1], d, pinned=False)
