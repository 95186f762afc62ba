import dataclasses

import numpy as np
import pytest

from curemix import (CalibrationError, DataError, Ordering, OrderingError,
                     ScenarioConfig, WeibullParams, calibrate_censoring,
                     generate, make_ordering_params, table_scenario,
                     verify_ordering)
from curemix.simgen import StochasticCureId, _LatentDraw


def test_scenario_config_validation():
    with pytest.raises(DataError):
        table_scenario("medium")
    with pytest.raises(DataError):
        ScenarioConfig(n=0, beta_true=(2, 1, 2, 1, 0.5),
                       gamma_true=(0.9, 1, 4, 2))
    with pytest.raises(DataError):
        ScenarioConfig(n=10, beta_true=(2, 1, 2, 1),
                       gamma_true=(0.9, 1, 4, 2))
    with pytest.raises(DataError):
        ScenarioConfig(n=10, beta_true=(2, 1, 2, 1, 0.5),
                       gamma_true=(0.9, 1, 4, 2), target_censoring=1.5)


def test_make_ordering_params_dominance():
    base = WeibullParams(1.5, 1.0)
    lower = make_ordering_params(Ordering.CURE_LOWER, base)
    higher = make_ordering_params(Ordering.CURE_HIGHER, base)
    assert lower.scale < base.scale < higher.scale
    verify_ordering(lower, base, Ordering.CURE_LOWER)
    verify_ordering(higher, base, Ordering.CURE_HIGHER)
    with pytest.raises(OrderingError):
        verify_ordering(base, base, Ordering.CURE_LOWER)
    with pytest.raises(OrderingError):
        verify_ordering(lower, base, Ordering.CURE_HIGHER)


def test_generate_low_cure_rate_band():
    sc = table_scenario("low", "lower", n=500, seed=3)
    gen = generate(sc)
    assert abs(gen.realized["cure_rate"] - 0.10) <= 0.04


def test_generate_high_cure_rate_band():
    sc = table_scenario("high", "lower", n=500, seed=3)
    gen = generate(sc)
    assert abs(gen.realized["cure_rate"] - 0.30) <= 0.05


def test_generate_degenerate_incidence():
    sc = ScenarioConfig(n=300, beta_true=(50, 1, 2, 1, 0.5),
                        gamma_true=(0.9, 1, 4, 2),
                        cure_id=StochasticCureId(),
                        ordering=Ordering.CURE_LOWER,
                        target_censoring=0.3, target_known_cured=None, seed=1)
    gen = generate(sc)
    assert gen.realized["cure_rate"] == 0.0
    assert np.all(np.isin(gen.dataset.status, (0, 1)))


def test_generate_status_consistency():
    for mech in ("stochastic", "diagnostic", "cutoff"):
        sc = table_scenario("high", "lower" if mech == "stochastic" else None,
                            n=400, seed=11, mechanism=mech)
        gen = generate(sc)
        d, tr = gen.dataset, gen.truth
        y = tr["y"].astype(bool)
        ev, kc, cen = d.event, d.known_cured, d.censored
        assert np.all(y[ev])
        assert np.all(tr["t_event"][ev] <= tr["censor_time"][ev] + 1e-12)
        assert np.all(~y[kc])
        assert np.all(tr["t_cure"][kc] <= tr["censor_time"][kc] + 1e-12)
        # censored: the applicable latent time exceeds the censor time
        lat = np.where(y, tr["t_event"], tr["t_cure"])
        assert np.all(lat[cen] >= tr["censor_time"][cen] - 1e-12)
        assert np.all(d.time[cen] == tr["censor_time"][cen])


def test_generate_deterministic():
    sc = table_scenario("high", "lower", n=200, seed=21)
    g1, g2 = generate(sc), generate(sc)
    assert np.array_equal(g1.dataset.time, g2.dataset.time)
    assert np.array_equal(g1.dataset.status, g2.dataset.status)
    assert np.array_equal(g1.dataset.x, g2.dataset.x)
    assert g1.censor_rate == g2.censor_rate


def test_generate_covariate_moments():
    sc = table_scenario("high", "lower", n=1000, seed=2)
    d = generate(sc).dataset
    binaries = [d.z[:, 1], d.z[:, 3], d.x[:, 2]]
    for col in binaries:
        assert set(np.unique(col)) <= {0.0, 1.0}
        assert abs(col.mean() - 0.5) <= 0.05
    for col in (d.z[:, 0], d.z[:, 2], d.x[:, 3]):
        assert abs(col.mean()) <= 0.1
    # q carries the shared continuous + shared binary pair
    assert np.array_equal(d.q[:, 0], d.z[:, 2])
    assert np.array_equal(d.q[:, 1], d.z[:, 3])
    assert np.array_equal(d.x[:, 0], d.z[:, 2])
    assert np.array_equal(d.x[:, 1], d.z[:, 3])


def test_calibrate_censoring_targets():
    sc = dataclasses.replace(table_scenario("high", "lower", n=200, seed=5),
                             target_censoring=0.3)
    rate = calibrate_censoring(sc)
    # realized censoring on a fresh evaluation draw stays within a point
    fresh = _LatentDraw(sc, 20_000,
                        np.random.SeedSequence(entropy=sc.seed,
                                               spawn_key=(999,)))
    assert abs(fresh.censoring_fraction(rate) - 0.3) < 0.01

    zero = dataclasses.replace(sc, target_censoring=0.0)
    rate0 = calibrate_censoring(zero)
    assert fresh.censoring_fraction(rate0) < 0.01

    lo = calibrate_censoring(dataclasses.replace(sc, target_censoring=0.15))
    hi = calibrate_censoring(dataclasses.replace(sc, target_censoring=0.45))
    assert hi > lo > rate0


def test_calibrate_censoring_needs_draws():
    sc = table_scenario("high", "lower", n=200, seed=5)
    with pytest.raises(DataError):
        calibrate_censoring(sc, mc_draws=500)


def test_calibrate_censoring_unreachable():
    # diagnostic mechanism: cured subjects stay censored with prob 1-p_obs,
    # so targets below that floor are unreachable
    sc = table_scenario("high", None, n=200, seed=5, mechanism="diagnostic",
                        target_known_cured=0.1, target_censoring=0.01)
    with pytest.raises(CalibrationError):
        calibrate_censoring(sc)


def test_generate_known_cured_calibration():
    sc = table_scenario("high", "lower", n=4000, seed=9)
    gen = generate(sc)
    assert abs(gen.realized["known_cured_rate"] - 0.5) < 0.08


def test_generate_cutoff_mechanism():
    sc = table_scenario("high", None, n=300, seed=13, mechanism="cutoff",
                        target_known_cured=None)
    gen = generate(sc)
    d = gen.dataset
    cutoff = gen.cure_params.cutoff
    assert np.all(d.time[d.event] < cutoff)
    assert np.all(d.time[d.known_cured] == cutoff)
    assert np.all(d.time[d.censored] <= cutoff + 1e-12)
