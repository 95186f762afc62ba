"""Bootstrap confidence intervals and the simulation-study harness.

Replicate r of a study uses an RNG stream derived from (seed, r), and
bootstrap resample b inside it a stream derived from (seed, r, b), so
generated datasets and resample indices are identical across strategies
(paired comparisons) and independent of execution order or parallelism.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .data import Coefficients, Dataset, EMControls, Family, Mechanism, ModelSpec
from .em import FitResult, Strategy, em_fit
from .errors import BootstrapDegenerateError, CureMixError, DataError
from .simgen import (CutoffCureId, DiagnosticCureId, ScenarioConfig,
                     StochasticCureId, generate)

#: Coefficients scored against the scenario truth in study reports.
SCORED_COEFFICIENTS = ("beta0", "beta1", "beta2", "beta3", "beta4",
                       "gamma1", "gamma2", "gamma3", "gamma4")


def flat_names(coef: Coefficients, spec: ModelSpec) -> list[str]:
    """Names aligned with ``Coefficients.flat()``."""
    names = [f"beta{i}" for i in range(coef.beta.size)]
    names += [f"gamma{j + 1}" for j in range(coef.gamma.size)]
    if spec.mechanism is Mechanism.DIAGNOSTIC_TEST:
        names += [f"theta{i}" for i in range(coef.theta.size)]
    else:
        names += [f"theta{j + 1}" for j in range(coef.theta.size)]
    return names


@dataclass
class BootstrapResult:
    """Point fit plus percentile CIs over case-resampled refits."""

    point: FitResult
    names: list
    replicates: np.ndarray        # (B_ok, n_coef) successful refit coefficients
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    failed_replicates: int

    @property
    def n_replicates(self) -> int:
        return self.replicates.shape[0]


def bootstrap_ci(data: Dataset, spec: ModelSpec, strategy: Strategy,
                 B: int, seed: int, point: FitResult | None = None,
                 warm_start: bool = True) -> BootstrapResult:
    """Nonparametric case-resampling bootstrap with percentile intervals.

    Resamples of size n are drawn with replacement; each is refit by EM
    (warm started at the point estimate by default). Replicates that fail
    with a model error are counted and excluded from the percentiles; if
    more than half fail, BootstrapDegenerateError is raised.
    """
    if B < 2:
        raise DataError("bootstrap needs B >= 2")
    if point is None:
        point = em_fit(data, spec, strategy)
    init = point.coef if warm_start else None
    n = data.n
    rows = []
    failed = 0
    for b in range(B):
        rng = np.random.default_rng(np.random.SeedSequence((seed, b)))
        idx = rng.integers(0, n, size=n)
        try:
            sub = data.subset(idx)
            fit = em_fit(sub, spec, strategy, init=init)
        except CureMixError:
            failed += 1
            continue
        rows.append(fit.coef.flat())
    if failed > B / 2:
        raise BootstrapDegenerateError(
            f"{failed} of {B} bootstrap replicates failed")
    reps = np.asarray(rows)
    lo = np.percentile(reps, 2.5, axis=0)
    hi = np.percentile(reps, 97.5, axis=0)
    return BootstrapResult(point=point, names=flat_names(point.coef, point.spec),
                           replicates=reps, ci_lower=lo, ci_upper=hi,
                           failed_replicates=failed)


@dataclass
class StudyReport:
    """Aggregated simulation-study results.

    ``rows`` hold one record per strategy and scored coefficient with the
    truth, mean estimate, mean CI endpoints, MSE, and coverage
    probability; ``long`` holds the per-replicate records behind them.
    """

    scenario: ScenarioConfig
    label: str
    strategies: list
    replicates: int
    bootstrap_b: int
    seed: int
    rows: list
    long: list
    failures: dict

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def long_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.long)

    def mse(self, strategy: Strategy, coefficient: str) -> float:
        for row in self.rows:
            if row["strategy"] == strategy.value and row["coefficient"] == coefficient:
                return row["mse"]
        raise KeyError((strategy, coefficient))

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "n": self.scenario.n,
            "strategies": [s.value for s in self.strategies],
            "replicates": self.replicates,
            "bootstrap_b": self.bootstrap_b,
            "seed": self.seed,
            "failures": self.failures,
            "rows": self.rows,
        }


def default_fit_spec(scenario: ScenarioConfig,
                     em: EMControls | None = None) -> ModelSpec:
    """Correctly specified parametric fit for a generated scenario."""
    em = em or EMControls()
    cure = scenario.cure_id
    if isinstance(cure, StochasticCureId):
        return ModelSpec(Mechanism.STOCHASTIC_TIME, Family.WEIBULL_PH,
                         Family.WEIBULL_PH, em=em)
    if isinstance(cure, DiagnosticCureId):
        return ModelSpec(Mechanism.DIAGNOSTIC_TEST, Family.WEIBULL_PH,
                         Family.BERNOULLI_LOGIT, em=em)
    if isinstance(cure, CutoffCureId):
        return ModelSpec(Mechanism.DETERMINISTIC_CUTOFF, Family.WEIBULL_PH,
                         None, em=em)
    raise DataError(f"unknown cure-identification truth: {cure!r}")


def _replicate_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence((seed, r)).generate_state(1)[0])


def _scored_values(fit: FitResult) -> dict:
    vals = {}
    for i, v in enumerate(fit.coef.beta):
        vals[f"beta{i}"] = float(v)
    for j, v in enumerate(fit.coef.gamma):
        vals[f"gamma{j + 1}"] = float(v)
    return vals


def _study_replicate(payload) -> dict:
    scenario, spec, strategies, seed, r, B = payload
    config = dataclasses.replace(scenario, seed=_replicate_seed(seed, r))
    gen = generate(config)
    out = {"replicate": r, "results": {}}
    for strategy in strategies:
        rec = {"ok": False, "error": None, "estimate": None,
               "lo": None, "hi": None}
        point = None
        try:
            point = em_fit(gen.dataset, spec, strategy)
            rec["ok"] = True
        except CureMixError as exc:
            # keep the runaway estimate: blown-up fits are data, not gaps
            rec["error"] = f"{type(exc).__name__}: {exc}"
            if isinstance(exc.partial, FitResult):
                point = exc.partial
        if point is None:
            out["results"][strategy.value] = rec
            continue
        rec["estimate"] = _scored_values(point)
        rec["lo"] = {k: float("nan") for k in rec["estimate"]}
        rec["hi"] = {k: float("nan") for k in rec["estimate"]}
        if rec["ok"]:
            try:
                boot = bootstrap_ci(gen.dataset, spec, strategy, B,
                                    seed=_replicate_seed(seed, r) + 1,
                                    point=point)
                names = boot.names
                rec["lo"] = {k: float(boot.ci_lower[names.index(k)])
                             for k in rec["estimate"]}
                rec["hi"] = {k: float(boot.ci_upper[names.index(k)])
                             for k in rec["estimate"]}
            except CureMixError as exc:
                rec["error"] = f"bootstrap: {type(exc).__name__}: {exc}"
        out["results"][strategy.value] = rec
    return out


def run_study(scenario: ScenarioConfig, replicates: int, seed: int,
              strategies=(Strategy.FULL_INFORMATION,), B: int = 100,
              jobs: int = 1, spec: ModelSpec | None = None,
              label: str = "") -> StudyReport:
    """Monte Carlo study: generate, fit per strategy, bootstrap, aggregate.

    Every requested strategy sees the same generated dataset per
    replicate and the same resample indices, so comparisons are paired.
    Replicate failures are recorded per strategy, not fatal; a failed fit
    that left a partial iterate (a runaway stopped by the separation
    guard) still contributes its estimate to the MSE aggregation, since
    blown-up estimates are the phenomenon the report measures. Coverage
    uses only replicates with a successful bootstrap.
    """
    if replicates < 1:
        raise DataError("replicates must be at least 1")
    strategies = list(strategies)
    spec = spec or default_fit_spec(scenario)
    payloads = [(scenario, spec, strategies, seed, r, B)
                for r in range(replicates)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_study_replicate, payloads))
    else:
        results = [_study_replicate(p) for p in payloads]

    truth = {f"beta{i}": float(v) for i, v in enumerate(scenario.beta_true)}
    truth.update({f"gamma{j + 1}": float(v)
                  for j, v in enumerate(scenario.gamma_true)})

    long = []
    failures = {s.value: 0 for s in strategies}
    for res in results:
        for strategy in strategies:
            rec = res["results"][strategy.value]
            if not rec["ok"]:
                failures[strategy.value] += 1
            if rec["estimate"] is None:
                continue
            for coef in SCORED_COEFFICIENTS:
                long.append({
                    "replicate": res["replicate"],
                    "strategy": strategy.value,
                    "coefficient": coef,
                    "truth": truth[coef],
                    "estimate": rec["estimate"][coef],
                    "ci_lower": rec["lo"][coef],
                    "ci_upper": rec["hi"][coef],
                    "converged_fit": rec["ok"],
                })

    rows = []
    for strategy in strategies:
        for coef in SCORED_COEFFICIENTS:
            recs = [r for r in long
                    if r["strategy"] == strategy.value and r["coefficient"] == coef]
            if not recs:
                continue
            est = np.array([r["estimate"] for r in recs])
            lo = np.array([r["ci_lower"] for r in recs])
            hi = np.array([r["ci_upper"] for r in recs])
            t = truth[coef]
            with_ci = np.isfinite(lo) & np.isfinite(hi)
            cp = (float(np.mean((lo[with_ci] <= t) & (t <= hi[with_ci]))) * 100.0
                  if np.any(with_ci) else float("nan"))
            rows.append({
                "strategy": strategy.value,
                "coefficient": coef,
                "truth": t,
                "mean_estimate": float(est.mean()),
                "mean_ci_lower": float(lo[with_ci].mean()) if np.any(with_ci) else float("nan"),
                "mean_ci_upper": float(hi[with_ci].mean()) if np.any(with_ci) else float("nan"),
                "mse": float(np.mean((est - t) ** 2)),
                "cp": cp,
                "n_ok": int(sum(1 for r in recs if r["converged_fit"])),
                "n_failed": failures[strategy.value],
            })
    return StudyReport(scenario=scenario, label=label or f"n={scenario.n}",
                       strategies=strategies, replicates=replicates,
                       bootstrap_b=B, seed=seed, rows=rows, long=long,
                       failures=failures)


def compare_strategies(scenario: ScenarioConfig, strategies, replicates: int,
                       seed: int, B: int = 100, jobs: int = 1,
                       spec: ModelSpec | None = None,
                       label: str = "") -> StudyReport:
    """Paired comparison of two or more strategies on shared datasets."""
    strategies = list(strategies)
    if len(strategies) < 2:
        raise DataError("compare_strategies needs at least 2 strategies")
    return run_study(scenario, replicates, seed, strategies=strategies, B=B,
                     jobs=jobs, spec=spec, label=label)
