"""Command-line front end.

Subcommands: ``fit``, ``simulate``, ``replicate-study`` and
``compare-strategies``. Common flags: ``--seed``, ``--out``, ``--jobs``
and ``--config`` (a JSON file of flag defaults; explicit flags win,
unknown keys are rejected). Input data is delimited text with a header
row; the status column uses 0 = censored, 1 = event, 2 = known cured.

Exit codes: 0 success, 1 input error, 2 non-convergence or model
degeneracy (partial results are still written when available),
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import pandas as pd

from . import __version__
from .data import EMControls, Family, Mechanism, ModelSpec
from .dataio import read_dataset, write_dataset, write_delimited, write_json, write_truth
from .em import FitResult, Strategy, em_fit
from .errors import CureMixError, DataError, NonConvergenceError
from .estimators import PenaltyConfig
from .inference import bootstrap_ci, compare_strategies, flat_names, run_study
from .simgen import generate, table_scenario, verify_ordering

_MECHANISMS = {"cutoff": Mechanism.DETERMINISTIC_CUTOFF,
               "stochastic": Mechanism.STOCHASTIC_TIME,
               "diagnostic": Mechanism.DIAGNOSTIC_TEST}
_FAMILIES = {"semiparametric": Family.SEMIPARAMETRIC_PH,
             "weibull": Family.WEIBULL_PH,
             "exponential": Family.EXPONENTIAL_PH,
             "logit": Family.BERNOULLI_LOGIT}
_STRATEGIES = {s.value: s for s in Strategy}
_DEFAULT_CUREID = {"cutoff": "none", "stochastic": "weibull",
                   "diagnostic": "logit"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curemix",
        description="Mixture cure models with known-cured individuals.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of flag defaults")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel replicate workers")

    fit = sub.add_parser("fit", help="fit a model to a dataset file")
    common(fit)
    fit.add_argument("--input", required=True, help="dataset CSV")
    fit.add_argument("--mechanism", choices=sorted(_MECHANISMS), required=True)
    fit.add_argument("--latency", choices=["semiparametric", "weibull",
                                           "exponential"],
                     default="semiparametric")
    fit.add_argument("--cureid", choices=["none", "semiparametric", "weibull",
                                          "exponential", "logit"],
                     default=None, help="cure-identification family "
                     "(default depends on the mechanism)")
    fit.add_argument("--strategy", choices=sorted(_STRATEGIES), default="full")
    fit.add_argument("--bootstrap", type=int, default=0,
                     help="bootstrap resamples for CIs (0 disables)")
    fit.add_argument("--penalty-lambda", type=float, default=None,
                     help="fixed LASSO penalty on all slopes")
    fit.add_argument("--penalty-grid", default=None,
                     help="comma-separated penalty grid; picks by BIC")
    fit.add_argument("--max-iter", type=int, default=500)
    fit.add_argument("--param-tol", type=float, default=1e-6)
    fit.add_argument("--loglik-tol", type=float, default=1e-8)
    fit.set_defaults(func=cmd_fit)

    def scenario_flags(p):
        p.add_argument("--n", type=int, default=500)
        p.add_argument("--cure-rate", choices=["low", "high"], default="high")
        p.add_argument("--ordering", choices=["lower", "higher"],
                       default="lower")
        p.add_argument("--mechanism", choices=["stochastic", "diagnostic",
                                               "cutoff"],
                       default="stochastic")
        p.add_argument("--sparse", action="store_true",
                       help="zero the 2nd and 4th incidence slopes")
        p.add_argument("--target-censoring", type=float, default=0.3)
        p.add_argument("--target-known-cured", type=float, default=0.5)

    sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    common(sim)
    scenario_flags(sim)
    sim.set_defaults(func=cmd_simulate)

    def study_flags(p):
        scenario_flags(p)
        p.add_argument("--replicates", type=int, default=100)
        p.add_argument("--bootstrap", type=int, default=100)
        p.add_argument("--latency", choices=["weibull", "exponential",
                                             "semiparametric"],
                       default="weibull", help="fitted latency family")
        p.add_argument("--label", default="")

    rep = sub.add_parser("replicate-study",
                         help="run a Monte Carlo study of one scenario")
    common(rep)
    study_flags(rep)
    rep.add_argument("--strategies", default="full,ignore",
                     help="comma-separated strategies")
    rep.set_defaults(func=cmd_replicate_study)

    cmp_ = sub.add_parser("compare-strategies",
                          help="paired strategy comparison on one scenario")
    common(cmp_)
    study_flags(cmp_)
    cmp_.add_argument("--strategies", default="full,crude,infinite,ignore")
    cmp_.set_defaults(func=cmd_compare)
    return parser


def _apply_config(parser, argv):
    """Two-phase parse: config file sets defaults, flags override."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise DataError(f"config file not found: {path}")
        try:
            values = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})")
        if not isinstance(values, dict):
            raise DataError(f"{path}: config must be a JSON object")
        valid = set(vars(args))
        mapped = {}
        for key, val in values.items():
            dest = key.replace("-", "_")
            if dest not in valid or dest in ("config", "func", "command"):
                raise DataError(f"{path}: unknown config key '{key}'")
            mapped[dest] = val
        # reparse so explicit command-line flags take precedence
        sub_argv = [a for a in argv]
        for action in parser._subparsers._group_actions:
            subparser = action.choices.get(args.command)
            if subparser is not None:
                subparser.set_defaults(**mapped)
        args = parser.parse_args(sub_argv)
    return args


def _run_config(args) -> dict:
    skip = {"func", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _provenance(args) -> dict:
    cfg = _run_config(args)
    cfg["version"] = __version__
    return cfg


def _build_fit_spec(args) -> ModelSpec:
    mechanism = _MECHANISMS[args.mechanism]
    cureid = args.cureid if args.cureid is not None else _DEFAULT_CUREID[args.mechanism]
    cureid_family = None if cureid == "none" else _FAMILIES[cureid]
    penalty = None
    if args.penalty_grid:
        grid = tuple(float(v) for v in str(args.penalty_grid).split(","))
        penalty = PenaltyConfig(selection="bic", grid=grid)
    elif args.penalty_lambda is not None:
        lam = float(args.penalty_lambda)
        penalty = PenaltyConfig(lambda_beta=lam, lambda_gamma=lam,
                                lambda_theta=lam)
    em = EMControls(max_iter=args.max_iter, param_tol=args.param_tol,
                    loglik_tol=args.loglik_tol)
    return ModelSpec(mechanism=mechanism, latency_family=_FAMILIES[args.latency],
                     cureid_family=cureid_family, penalty=penalty, em=em)


def _fit_payload(fit: FitResult, provenance: dict) -> dict:
    coef = fit.coef
    names = flat_names(coef, fit.spec)
    payload = {
        "run_config": provenance,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "loglik": fit.loglik_trace[-1] if fit.loglik_trace else None,
        "loglik_trace": list(fit.loglik_trace),
        "strategy": fit.strategy.value,
        "coefficients": dict(zip(names, [float(v) for v in coef.flat()])),
        "diagnostics": {"loglik_clamps": fit.diagnostics.loglik_clamps,
                        "weight_clamps": fit.diagnostics.weight_clamps},
    }
    if coef.weibull_T is not None:
        payload["weibull_T"] = {"shape": coef.weibull_T.shape,
                                "scale": coef.weibull_T.scale}
    if coef.weibull_C is not None:
        payload["weibull_C"] = {"shape": coef.weibull_C.shape,
                                "scale": coef.weibull_C.scale}
    return payload


def _write_fit_outputs(fit: FitResult, outdir: Path, provenance: dict,
                       boot=None) -> None:
    payload = _fit_payload(fit, provenance)
    if boot is not None:
        names = boot.names
        payload["bootstrap"] = {
            "replicates_ok": int(boot.n_replicates),
            "failed_replicates": int(boot.failed_replicates),
            "ci_lower": dict(zip(names, boot.ci_lower.tolist())),
            "ci_upper": dict(zip(names, boot.ci_upper.tolist())),
        }
    write_json(outdir / "fit.json", payload)
    coef_frame = pd.DataFrame({
        "coefficient": list(payload["coefficients"]),
        "estimate": list(payload["coefficients"].values()),
    })
    if boot is not None:
        coef_frame["ci_lower"] = [payload["bootstrap"]["ci_lower"][c]
                                  for c in coef_frame["coefficient"]]
        coef_frame["ci_upper"] = [payload["bootstrap"]["ci_upper"][c]
                                  for c in coef_frame["coefficient"]]
    write_delimited(outdir / "coefficients.csv", coef_frame, provenance)
    for attr, fname in (("baseline_T", "baseline_T.csv"),
                        ("baseline_C", "baseline_C.csv")):
        base = getattr(fit.coef, attr)
        if base is not None:
            frame = pd.DataFrame({"time": base.event_times,
                                  "increment": base.increments,
                                  "cumulative": base.cumulative})
            write_delimited(outdir / fname, frame, provenance)


def cmd_fit(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    data = read_dataset(args.input)
    spec = _build_fit_spec(args)
    strategy = _STRATEGIES[args.strategy]
    provenance = _provenance(args)
    try:
        fit = em_fit(data, spec, strategy)
    except NonConvergenceError as exc:
        if isinstance(exc.best, FitResult):
            _write_fit_outputs(exc.best, outdir, provenance)
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 2
    boot = None
    if args.bootstrap:
        boot = bootstrap_ci(data, spec, strategy, B=args.bootstrap,
                            seed=args.seed, point=fit)
    _write_fit_outputs(fit, outdir, provenance, boot=boot)
    print(f"fit written to {outdir} (converged={fit.converged}, "
          f"iterations={fit.iterations})")
    return 0 if fit.converged else 2


def _scenario_from_args(args):
    return table_scenario(cure_rate=args.cure_rate, ordering=args.ordering,
                          n=args.n, seed=args.seed, mechanism=args.mechanism,
                          sparse=args.sparse,
                          target_known_cured=args.target_known_cured,
                          target_censoring=args.target_censoring)


def cmd_simulate(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    scenario = _scenario_from_args(args)
    gen = generate(scenario)
    provenance = _provenance(args)
    write_dataset(outdir / "dataset.csv", gen.dataset, provenance)
    write_truth(outdir / "truth.csv", gen.truth, provenance)
    summary = {"run_config": provenance,
               "realized": gen.realized,
               "censor_rate": gen.censor_rate,
               "cure_params": _cure_params_dict(gen.cure_params)}
    if args.mechanism == "stochastic":
        from .data import WeibullParams
        verify_ordering(WeibullParams(gen.cure_params.shape,
                                      gen.cure_params.scale),
                        scenario.baseline_T, scenario.ordering)
        summary["dominance_check"] = "passed"
    write_json(outdir / "summary.json", summary)
    print(f"dataset written to {outdir} "
          f"(cure rate {gen.realized['cure_rate']:.3f}, "
          f"censoring {gen.realized['censoring_rate']:.3f})")
    return 0


def _cure_params_dict(cure) -> dict:
    out = {"kind": type(cure).__name__}
    for key, val in vars(cure).items():
        out[key] = list(val) if isinstance(val, tuple) else val
    return out


def _study_spec(args):
    scenario = _scenario_from_args(args)
    from .inference import default_fit_spec
    spec = default_fit_spec(scenario)
    if args.latency != "weibull":
        import dataclasses
        spec = dataclasses.replace(spec,
                                   latency_family=_FAMILIES[args.latency])
    return scenario, spec


def _parse_strategies(raw: str):
    names = [s.strip() for s in str(raw).split(",") if s.strip()]
    try:
        return [_STRATEGIES[name] for name in names]
    except KeyError as exc:
        raise DataError(f"unknown strategy {exc}; choose from "
                        f"{sorted(_STRATEGIES)}")


def _write_study_outputs(report, outdir: Path, provenance: dict) -> None:
    write_delimited(outdir / "report.csv", report.to_frame(), provenance)
    write_delimited(outdir / "long.csv", report.long_frame(), provenance)
    payload = report.to_json_dict()
    payload["run_config"] = provenance
    write_json(outdir / "report.json", payload)


def cmd_replicate_study(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    scenario, spec = _study_spec(args)
    strategies = _parse_strategies(args.strategies)
    report = run_study(scenario, replicates=args.replicates, seed=args.seed,
                       strategies=strategies, B=args.bootstrap,
                       jobs=args.jobs, spec=spec, label=args.label)
    _write_study_outputs(report, outdir, _provenance(args))
    print(f"study report written to {outdir} "
          f"({args.replicates} replicates, strategies "
          f"{[s.value for s in strategies]})")
    return 0


def cmd_compare(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    scenario, spec = _study_spec(args)
    strategies = _parse_strategies(args.strategies)
    report = compare_strategies(scenario, strategies,
                                replicates=args.replicates, seed=args.seed,
                                B=args.bootstrap, jobs=args.jobs, spec=spec,
                                label=args.label)
    _write_study_outputs(report, outdir, _provenance(args))
    print(f"comparison written to {outdir}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv if argv is not None else sys.argv[1:])
        return args.func(args)
    except DataError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 2
    except CureMixError as exc:
        print(f"model error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
