"""Command-line entry point: ``abmode <command> [options]``.

Exit codes: 0 success, 1 estimation or raking did not converge, 2 input
error, 3 configuration error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import pandas as pd

from . import __version__, _accel
from .bikeability import BikeabilitySample, classified_frame, synthetic_bikeability_sample
from .choice_core import ChoiceData
from .config import MODEL_KINDS, model_spec
from .draws import SEQUENCE_KINDS, LatentDrawPlan
from .errors import ConfigError, DataError, DomainError, EstimationError, SpecificationError
from .estimation import EstimationResult, estimate
from .impacts import BACKGROUND_SCENARIOS, ABLifecycleTable, impact_grid, read_emissions_ini
from .metrics import SCORING, FoldPlan, cv_evaluate, model_fit_predict
from .params import reference_parameters
from .simulation import ScenarioGrid, ScenarioSimulator, shares_frame, shifts_frame, simulate_grid, trip_table
from .synthetic import recovery_parameters, synthetic_choice_data
from .weighting import (MarginTargets, ipf_fit, margin_report, nhts_bikeable_targets, read_weights,
                        respondent_frame, write_weights)

logger = logging.getLogger("abmode")

EXIT_OK, EXIT_NONCONVERGED, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2, 3
FLOAT_FORMAT = "%.12g"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Run:
    """Output directory plus the manifest describing how it was produced."""

    def __init__(self, args, inputs: dict, configs: dict):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "command": args.command,
            "arguments": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")},
            "input_digests": {k: file_digest(v) for k, v in inputs.items() if v is not None},
            "config_digests": {k: file_digest(v) for k, v in configs.items() if v is not None},
            "seed": getattr(args, "seed", None),
            "version": __version__,
            "started": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "outputs": [],
        }

    def csv(self, name: str, frame: pd.DataFrame):
        path = self.out / name
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self.manifest["outputs"].append(name)
        return path

    def finish(self, status: str = "ok"):
        self.manifest["status"] = status
        self.manifest["finished"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        (self.out / "manifest.json").write_text(json.dumps(self.manifest, indent=2, default=str) + "\n",
                                               encoding="utf-8")


def _plan(args) -> LatentDrawPlan:
    return LatentDrawPlan(args.draws, args.seed, args.sequence)


def _load_result(path) -> EstimationResult:
    try:
        with open(path, encoding="utf-8") as fh:
            return EstimationResult.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read parameter file {path}: {exc}") from exc


def _warn_if_stale(result: EstimationResult, data_path):
    recorded = result.metadata.get("data_digest")
    if recorded and recorded != file_digest(data_path):
        logger.warning("stale parameters: %s differs from the data the parameters were estimated on", data_path)


def _weights(path):
    return None if path is None else read_weights(path)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    run = Run(args, {}, {})
    if args.kind == "bikeability":
        sample = synthetic_bikeability_sample(args.individuals, reference_parameters("binary"), seed=args.seed)
        run.csv("trips.csv", sample.to_frame())
    else:
        params = recovery_parameters() if args.kind == "recovery" else reference_parameters(args.kind)
        data = synthetic_choice_data(args.individuals, params, seed=args.seed, n_tasks=args.tasks)
        run.csv("choices.csv", data.to_frame())
    run.finish()
    return EXIT_OK


def cmd_weight(args) -> int:
    run = Run(args, {"data": args.data}, {"targets": args.targets})
    frame = respondent_frame(ChoiceData.read_csv(args.data))
    targets = nhts_bikeable_targets() if args.targets is None else MarginTargets.read_ini(args.targets)
    res = ipf_fit(frame, targets, tol=args.tol, max_iter=args.max_iter, trim_quantile=args.trim)
    write_weights(run.out / "weights.csv", frame["individual_id"], res.weights)
    run.manifest["outputs"].append("weights.csv")
    report = margin_report(frame, res.weights, targets)
    run.csv("margins.csv", pd.DataFrame({"variable": list(report), "max_abs_deviation": list(report.values())}))
    run.manifest["ipf"] = {"iterations": res.iterations, "converged": res.converged,
                           "max_deviation": res.max_deviation}
    run.finish("ok" if res.converged else "not converged")
    print(f"raking: {res.iterations} sweeps, max deviation {res.max_deviation:.3g}, converged={res.converged}")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_estimate(args) -> int:
    params, config = model_spec(args.model, args.spec)
    run = Run(args, {"data": args.data}, {"spec": args.spec})
    if args.model == "bikeability":
        data = BikeabilitySample.read_csv(args.data)
        result = estimate("binary", data, config=config, params=params)
    else:
        data = ChoiceData.read_csv(args.data)
        plan = _plan(args) if args.model in ("mixl", "hcm") else None
        result = estimate(args.model, data, config=config, params=params, plan=plan, backend=args.backend)
    result.metadata = {"data_digest": file_digest(args.data), "model": args.model}
    result.to_json(run.out / "result.json")
    run.manifest["outputs"].append("result.json")
    run.finish("ok" if result.converged else "not converged")
    print(result.summary())
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def _simulator(args, result):
    data = ChoiceData.read_csv(args.data)
    _warn_if_stale(result, args.data)
    trips = trip_table(data)
    return ScenarioSimulator(trips, result.params, _plan(args), lv_mode=args.lv_mode, backend=args.backend)


def cmd_simulate(args) -> int:
    result = _load_result(args.params)
    grid = ScenarioGrid() if args.grid is None else ScenarioGrid.read_ini(args.grid)
    run = Run(args, {"data": args.data, "params": args.params, "weights": args.weights}, {"grid": args.grid})
    results = simulate_grid(_simulator(args, result), _weights(args.weights), grid, adoption=not args.no_adoption)
    run.csv("shares.csv", shares_frame(results))
    run.csv("shifts.csv", shifts_frame(results))
    run.finish()
    return EXIT_OK


def cmd_impact(args) -> int:
    result = _load_result(args.params)
    grid = ScenarioGrid() if args.grid is None else ScenarioGrid.read_ini(args.grid)
    if args.emissions is None:
        scenarios, table = dict(BACKGROUND_SCENARIOS), ABLifecycleTable()
    else:
        scenarios, table = read_emissions_ini(args.emissions)
    if args.transit is not None:
        scenarios = {k: s.with_transit(args.transit) for k, s in scenarios.items()}
    run = Run(args, {"data": args.data, "params": args.params, "weights": args.weights},
              {"grid": args.grid, "emissions": args.emissions})
    frame = impact_grid(_simulator(args, result), _weights(args.weights), grid, scenarios, table,
                        args.variants, adoption=not args.no_adoption)
    run.csv("impacts.csv", frame)
    run.finish()
    return EXIT_OK


def cmd_validate(args) -> int:
    params, config = model_spec(args.model, args.spec)
    if args.model == "bikeability":
        raise ConfigError("cross-validation covers the mode-choice models only")
    run = Run(args, {"data": args.data}, {"spec": args.spec})
    data = ChoiceData.read_csv(args.data)
    plan = _plan(args) if args.model in ("mixl", "hcm") else None
    fit_predict = model_fit_predict(args.model, params, config, plan, backend=args.backend)
    res = cv_evaluate(data, fit_predict, FoldPlan(args.folds, args.seed), scoring=args.scoring)
    run.csv("cv_accuracy.csv", res.accuracy_table())
    run.csv("cv_share_mad.csv", res.share_mad_table())
    run.finish()
    return EXIT_OK


def cmd_bikeability(args) -> int:
    run = Run(args, {"data": args.data, "params": args.params}, {})
    params = reference_parameters("binary") if args.params is None else _load_result(args.params).params
    sample = BikeabilitySample.read_csv(args.data)
    run.csv("classified.csv", classified_frame(sample, params, args.threshold))
    run.finish()
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _existing(path: str) -> str:
    if not os.path.isfile(path):
        raise argparse.ArgumentTypeError(f"file not found: {path}")
    return path


# environment variables that supply a default for a config-file flag
CONFIG_ENV = {"spec": "ABMODE_SPEC", "targets": "ABMODE_TARGETS", "grid": "ABMODE_GRID",
              "emissions": "ABMODE_EMISSIONS"}


def _config_default(name: str):
    return os.environ.get(CONFIG_ENV[name]) or None


def _draw_options(p):
    p.add_argument("--draws", type=int, default=1000, help="draws per individual (default 1000)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sequence", choices=SEQUENCE_KINDS, default="quasi-random")


def _compute_options(p):
    p.add_argument("--threads", type=int, default=None, help="cap on worker threads; results do not depend on it")
    p.add_argument("--backend", choices=("numba", "numpy"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abmode", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic choice or bikeability data set")
    p.add_argument("--kind", choices=("mnl", "mixl", "hcm", "recovery", "bikeability"), default="mnl")
    p.add_argument("--individuals", type=int, default=500)
    p.add_argument("--tasks", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("weight", help="rake respondent weights to reference margins")
    p.add_argument("--data", type=_existing, required=True)
    p.add_argument("--targets", type=_existing, default=_config_default("targets"),
                   help="INI targets; default: bikeable-trip margins")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--trim", type=float, default=None, help="cap weights at this quantile, e.g. 0.99")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_weight)

    p = sub.add_parser("estimate", help="estimate a model by maximum likelihood")
    p.add_argument("--model", choices=MODEL_KINDS, required=True)
    p.add_argument("--data", type=_existing, required=True)
    p.add_argument("--spec", type=_existing, default=_config_default("spec"))
    _draw_options(p)
    _compute_options(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    for name, func, helptext in (("simulate", cmd_simulate, "mode shares and shifts over the scenario grid"),
                                 ("impact", cmd_impact, "relative emission changes over the scenario grid")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--params", type=_existing, required=True, help="result.json from estimate")
        p.add_argument("--data", type=_existing, required=True)
        p.add_argument("--weights", type=_existing, default=None)
        p.add_argument("--grid", type=_existing, default=_config_default("grid"))
        p.add_argument("--lv-mode", choices=("draws", "point"), default="draws")
        p.add_argument("--no-adoption", action="store_true", help="keep every trip on its original mode")
        _draw_options(p)
        _compute_options(p)
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)
        if name == "impact":
            p.add_argument("--emissions", type=_existing, default=_config_default("emissions"))
            p.add_argument("--transit", type=float, default=None, help="override the transit factor (g/pkm)")
            p.add_argument("--variants", nargs="+", default=None)

    p = sub.add_parser("validate", help="k-fold cross-validation by individual")
    p.add_argument("--model", choices=("mnl", "mixl", "hcm"), required=True)
    p.add_argument("--data", type=_existing, required=True)
    p.add_argument("--spec", type=_existing, default=_config_default("spec"))
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--scoring", choices=SCORING, default="argmax")
    _draw_options(p)
    _compute_options(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bikeability", help="classify trips as bikeable")
    p.add_argument("--data", type=_existing, required=True)
    p.add_argument("--params", type=_existing, default=None, help="result.json; default: published estimates")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bikeability)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if getattr(args, "threads", None) is not None:
        _accel.set_threads(args.threads)
    try:
        return args.func(args)
    except (ConfigError, SpecificationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DomainError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EstimationError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
