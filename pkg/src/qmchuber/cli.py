"""Command-line driver.

Settings may come from ``--config FILE`` (``key = value`` lines, ``#``
comments, keys named like the long flags with dashes or underscores);
explicit flags override the file.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver
divergence.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import data_io, diagnostics
from .errors import (AssumptionError, CapacityError, DomainError, ParseError,
                     QMCError, SearchError, StepSizeError, ValidationError)
from .evaluation import evaluate
from .experiment import (ExperimentConfig, SyntheticSpec, format_csv, grid_search,
                         run_experiment, source_observations)
from .quantization import QuantizationScheme
from .solver import SolverConfig, solve

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4

log = logging.getLogger("qmchuber")

_SOLVER_FLAGS = {
    "mu": "step_size", "alpha": "decay_factor", "lambda_": "regularization",
    "c": "delta_init_constant", "inner_tol": "inner_tolerance",
    "outer_tol": "outer_tolerance", "max_inner": "max_inner_iterations",
    "max_outer": "max_outer_iterations",
}


class ConfigError(Exception):
    pass


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def read_config_file(path):
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key == "lambda":
                key = "lambda_"
            values[key] = value
    return values


def _add_source(p):
    p.add_argument("--data", help="ratings file (user item rating timestamp)")
    p.add_argument("--synth", help="synthetic source ROWSxCOLSxRANK")
    p.add_argument("--delimiter", help="ratings field delimiter (default tab)")


def _add_scheme(p):
    p.add_argument("--levels", type=int, help="number of quantization levels (default 5)")
    p.add_argument("--gap", type=float, help="quantization gap (default 1)")
    p.add_argument("--first-level", type=float, help="lowest level center (default 1)")


def _add_solver(p):
    p.add_argument("--mu", type=float, help="gradient step size")
    p.add_argument("--alpha", type=float, help="delta decay factor in (0, 1)")
    p.add_argument("--lambda", dest="lambda_", type=float, help="Huber weight")
    p.add_argument("--c", type=float, help="initial delta = C * sigma_max(M)")
    p.add_argument("--inner-tol", type=float)
    p.add_argument("--outer-tol", type=float)
    p.add_argument("--max-inner", type=int)
    p.add_argument("--max-outer", type=int)
    p.add_argument("--backtracking", action="store_true", default=None,
                   help="halve mu whenever an update raises the objective")


def build_parser():
    parser = argparse.ArgumentParser(prog="qmchuber", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic instance")
    p.add_argument("--config")
    p.add_argument("--synth", help="ROWSxCOLSxRANK")
    _add_scheme(p)
    p.add_argument("--fraction", type=float, help="observed fraction (default 1)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output prefix")

    p = sub.add_parser("solve", help="recover one matrix")
    p.add_argument("--config")
    p.add_argument("--obs", help="observation file written by 'synth'")
    _add_source(p)
    _add_scheme(p)
    _add_solver(p)
    p.add_argument("--out", required=True, help="recovered matrix file")
    p.add_argument("--report", help="write a JSON solve report here")

    p = sub.add_parser("eval", help="metrics of a saved matrix on saved observations")
    p.add_argument("--recovered", required=True)
    p.add_argument("--test", required=True, help="held-out observation file")
    p.add_argument("--train", help="training observations (for the baseline)")

    for name, helptext in (("experiment", "missing-rate x seed grid to CSV"),
                           ("gridsearch", "hyperparameter search on a validation split")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config")
        _add_source(p)
        _add_scheme(p)
        _add_solver(p)
        if name == "experiment":
            p.add_argument("--missing-rates", help="comma list, e.g. 0.1,0.2,0.3,0.5")
            p.add_argument("--seeds", help="comma list or range, e.g. 1..20")
            p.add_argument("--parallel", type=int)
            p.add_argument("--no-timing", action="store_true", default=None,
                           help="leave runtime_seconds empty (byte-reproducible CSV)")
        else:
            p.add_argument("--missing-rate", type=float, help="test split carved first")
            p.add_argument("--seed", type=int)
            p.add_argument("--val-fraction", type=float)
            for flag in ("mu", "alpha", "lambda", "c"):
                p.add_argument(f"--{flag}-grid", help="comma list of candidates")
        p.add_argument("--out", help="output path (default stdout)")

    p = sub.add_parser("probe", help="sampled local convexity probe")
    p.add_argument("--matrix", required=True, help="centre of the probe ball")
    p.add_argument("--obs", required=True)
    p.add_argument("--lambda", dest="lambda_", type=float, required=True)
    p.add_argument("--delta", type=float, help="probe one delta (else search)")
    p.add_argument("--radius", type=float, default=0.0)
    p.add_argument("--samples", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("lambda-window", help="admissible regularization interval")
    p.add_argument("--r-star", type=int, required=True)
    p.add_argument("--delta-gap", type=float, required=True)
    p.add_argument("--omega", type=int, required=True)
    p.add_argument("--gap", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=1e-2)
    return parser


def _merge_config(args):
    """Fill flags left unset from ``--config``; flags given explicitly win."""
    path = getattr(args, "config", None)
    if not path:
        return
    try:
        values = read_config_file(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for key, raw in values.items():
        if not hasattr(args, key):
            raise ConfigError(f"unknown config key {key!r} for '{args.command}'")
        if getattr(args, key) is None:
            setattr(args, key, raw)


def _get(args, name, conv, default):
    v = getattr(args, name, None)
    if v is None:
        return default
    try:
        if conv is bool and isinstance(v, str):
            return v.strip().lower() in ("1", "true", "yes", "on")
        return conv(v)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {v!r}") from None


def _scheme(args):
    try:
        return QuantizationScheme.uniform(_get(args, "levels", int, 5),
                                          _get(args, "gap", float, 1.0),
                                          _get(args, "first_level", float, 1.0))
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _solver_config(args):
    kw = {}
    for flag, fld in _SOLVER_FLAGS.items():
        conv = int if fld.startswith("max_") else float
        if getattr(args, flag, None) is not None:
            kw[fld] = _get(args, flag, conv, None)
    if getattr(args, "backtracking", None) is not None:
        kw["backtracking"] = _get(args, "backtracking", bool, False)
    try:
        return SolverConfig(**kw)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _delimiter(args):
    """Tab by default; escapes such as ``\\t`` are decoded, and an empty
    value means any run of whitespace."""
    delim = _get(args, "delimiter", str, "\t")
    return delim.encode().decode("unicode_escape") if delim else None


def _experiment_config(args, rates, seeds):
    data = getattr(args, "data", None)
    synth = getattr(args, "synth", None)
    if (data is None) == (synth is None):
        raise ConfigError("give exactly one of --data and --synth")
    try:
        spec = SyntheticSpec.parse(synth) if synth else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        return ExperimentConfig(
            scheme=_scheme(args), missing_rates=tuple(rates), seeds=tuple(seeds),
            solver=_solver_config(args), data_path=data, synthetic=spec,
            delimiter=_delimiter(args), parallel=_get(args, "parallel", int, 1),
            record_runtime=not _get(args, "no_timing", bool, False))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _write(out, text):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_synth(args):
    spec = _get(args, "synth", SyntheticSpec.parse, SyntheticSpec(60, 50, 3))
    inst = data_io.generate_synthetic(spec.rows, spec.cols, spec.rank, _scheme(args),
                                      _get(args, "fraction", float, 1.0),
                                      _get(args, "seed", int, 0))
    data_io.save_matrix(f"{args.out}.truth.txt", inst.ground_truth)
    data_io.save_observed(f"{args.out}.obs.txt", inst.observed)
    print(f"wrote {args.out}.truth.txt and {args.out}.obs.txt "
          f"({len(inst.observed)} observations)")


def cmd_solve(args):
    if args.obs:
        obs = data_io.load_observed(args.obs)
    elif args.data:
        obs = data_io.load_ratings(args.data, _delimiter(args), _scheme(args)).to_observed()
    else:
        raise ConfigError("give --obs or --data")
    report = solve(obs, _solver_config(args))
    data_io.save_matrix(args.out, report.recovered)
    summary = {"outer_iterations": report.outer_iterations,
               "stop_reason": report.stop_reason,
               "delta_trace": report.delta_trace,
               "inner_iteration_counts": report.inner_iteration_counts,
               "final_objective": report.objective_trace[-1][-1]}
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
    print(f"recovered {obs.rows}x{obs.cols} after {report.outer_iterations} outer "
          f"iterations ({report.stop_reason})")


def cmd_eval(args):
    X = data_io.load_matrix(args.recovered)
    test = data_io.load_observed(args.test)
    train = data_io.load_observed(args.train) if args.train else test
    ev = evaluate(X, train, test)
    print(json.dumps(ev.__dict__, indent=2))


def cmd_experiment(args):
    rates = _floats(_get(args, "missing_rates", str, "0.1,0.2,0.3,0.5"))
    seeds = _ints(_get(args, "seeds", str, "1..20"))
    if not rates or not seeds:
        raise ConfigError("missing rates and seeds must be nonempty")
    config = _experiment_config(args, rates, seeds)
    result = run_experiment(config)
    _write(args.out, format_csv(result))
    for rate, seed, err in result.errors:
        print(f"rate={rate} seed={seed}: {err}", file=sys.stderr)
    if result.errors and len(result.errors) == len(result.rows):
        if all("StepSizeError" in e for _, _, e in result.errors):
            return EXIT_DIVERGED
        return EXIT_DATA
    return EXIT_OK


def cmd_gridsearch(args):
    rate = _get(args, "missing_rate", float, 0.1)
    seed = _get(args, "seed", int, 0)
    config = _experiment_config(args, [rate], [seed])
    source = source_observations(config, seed)
    split = data_io.make_split(source, rate, seed)
    names = {"mu": "step_size", "alpha": "decay_factor",
             "lambda": "regularization", "c": "delta_init_constant"}
    grids = {}
    for flag, fld in names.items():
        raw = _get(args, f"{flag}_grid", str, None)
        if raw:
            grids[fld] = _floats(raw)
    result = grid_search(config.solver, grids, split.train,
                         _get(args, "val_fraction", float, 0.1), seed)
    lines = ["step_size,decay_factor,regularization,delta_init_constant,validation_rmse,error"]
    for e in result.table:
        rm = "" if e["error"] else repr(e["rmse"])
        err = (e["error"] or "").replace(",", ";")
        lines.append(f"{e['step_size']!r},{e['decay_factor']!r},{e['regularization']!r},"
                     f"{e['delta_init_constant']!r},{rm},{err}")
    _write(args.out, "\n".join(lines) + "\n")
    b = result.best
    print(f"best: mu={b.step_size} alpha={b.decay_factor} lambda={b.regularization} "
          f"C={b.delta_init_constant} validation_rmse={result.best_score:.6g}",
          file=sys.stderr)


def cmd_probe(args):
    X = data_io.load_matrix(args.matrix)
    obs = data_io.load_observed(args.obs)
    if args.delta is not None:
        rep = diagnostics.convexity_probe(X, obs, args.delta, args.lambda_, args.radius,
                                          args.samples, args.seed)
        print(json.dumps({"delta": rep.delta_probed, "samples": rep.sample_points,
                          "skipped": rep.skipped_samples,
                          "min_eigenvalue": rep.min_eigenvalue_found,
                          "condition_holds": rep.condition_holds}, indent=2))
    else:
        res = diagnostics.suggest_delta(X, obs, args.lambda_, args.radius,
                                        args.samples, args.seed)
        print(json.dumps({"suggested_delta": res.delta, "probes": len(res.trace)}))


def cmd_lambda_window(args):
    w = diagnostics.lambda_window(args.r_star, args.delta_gap, args.omega, args.gap,
                                  args.epsilon)
    print(json.dumps(w.__dict__))


COMMANDS = {"synth": cmd_synth, "solve": cmd_solve, "eval": cmd_eval,
            "experiment": cmd_experiment, "gridsearch": cmd_gridsearch,
            "probe": cmd_probe, "lambda-window": cmd_lambda_window}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _merge_config(args)
        return COMMANDS[args.command](args) or EXIT_OK
    except (ConfigError, DomainError, AssumptionError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, ValidationError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StepSizeError as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except SearchError as exc:
        print(f"search failed: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except QMCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
