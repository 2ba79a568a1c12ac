"""Command-line entry point: ``trunclearn <command> [flags]``.

Every command accepts ``--seed``, ``--out`` (CSV path, stdout when omitted)
and ``--config FILE``, a JSON object whose keys are flag names (``alpha-grid``
or ``alpha_grid``). Flags given on the command line override the file.
CSV rows end with ``seed`` and ``config_hash`` columns.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import harness
from .datagen import Dataset, NoiseModel, gen_linear, parse_libsvm, write_libsvm
from .errors import DataError, DimensionError, NumericalError
from .harness import FitOptions, config_hash, fmt, write_csv
from .linmodel import LinearProblem, ObjectiveSpec, statistical_error
from .optim import SgdConfig, StepRule, sgd
from .truncation import KINDS, Truncation, check_axioms

log = logging.getLogger("trunclearn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
# flags that never influence results and are left out of the config hash
_NOT_HASHED = {"command", "out", "config", "model_out", "cells_out"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(",", " ").split()]


def _ints(text):
    return [int(v) for v in _floats(text)]


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--config", default=None, help="JSON file of flag values")


def _add_synthetic(p, n=1000, d=20):
    p.add_argument("--data", default=None, help="libsvm file; synthetic data is generated when omitted")
    p.add_argument("--n", type=int, default=n)
    p.add_argument("--d", type=int, default=d)
    p.add_argument("--noise", default="gaussian", choices=["gaussian", "student_t", "pareto", "sparse_output", "input_corruption"])
    p.add_argument("--level", type=float, default=1.0, help="sigma, df, tail or beta depending on --noise")
    p.add_argument("--fraction", type=float, default=0.2)
    p.add_argument("--sigma", type=float, default=1.0, help="base Gaussian noise for the corruption models")


def _add_loss(p, alpha=True):
    p.add_argument("--loss", default="square", choices=["square", "absolute", "huber", "eps_insensitive", "pinball"])
    p.add_argument("--trunc", default="log", choices=list(KINDS))
    p.add_argument("--m", type=int, default=2, help="order of the catoni truncation")
    if alpha:
        p.add_argument("--alpha", type=float, default=10.0)
        p.add_argument("--lam", type=float, default=0.0)


def _add_fit(p, steps_per_sample=50.0):
    p.add_argument("--steps-per-sample", type=float, default=steps_per_sample)
    p.add_argument("--total-steps", type=int, default=None)
    p.add_argument("--step-rule", default="smooth_cap", choices=["prop_one", "smooth_cap"])
    p.add_argument("--step-scale", type=float, default=1.0)
    p.add_argument("--lipschitz-step-scale", type=float, default=10.0)
    p.add_argument("--batch-size", type=int, default=1)


def _add_grids(p):
    p.add_argument("--alpha-grid", type=_floats, default=list(harness.DEFAULT_ALPHAS))
    p.add_argument("--lambda-grid", type=_floats, default=list(harness.DEFAULT_LAMBDAS))
    p.add_argument("--folds", type=int, default=5)


def build_parser():
    parser = _Parser(prog="trunclearn", description="Robust regression with truncated losses.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    cmds = {}

    p = cmds["gen"] = sub.add_parser("gen", help="write a synthetic dataset in libsvm format")
    _add_common(p)
    _add_synthetic(p)
    p.add_argument("--w-star-out", default=None, help="CSV path for the true weights")

    p = cmds["train"] = sub.add_parser("train", help="run SGD and write its trace")
    _add_common(p)
    _add_synthetic(p)
    _add_loss(p)
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--step-rule", default="prop_one", choices=["constant", "prop_one", "smooth_cap"])
    p.add_argument("--step-scale", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=None, help="step size for --step-rule constant")
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--record-every", type=int, default=100)
    p.add_argument("--model-out", default=None, help="CSV path for the final weights")

    p = cmds["crossval"] = sub.add_parser("crossval", help="k-fold grid search over alpha and lambda")
    _add_common(p)
    _add_synthetic(p, n=500)
    _add_loss(p, alpha=False)
    _add_grids(p)
    _add_fit(p)

    p = cmds["sweep"] = sub.add_parser("sweep", help="truncated vs untruncated SGD across noise levels")
    _add_common(p)
    _add_loss(p, alpha=False)
    p.add_argument("--noise", default="sparse_output", choices=["gaussian", "student_t", "pareto", "sparse_output", "input_corruption"])
    p.add_argument("--levels", type=_floats, default=[10.0, 20.0, 30.0, 40.0, 50.0])
    p.add_argument("--fraction", type=float, default=0.2)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--trials", type=int, default=5)
    _add_grids(p)
    _add_fit(p)
    p.add_argument("--cells-out", default=None, help="CSV path for per-trial results")

    p = cmds["rate-check"] = sub.add_parser("rate-check", help="statistical error against sample size")
    _add_common(p)
    _add_loss(p)
    p.add_argument("--noise", default="student_t", choices=["gaussian", "student_t", "pareto", "sparse_output", "input_corruption"])
    p.add_argument("--level", type=float, default=3.0)
    p.add_argument("--fraction", type=float, default=0.2)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--n-grid", type=_ints, default=[500, 2000, 8000])
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--total-steps", type=int, default=2_000_000)
    p.add_argument("--step-rule", default="prop_one", choices=["prop_one", "smooth_cap"])
    p.add_argument("--step-scale", type=float, default=1.0)

    p = cmds["housing"] = sub.add_parser("housing", help="random-split comparison on a libsvm regression file")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--n-train", type=int, default=253)
    _add_grids(p)
    _add_fit(p, steps_per_sample=200.0)

    p = cmds["mlp-demo"] = sub.add_parser("mlp-demo", help="MLP students of a random teacher under label corruption")
    _add_common(p)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--hidden", type=_ints, default=[32, 32])
    p.add_argument("--n-train", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--beta", type=float, default=50.0)
    p.add_argument("--fraction", type=float, default=0.2)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--no-corrupt", action="store_true")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=6000)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--eta", type=float, default=0.05)

    p = cmds["qq"] = sub.add_parser("qq", help="normal Q-Q pairs of residuals")
    _add_common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--residuals", default=None, help="text file of residuals")
    src.add_argument("--data", default=None, help="libsvm file; residuals of a fitted linear model are used")
    _add_loss(p)
    p.add_argument("--steps-per-sample", type=float, default=200.0)

    p = cmds["check-axioms"] = sub.add_parser("check-axioms", help="verify truncation-function axioms on a grid")
    _add_common(p)
    p.add_argument("--trunc", default="all", choices=["all", *KINDS])
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--alphas", type=_floats, default=[0.5, 1.0, 10.0, 100.0])
    p.add_argument("--grid-max", type=float, default=100.0)
    p.add_argument("--grid-points", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-10)
    return parser, cmds


_LIST_FLAGS = {"alpha_grid": _floats, "lambda_grid": _floats, "levels": _floats, "n_grid": _ints, "hidden": _ints, "alphas": _floats}


def parse(argv):
    parser, cmds = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        sub = cmds[args.command]
        known = {a.dest for a in sub._actions}
        mapped = {}
        for key, value in cfg.items():
            dest = key.lstrip("-").replace("-", "_")
            if dest not in known or dest in ("help", "config"):
                raise UsageError(f"config file: unknown option {key!r} for {args.command}")
            mapped[dest] = value
        sub.set_defaults(**mapped)
        args = parser.parse_args(argv)
    for dest, conv in _LIST_FLAGS.items():
        if hasattr(args, dest):
            try:
                setattr(args, dest, conv(getattr(args, dest)))
            except (TypeError, ValueError):
                raise UsageError(f"--{dest.replace('_', '-')} must be a list of numbers") from None
    return args


def _provenance(args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_HASHED}
    return [args.seed, config_hash({"command": args.command, **cfg})]


def _emit(args, header, rows, target=None):
    prov = _provenance(args)
    rows = [list(r) + prov for r in rows]
    header = list(header) + ["seed", "config_hash"]
    target = target if target is not None else args.out
    write_csv(target if target else sys.stdout, header, rows)


def _noise(args):
    kind = args.noise
    if kind in ("sparse_output", "input_corruption"):
        return NoiseModel(kind, sigma=args.sigma, beta=args.level, fraction=args.fraction)
    if kind == "gaussian":
        return NoiseModel(kind, sigma=args.level)
    if kind == "student_t":
        return NoiseModel(kind, df=args.level)
    return NoiseModel(kind, tail=args.level)


def _dataset(args) -> Dataset:
    if args.data:
        return parse_libsvm(args.data)
    return gen_linear(args.n, args.d, _noise(args), args.seed)


def _fit_options(args) -> FitOptions:
    return FitOptions(
        steps_per_sample=args.steps_per_sample,
        step_rule=args.step_rule,
        step_scale=args.step_scale,
        lipschitz_step_scale=args.lipschitz_step_scale,
        batch_size=args.batch_size,
        total_steps=args.total_steps,
    )


def cmd_gen(args):
    ds = gen_linear(args.n, args.d, _noise(args), args.seed)
    write_libsvm(ds, args.out if args.out else sys.stdout)
    if args.w_star_out:
        _emit(args, ["index", "w_star"], [(j + 1, float(v)) for j, v in enumerate(ds.w_star)], args.w_star_out)


def cmd_train(args):
    ds = _dataset(args)
    tl = harness.make_loss(args.loss, args.trunc, args.alpha, args.m)
    rule = StepRule("constant", eta=args.eta) if args.step_rule == "constant" else StepRule(args.step_rule, scale=args.step_scale)
    cfg = SgdConfig(args.steps, rule, args.batch_size, args.seed, args.record_every)
    rep = sgd(LinearProblem(ObjectiveSpec(tl, args.lam), ds), np.zeros(ds.d), cfg)
    objs = dict(rep.objective_trace)
    _emit(args, ["step", "grad_norm_sq", "objective"], [(s, g, objs[s]) for s, g in rep.grad_norm_trace])
    if args.model_out:
        _emit(args, ["index", "w"], [(j + 1, float(v)) for j, v in enumerate(rep.final_model)], args.model_out)
    if ds.w_star is not None:
        log.info("statistical error %s", fmt(statistical_error(rep.final_model, ds.w_star)))


def cmd_crossval(args):
    ds = _dataset(args)
    a, lam, table = harness.cross_validate(
        ds, args.loss, args.trunc, args.alpha_grid, args.lambda_grid, args.folds, args.seed, _fit_options(args)
    )
    rows = [(ra, rl, mean, sd, ra == a and rl == lam) for ra, rl, mean, sd in table]
    _emit(args, ["alpha", "lam", "cv_" + harness._metric_name(args.loss), "cv_std", "selected"], rows)


def cmd_sweep(args):
    config = harness.ExperimentConfig(
        task="sweep", loss=args.loss, trunc=args.trunc, noise=args.noise, levels=tuple(args.levels),
        fraction=args.fraction, sigma=args.sigma, n=args.n, d=args.d, n_test=args.n_test, trials=args.trials,
        alpha_grid=tuple(args.alpha_grid), lambda_grid=tuple(args.lambda_grid), folds=args.folds,
        fit=_fit_options(args), seed=args.seed,
    )
    rows, cells = harness.run_sweep(config)
    fields = list(harness.SweepRow.__dataclass_fields__)
    _emit(args, fields, [[getattr(r, f) for f in fields] for r in rows])
    if args.cells_out:
        cf = list(harness.CellResult.__dataclass_fields__)
        _emit(args, cf, [[getattr(c, f) for f in cf] for c in cells], args.cells_out)


def cmd_rate_check(args):
    options = FitOptions(step_rule=args.step_rule, step_scale=args.step_scale, total_steps=args.total_steps)
    table, slope = harness.rate_check(
        _noise(args), args.d, args.n_grid, args.trials, args.alpha, args.lam, args.seed, options, args.loss, args.trunc
    )
    _emit(args, ["n", "median_error", "mean_error", "slope"], [(n, med, mean, slope) for n, med, mean in table])


def cmd_housing(args):
    config = harness.HousingConfig(
        trials=args.trials, n_train=args.n_train, alpha_grid=tuple(args.alpha_grid),
        lambda_grid=tuple(args.lambda_grid), folds=args.folds, fit=_fit_options(args), seed=args.seed,
    )
    rows = harness.run_housing(args.data, config)
    out = [
        (r["base"], r["method"], r["metric"], r["mean"], r["std"],
         ";".join(fmt(v) for v in r["per_trial"]), ";".join(fmt(v) for v in r["alphas"]), ";".join(fmt(v) for v in r["lambdas"]))
        for r in rows
    ]
    _emit(args, ["base", "method", "metric", "mean", "std", "per_trial", "alphas", "lambdas"], out)


def cmd_mlp_demo(args):
    config = harness.MlpDemoConfig(
        d=args.d, hidden=tuple(args.hidden), n_train=args.n_train, n_test=args.n_test, beta=args.beta,
        fraction=args.fraction, sigma=args.sigma, corrupt=not args.no_corrupt, alpha=args.alpha, lam=args.lam,
        steps=args.steps, batch_size=args.batch_size, eta=args.eta, seed=args.seed,
    )
    rep = harness.run_mlp_demo(config)
    _emit(args, ["method", "test_mse", "test_mae"], [(k, v["mse"], v["mae"]) for k, v in rep.items()])


def _read_residuals(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read residuals: {exc}") from None
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_qq(args):
    if args.residuals:
        r = _read_residuals(args.residuals)
    else:
        ds = parse_libsvm(args.data)
        ds, _ = harness.standardize(ds, ds)
        tl = harness.make_loss(args.loss, args.trunc, args.alpha, args.m)
        w = harness.fit_linear(ds, tl, args.lam, FitOptions(steps_per_sample=args.steps_per_sample), args.seed)
        r = ds.X @ w - ds.y
    _emit(args, ["theoretical", "empirical"], harness.qq_data(r).tolist())


def cmd_check_axioms(args):
    kinds = KINDS if args.trunc == "all" else (args.trunc,)
    grid = np.linspace(0.0, args.grid_max, args.grid_points)
    rows, failed = [], 0
    for kind in kinds:
        report = check_axioms(Truncation(kind, 1.0, args.m), grid, sorted(args.alphas), args.tol)
        for r in report.results:
            a, u = (r.where + (np.nan, np.nan))[:2]
            rows.append((kind, r.name, r.passed, r.worst, a, u))
        failed += len(report.failures())
    _emit(args, ["kind", "axiom", "passed", "worst", "alpha", "u"], rows)
    log.info("%d axiom checks failed", failed)


COMMANDS = {
    "gen": cmd_gen, "train": cmd_train, "crossval": cmd_crossval, "sweep": cmd_sweep, "rate-check": cmd_rate_check,
    "housing": cmd_housing, "mlp-demo": cmd_mlp_demo, "qq": cmd_qq, "check-axioms": cmd_check_axioms,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        args = parse(sys.argv[1:] if argv is None else argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # downstream reader closed early (e.g. ``| head``)
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, DimensionError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
