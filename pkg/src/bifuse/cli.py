"""Command-line front end: simulate, fit, path, cv, score, baseline.

Exit codes: 0 on success (including fits flagged as not converged),
2 for bad input or configuration, 3 for numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .datagen import GeneratorSpec, checkerboard_theta, simulate_dataset
from .errors import InputError, NumericalDivergenceError
from .metrics import cluster_scores, prediction_rmse, recovery_accuracy
from .model import Hyperparameters, TaskDataset
from .prox import ProxConfig
from .selection import ClusterAssignment
from .tuning import (MODES, Split, assign_clusters, baseline_two_step, cross_validate,
                     default_grids, fit_model, pilot_edges, solution_path)

log = logging.getLogger("bifuse")

EXIT_INPUT = 2
EXIT_NUMERIC = 3

SIM_KEYS = {"n", "p", "k", "row_partition", "col_partition", "zero_block_fraction",
            "mu_support", "sigma_eps", "sigma_noise", "seed", "n_validation", "n_test"}
SIM_REQUIRED = {"n", "p", "k", "row_partition", "col_partition"}


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("BIFUSE_THREADS")
    if env is None:
        return 1
    try:
        value = int(env)
    except ValueError:
        raise InputError(f"BIFUSE_THREADS must be an integer, got {env!r}") from None
    if value < 1:
        raise InputError("BIFUSE_THREADS must be positive")
    return value


def _hp(args) -> Hyperparameters:
    return Hyperparameters(lambda1=args.lambda1, lambda2=args.lambda2, lambda3=args.lambda3,
                           phi=args.phi, kappa=args.kappa, gamma=args.gamma, tol=args.tol,
                           max_iter=args.max_iter)


def _data(x_path, y_path) -> TaskDataset:
    return TaskDataset(io.read_matrix(x_path), io.read_matrix(y_path))


def _maybe_validation(args):
    if (args.X_val is None) != (args.Y_val is None):
        raise InputError("--X-val and --Y-val must be given together")
    return None if args.X_val is None else _data(args.X_val, args.Y_val)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    cfg = io.read_json(args.config)
    if not isinstance(cfg, dict):
        raise InputError(f"{args.config}: top level must be a JSON object")
    unknown = set(cfg) - SIM_KEYS
    if unknown:
        raise InputError(f"{args.config}: unknown field(s) {sorted(unknown)}")
    missing = SIM_REQUIRED - set(cfg)
    if missing:
        raise InputError(f"{args.config}: missing field(s) {sorted(missing)}")
    for key in ("n", "p", "k", "seed", "n_validation", "n_test"):
        if key in cfg and (not isinstance(cfg[key], int) or isinstance(cfg[key], bool)):
            raise InputError(f"{args.config}: field {key!r} must be an integer")
    for key in ("row_partition", "col_partition", "mu_support"):
        if key in cfg and not isinstance(cfg[key], list):
            raise InputError(f"{args.config}: field {key!r} must be a list")
    extra = {key: cfg.pop(key, 0) for key in ("n_validation", "n_test")}
    try:
        spec = GeneratorSpec(**cfg)
    except TypeError as exc:
        raise InputError(f"{args.config}: {exc}") from None
    except InputError as exc:
        raise InputError(f"{args.config}: {exc}") from None
    theta, truth = checkerboard_theta(spec)
    data = simulate_dataset(theta, spec.n, spec.sigma_noise, spec.seed)
    out = _out(args)
    io.write_matrix(out / "X.csv", data.designs)
    io.write_matrix(out / "Y.csv", data.responses)
    io.write_matrix(out / "theta_star.csv", theta)
    io.write_json(out / "truth.json", truth.to_dict())
    # independent draws share theta_star but use distinct seeds
    for offset, (name, size) in enumerate((("validation", extra["n_validation"]),
                                           ("test", extra["n_test"])), start=1):
        if size:
            if size < 1:
                raise InputError(f"n_{name} must be positive")
            d = simulate_dataset(theta, size, spec.sigma_noise, [spec.seed, offset])
            io.write_matrix(out / f"X_{name}.csv", d.designs)
            io.write_matrix(out / f"Y_{name}.csv", d.responses)
    return 0


def _fit_report(fit, rep, hp, formulation, mode):
    return {"formulation": formulation, "mode": mode, "hyperparameters": hp.to_dict(),
            "step": fit.info.get("gamma"), "objective_trace": fit.objective_trace,
            "iterations": fit.iterations, "converged": fit.converged,
            "inner_converged": fit.info.get("inner_converged"),
            "sigma_hat": rep.sigma, "tau_r": rep.tau_r, "tau_c": rep.tau_c,
            "n_row_clusters": rep.assignment.n_row_clusters,
            "n_col_clusters": rep.assignment.n_col_clusters}


def cmd_fit(args) -> int:
    data = _data(args.X, args.Y)
    hp = _hp(args)
    cfg = ProxConfig(inner_tol=args.inner_tol)
    pilot, edges = pilot_edges(data, hp.lambda1, hp, args.mode)
    init = pilot if args.formulation == 1 else (pilot, pilot)
    fit = fit_model(data, edges, hp, args.formulation, cfg, init)
    rep = assign_clusters(data, fit.theta, fit.clustered, args.mode)
    out = _out(args)
    io.write_matrix(out / "theta.csv", fit.theta)
    if fit.gamma is not None:
        io.write_matrix(out / "gamma.csv", fit.gamma)
    io.write_json(out / "clusters.json", rep.assignment.to_dict())
    io.write_json(out / "report.json", _fit_report(fit, rep, hp, args.formulation, args.mode))
    if not fit.converged:
        log.warning("fit did not converge; results written with converged=false")
    print(f"{rep.assignment.n_row_clusters} row clusters, "
          f"{rep.assignment.n_col_clusters} column clusters, converged={fit.converged}")
    return 0


def cmd_path(args) -> int:
    data = _data(args.X, args.Y)
    hp = _hp(args)
    if not args.grid:
        raise InputError("--grid is required for path")
    which = "lambda2-f1" if args.formulation == 1 else "lambda3-f2"
    _, edges = pilot_edges(data, hp.lambda1, hp, args.mode)
    path = solution_path(data, edges, args.grid, which, hp,
                         ProxConfig(inner_tol=args.inner_tol), args.mode)
    out = _out(args)
    points = []
    for idx, pt in enumerate(path.points):
        io.write_matrix(out / f"theta_{idx:03d}.csv", pt.theta)
        if pt.gamma is not None:
            io.write_matrix(out / f"gamma_{idx:03d}.csv", pt.gamma)
        points.append({"index": idx, "penalty": pt.penalty, "objective": pt.objective,
                       "iterations": pt.iterations, "converged": pt.converged,
                       "n_row_clusters": pt.n_row_clusters, "n_col_clusters": pt.n_col_clusters,
                       "clusters": pt.assignment.to_dict()})
        print(f"{pt.penalty:.6g}\t{pt.n_row_clusters}\t{pt.n_col_clusters}")
    io.write_json(out / "path.json", {"which": which, "hyperparameters": hp.to_dict(),
                                      "mode": args.mode, "points": points})
    return 0


def cmd_cv(args) -> int:
    data = _data(args.X, args.Y)
    validation = _maybe_validation(args)
    grids = default_grids(data, args.formulation)
    for key in ("lambda1", "lambda2", "lambda3"):
        given = getattr(args, f"grid_{key}")
        if given is not None:
            grids[key] = given
    split = Split(kind=args.split, folds=args.folds, seed=args.seed)
    res = cross_validate(data, grids, args.formulation, split, hp=_hp(args),
                         cfg=ProxConfig(inner_tol=args.inner_tol), mode=args.mode,
                         validation=validation, threads=_threads(args))
    out = _out(args)
    io.write_json(out / "hyperparameters.json", res.hyperparameters.to_dict())
    io.write_json(out / "cv.json", {"formulation": args.formulation, "mode": args.mode,
                                    "split": {"kind": split.kind, "folds": split.folds,
                                              "seed": split.seed,
                                              "explicit_validation": validation is not None},
                                    **res.to_dict()})
    h = res.hyperparameters
    print(f"lambda1={h.lambda1:.6g} lambda2={h.lambda2:.6g} lambda3={h.lambda3:.6g}")
    return 0


def _labels_from(path, name) -> ClusterAssignment:
    d = io.read_json(path)
    try:
        return ClusterAssignment.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: not a valid {name} file ({exc})") from None


def cmd_score(args) -> int:
    pred = _labels_from(args.clusters, "clusters")
    truth = _labels_from(args.truth, "truth")
    result = {"clustering": cluster_scores(pred, truth)}
    if args.theta is not None:
        theta = io.read_matrix(args.theta)
        if args.theta_star is not None:
            result["recovery"] = recovery_accuracy(theta, io.read_matrix(args.theta_star))
        if args.X is not None and args.Y is not None:
            result["rmse"] = prediction_rmse(_data(args.X, args.Y), theta)
    if args.out:
        io.write_json(args.out, result)
    for name, s in result["clustering"].items():
        print(f"{name}\tARI={s['ari']:.4f}\tF1={s['f1']:.4f}\tJI={s['jaccard']:.4f}")
    if "rmse" in result:
        print(f"rmse\t{result['rmse']:.6g}")
    if "recovery" in result:
        print(f"recovery\t{result['recovery']:.6g}")
    return 0


def cmd_baseline(args) -> int:
    data = _data(args.X, args.Y)
    hp = _hp(args)
    res = baseline_two_step(data, hp.lambda1, args.grid or None, _maybe_validation(args),
                            Split(kind=args.split, folds=args.folds, seed=args.seed), hp,
                            ProxConfig(inner_tol=args.inner_tol), args.mode)
    out = _out(args)
    io.write_matrix(out / "theta.csv", res.lasso)
    io.write_matrix(out / "gamma.csv", res.gamma)
    io.write_json(out / "clusters.json", res.report.assignment.to_dict())
    io.write_json(out / "report.json", {
        "lambda1": res.lambda1, "nu": res.nu, "nu_grid": res.nu_grid,
        "nu_rmse": res.nu_scores, "sigma_hat": res.report.sigma,
        "tau_r": res.report.tau_r, "tau_c": res.report.tau_c, "mode": args.mode,
        "n_row_clusters": res.report.assignment.n_row_clusters,
        "n_col_clusters": res.report.assignment.n_col_clusters})
    print(f"nu={res.nu:.6g}: {res.report.assignment.n_row_clusters} row clusters, "
          f"{res.report.assignment.n_col_clusters} column clusters")
    return 0


# ----------------------------------------------------------------------------
# parser


def _add_model_flags(p, grid_help=None):
    p.add_argument("--X", required=True, help="design matrix CSV (n x p)")
    p.add_argument("--Y", required=True, help="response matrix CSV (n x k)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--formulation", type=int, choices=(1, 2), default=1)
    p.add_argument("--lambda1", type=float, default=0.0)
    p.add_argument("--lambda2", type=float, default=0.0)
    p.add_argument("--lambda3", type=float, default=0.0)
    p.add_argument("--phi", type=float, default=20.0)
    p.add_argument("--kappa", type=int, default=5)
    p.add_argument("--gamma", type=float, default=None,
                   help="proximal step for formulation 1 (default: 1 / (2 lambda_max(X'X)))")
    p.add_argument("--mode", choices=MODES, default="bicluster")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--inner-tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $BIFUSE_THREADS or 1)")
    if grid_help:
        p.add_argument("--grid", type=_float_list, default=None, help=grid_help)


def _add_split_flags(p):
    p.add_argument("--X-val", default=None, help="explicit validation design")
    p.add_argument("--Y-val", default=None, help="explicit validation responses")
    p.add_argument("--split", choices=("holdout", "kfold"), default="holdout")
    p.add_argument("--folds", type=int, default=6)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bifuse", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a checkerboard dataset from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one formulation and extract clusters")
    _add_model_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("path", help="warm-started sweep over lambda2 (F1) or lambda3 (F2)")
    _add_model_flags(p, "comma-separated, strictly increasing penalty values")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("cv", help="select multipliers by validation RMSE")
    _add_model_flags(p)
    _add_split_flags(p)
    for key in ("lambda1", "lambda2", "lambda3"):
        p.add_argument(f"--grid-{key}", type=_float_list, default=None,
                       help=f"{key} values (default: data-scaled log grid)")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("score", help="compare clusters with the truth")
    p.add_argument("--clusters", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--theta", default=None)
    p.add_argument("--theta-star", default=None)
    p.add_argument("--X", default=None)
    p.add_argument("--Y", default=None)
    p.add_argument("--out", default=None, help="write scores as JSON here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("baseline", help="Lasso followed by convex bi-clustering")
    _add_model_flags(p, "comma-separated COBRA strengths to validate over")
    _add_split_flags(p)
    p.set_defaults(func=cmd_baseline)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalDivergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
