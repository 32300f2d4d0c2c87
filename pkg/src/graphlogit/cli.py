"""Command-line interface.

Exit status is 0 on success, 1 for bad input (including usage errors) and 2
when a numerical step fails, such as a separated null fit.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import __version__
from .em import EmConfig, fit_em
from .evaluation import predict_proba, roc_curve
from .graph import GraphError
from .io import (
    InputError,
    RunManifest,
    fit_from_report,
    load_dataset,
    pca_fit,
    read_features,
    read_json,
    read_nodes,
    read_scores,
    save_dataset,
    sim_config_from_dict,
    study_spec_from_dict,
    write_json,
    write_replicate_table,
    write_roc_points,
    write_scores,
    write_weights,
)
from .logistic import SeparationError, fit_logistic
from .score_test import DegenerateStatisticError, default_grid, run_test
from .simulation import bias_mse_study, generate_case_with_latent, size_power_study

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("graphlogit")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _levels(text: str):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid levels {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("grid levels must be non-empty")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphlogit", description=(
        "Latent logistic regression on networks: score test for network "
        "dependence, EM estimation, prediction and simulation studies."))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(p):
        p.add_argument("--nodes", required=True, help="node table id,y,x1,...,xp")
        p.add_argument("--edges", required=True, help="edge list file")
        p.add_argument("--standardize", action="store_true",
                       help="scale covariates to zero mean and unit variance")

    p = sub.add_parser("simulate", help="draw a dataset from a simulation config")
    p.add_argument("--config", required=True, help="JSON simulation config")
    p.add_argument("--out-dir", required=True, help="directory for nodes.csv, edges.txt, manifest.json")
    p.add_argument("--seed", type=int, help="overrides the config seed")

    p = sub.add_parser("test", help="score test of no network dependence")
    data_args(p)
    p.add_argument("--grid-levels", type=_levels, default=(-2.0, -1.0, 0.0, 1.0, 2.0),
                   help="comma-separated levels for each susceptibility coefficient")
    p.add_argument("--B", type=int, default=1000, help="resampling replicates")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="report path (default stdout)")

    p = sub.add_parser("fit", help="EM fit of the latent model")
    data_args(p)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--accelerate", choices=("newton", "squarem", "none"), default="newton")
    p.add_argument("--beta-update", choices=("exact", "profiled"), default="exact")
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--weights", help="write posterior susceptibility weights as CSV")

    p = sub.add_parser("predict", help="predicted outcome probabilities from a fit report")
    p.add_argument("--fit", required=True, help="report written by 'fit'")
    p.add_argument("--nodes", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--mode", choices=("marginal", "sampled"), default="marginal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="scores CSV id,score,y")
    p.add_argument("--report", help="JSON summary path")

    p = sub.add_parser("study", help="run a Monte Carlo study from a config")
    p.add_argument("--config", required=True, help="JSON study config")
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--table", help="flat per-replicate CSV")
    p.add_argument("--workers", type=int, help="overrides n_workers from the config")

    p = sub.add_parser("roc", help="ROC points and AUC for a score file")
    p.add_argument("--scores", required=True, help="CSV with id,score and optionally y")
    p.add_argument("--nodes", help="node table supplying labels by id")
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--points", help="CSV of fpr,tpr points")

    p = sub.add_parser("pca", help="reduce a feature table to k principal components")
    p.add_argument("--features", required=True, help="CSV id,f1,...,fd")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True, help="CSV id,pc1,...,pck")
    p.add_argument("--report", help="JSON summary path")
    return parser


def _require_files(*paths):
    for path in paths:
        if path is not None and not os.path.isfile(path):
            raise InputError(f"{path}: file not found")


def _require_parent(*paths):
    for path in paths:
        if path in (None, "-"):
            continue
        parent = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(parent):
            raise InputError(f"{path}: output directory does not exist")


def _manifest(args, inputs, config, seed, output) -> dict:
    return RunManifest(args.command, inputs, config, seed, output, __version__).to_dict()


def _emit(path, report):
    text = write_json(path, report)
    if path in (None, "-"):
        sys.stdout.write(text)


def cmd_simulate(args):
    _require_files(args.config)
    raw = read_json(args.config)
    cfg = sim_config_from_dict(raw)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if not os.path.isdir(args.out_dir):
        raise InputError(f"{args.out_dir}: output directory does not exist")
    rng = np.random.default_rng(cfg.seed)
    data, zeta = generate_case_with_latent(cfg, rng)
    nodes = os.path.join(args.out_dir, "nodes.csv")
    edges = os.path.join(args.out_dir, "edges.txt")
    save_dataset(data, nodes, edges)
    report = {
        "manifest": _manifest(args, {"config": args.config}, cfg.to_dict(), cfg.seed, args.out_dir),
        "n": data.n,
        "p": data.p,
        "edge_count": data.graph.edge_count,
        "mean_y": float(data.Y.mean()),
        "susceptible_fraction": float(zeta.mean()),
        "files": {"nodes": nodes, "edges": edges},
    }
    write_json(os.path.join(args.out_dir, "manifest.json"), report)
    return report


def _load(args):
    _require_files(args.nodes, args.edges)
    return load_dataset(args.nodes, args.edges, standardize_x=args.standardize)


def cmd_test(args):
    _require_parent(args.out)
    data = _load(args)
    if args.B < 1:
        raise InputError("--B must be positive")
    if not 0 < args.alpha < 1:
        raise InputError("--alpha must lie in (0, 1)")
    grid = default_grid(data.p, args.grid_levels)
    res = run_test(data, grid, B=args.B, alpha=args.alpha, seed=args.seed,
                   n_workers=args.workers)
    config = {"grid_levels": list(args.grid_levels), "B": args.B, "alpha": args.alpha,
              "standardize": args.standardize}
    report = {
        "manifest": _manifest(args, {"nodes": args.nodes, "edges": args.edges},
                              config, args.seed, args.out),
        "test": res.to_dict(),
    }
    _emit(args.out, report)
    return report


def cmd_fit(args):
    _require_parent(args.out, args.weights)
    data = _load(args)
    try:
        cfg = EmConfig(tol=args.tol, max_iter=args.max_iter, accelerate=args.accelerate,
                       beta_update=args.beta_update)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    null = fit_logistic(data.X, data.Y)
    if null.separated:
        raise SeparationError("logistic fit used as the EM start is separated")
    fit = fit_em(data, cfg, null_fit=null)
    config = {"tol": args.tol, "max_iter": args.max_iter, "accelerate": args.accelerate,
              "beta_update": args.beta_update, "standardize": args.standardize}
    report = {
        "manifest": _manifest(args, {"nodes": args.nodes, "edges": args.edges},
                              config, None, args.out),
        "fit": fit.to_dict(include_weights=True),
        "logistic": {"eta": null.eta.tolist(), "log_lik": null.log_lik},
        "ids": list(data.ids),
    }
    if not fit.phi_identified:
        report["note"] = "delta is near zero; the susceptibility coefficients are not identified"
    if args.weights:
        write_weights(args.weights, data.ids, fit.weights)
    _emit(args.out, report)
    return report


def cmd_predict(args):
    _require_files(args.fit, args.nodes, args.edges)
    _require_parent(args.out, args.report)
    rep = read_json(args.fit)
    fit = fit_from_report(rep)
    standardize_x = bool(rep.get("manifest", {}).get("config", {}).get("standardize", False))
    data = load_dataset(args.nodes, args.edges, standardize_x=standardize_x)
    if "ids" in rep and list(rep["ids"]) != list(data.ids):
        raise InputError("node ids differ from those of the fitted dataset")
    scores = predict_proba(fit, data, mode=args.mode, seed=args.seed)
    write_scores(args.out, data.ids, scores, labels=data.Y)
    report = {
        "manifest": _manifest(args, {"fit": args.fit, "nodes": args.nodes, "edges": args.edges},
                              {"mode": args.mode, "standardize": standardize_x},
                              args.seed, args.out),
        "n": data.n,
        "mean_score": float(scores.mean()),
    }
    if args.report:
        write_json(args.report, report)
    return report


def cmd_study(args):
    _require_files(args.config)
    _require_parent(args.out, args.table)
    spec = study_spec_from_dict(read_json(args.config))
    sim = spec.sim
    if args.workers is not None:
        sim = replace(sim, n_workers=args.workers)
    if spec.kind == "size_power":
        rep = size_power_study(sim, spec.deltas)
    else:
        rep = bias_mse_study(sim, spec.deltas, estimator=spec.estimator)
    report = {
        "manifest": _manifest(args, {"config": args.config}, rep.config, sim.seed, args.out),
        "study": rep.to_dict(),
    }
    if args.table:
        write_replicate_table(args.table, rep)
    _emit(args.out, report)
    return report


def cmd_roc(args):
    _require_files(args.scores, args.nodes)
    _require_parent(args.out, args.points)
    ids, scores, labels = read_scores(args.scores)
    if args.nodes:
        node_ids, _, y = read_nodes(args.nodes)
        lookup = dict(zip(node_ids, y))
        missing = [i for i in ids if i not in lookup]
        if missing:
            raise InputError(f"score ids missing from {args.nodes}: {missing[:5]}")
        labels = np.array([lookup[i] for i in ids])
    if labels is None:
        raise InputError("labels needed: add a 'y' column to the scores or pass --nodes")
    roc = roc_curve(scores, labels)
    if args.points:
        write_roc_points(args.points, roc)
    report = {
        "manifest": _manifest(args, {"scores": args.scores, "nodes": args.nodes},
                              {}, None, args.out),
        "roc": roc.to_dict(),
    }
    _emit(args.out, report)
    return report


def cmd_pca(args):
    _require_files(args.features)
    _require_parent(args.out, args.report)
    ids, F = read_features(args.features)
    res = pca_fit(F, args.k)
    with open(args.out, "w") as fh:
        fh.write(",".join(["id"] + [f"pc{j + 1}" for j in range(args.k)]) + "\n")
        for label, row in zip(ids, res.scores):
            fh.write(",".join([label] + [repr(float(v)) for v in row]) + "\n")
    report = {
        "manifest": _manifest(args, {"features": args.features}, {"k": args.k}, None, args.out),
        "explained_variance_ratio": res.explained_variance_ratio.tolist(),
    }
    if args.report:
        write_json(args.report, report)
    return report


COMMANDS = {
    "simulate": cmd_simulate,
    "test": cmd_test,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "study": cmd_study,
    "roc": cmd_roc,
    "pca": cmd_pca,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    try:
        COMMANDS[args.command](args)
    except (InputError, GraphError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SeparationError, DegenerateStatisticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
