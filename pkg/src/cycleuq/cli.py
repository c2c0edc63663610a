"""Command-line entry point.

Subcommands cover the staged pipeline (gen-data, run-cycles,
fit-features, train, evaluate), the three batch experiments (deblur-exp,
sr-exp, verify-bounds) and plot-data for re-emitting figure CSVs from a
report. Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from .boosting import (
    load_classifier,
    predict_label,
    predict_proba,
    save_classifier,
    select_threshold,
    split_train_valid,
    tune_hyperparams,
)
from .config import ExperimentConfig, load_config, save_config
from .cycles import dump_trace_images, run_cycles, trace_to_csv
from .exceptions import DataError, NumericalError
from .experiments import (
    emit_plotdata,
    run_bounds_suite,
    run_deblur_experiment,
    run_sr_experiment,
)
from .image import read_raw
from .metrics import accuracy, average_precision, f1, roc_auc
from .operators import Blur, Pool, generate_motion_kernel, load_kernel, save_kernel
from .regression import feature_matrix, read_features_csv, write_features_csv
from .scenes import build_dataset, hash_ints, load_manifest
from .solvers import LandweberSolver, WienerSolver


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cycleuq", description=__doc__)
    parser.add_argument("--config", help="experiment config JSON")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--jobs", type=int, help="concurrent per-image workers")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-data", help="write a dataset and manifest")
    p = sub.add_parser("run-cycles", help="export per-image cycle traces as CSV")
    p.add_argument("manifest")
    p.add_argument("--dump-images", action="store_true",
                   help="also dump per-step PGM images")
    p = sub.add_parser("fit-features", help="cycle features for a manifest")
    p.add_argument("manifest")
    p = sub.add_parser("train", help="tune and train the OOD classifier")
    p.add_argument("features")
    p = sub.add_parser("evaluate", help="score a model on a feature CSV")
    p.add_argument("model")
    p.add_argument("features")
    sub.add_parser("deblur-exp", help="corrupted-input detection experiment")
    sub.add_parser("sr-exp", help="cross-class OOD experiment")
    sub.add_parser("verify-bounds", help="contraction bound verification suite")
    p = sub.add_parser("plot-data", help="re-emit figure CSVs from a report")
    p.add_argument("report")
    return parser


def _load_cfg(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        testbed = "sr" if args.command == "sr-exp" else "deblur"
        cfg = ExperimentConfig.default(testbed)
    return cfg.with_overrides(seed=args.seed, out=args.out, jobs=args.jobs)


def _solver_and_forward(cfg: ExperimentConfig, out_dir: str):
    """Single-operator setup for the staged subcommands; the kernel is
    persisted next to the data so later stages reuse it exactly."""
    if cfg.testbed == "sr":
        solver = LandweberSolver(factor=cfg.forward.pool_factor,
                                 lam=cfg.solver.landweber_lambda_grid[0],
                                 steps=cfg.solver.landweber_steps,
                                 clamp=cfg.solver.clamp)
        return solver, Pool(cfg.forward.pool_factor)
    kernel_path = os.path.join(out_dir, "kernel.txt")
    if os.path.exists(kernel_path):
        kernel = load_kernel(kernel_path)
    else:
        kernel = generate_motion_kernel(hash_ints(cfg.master_seed, 100, 0),
                                        cfg.forward.kernel_size,
                                        cfg.forward.kernel_steps)
        os.makedirs(out_dir, exist_ok=True)
        save_kernel(kernel_path, kernel)
    return WienerSolver(kernel, lam=cfg.solver.lambda_grid[-1]), Blur(kernel)


def _cmd_gen_data(cfg: ExperimentConfig) -> int:
    out = cfg.output_dir
    _, forward = _solver_and_forward(cfg, out)
    if cfg.testbed == "deblur":
        classes = [cfg.scene.class_id] * 2
        counts = [cfg.data.n_train_id, cfg.data.n_train_ood]
        noise_specs = [
            {"kind": "gaussian", "sigma": (0.0, cfg.noise.id_sigma_max)},
            {"kind": "gaussian", "sigma": (cfg.noise.id_sigma_max, cfg.noise.ood_sigma_max)},
        ]
    else:
        n_id = cfg.data.n_sr_id_pristine
        classes = [cfg.scene.class_id] * 5
        counts = [n_id, n_id, n_id,
                  max(1, cfg.data.n_sr_ood // 2), max(1, cfg.data.n_sr_ood // 2)]
        noise_specs = [
            {"kind": "none", "sigma": 0.0, "label": 0},
            {"kind": "gaussian", "sigma": [0.005, 0.01], "label": 0},
            {"kind": "snp", "sigma": [0.005, 0.01], "label": 0},
            {"kind": "gaussian", "sigma": (0.02, 0.05), "label": 1},
            {"kind": "snp", "sigma": (0.02, 0.05), "label": 1},
        ]
    rows = build_dataset(out, classes, counts, noise_specs, forward,
                         cfg.master_seed, size=cfg.image_size)
    save_config(os.path.join(out, "config.json"), cfg)
    print(f"wrote {len(rows)} rows to {os.path.join(out, 'manifest.jsonl')}")
    return 0


def _cmd_run_cycles(cfg: ExperimentConfig, manifest_path: str, dump: bool) -> int:
    rows = load_manifest(manifest_path)
    solver, forward = _solver_and_forward(cfg, cfg.output_dir)
    trace_dir = os.path.join(cfg.output_dir, "traces")
    os.makedirs(trace_dir, exist_ok=True)
    for i, row in enumerate(rows):
        trace = run_cycles(read_raw(row["path"]), solver, forward, cfg.n_cycles)
        trace_to_csv(trace, os.path.join(trace_dir, f"trace_{i:05d}.csv"))
        if dump:
            dump_trace_images(trace, os.path.join(trace_dir, f"trace_{i:05d}_steps"))
    print(f"wrote {len(rows)} traces to {trace_dir}")
    return 0


def _cmd_fit_features(cfg: ExperimentConfig, manifest_path: str) -> int:
    rows = load_manifest(manifest_path)
    solver, forward = _solver_and_forward(cfg, cfg.output_dir)
    xs = [read_raw(row["path"]) for row in rows]
    features = feature_matrix(xs, solver, forward, cfg.n_cycles, jobs=cfg.jobs)
    labels = [row["label"] for row in rows]
    eps0 = None
    if all(row.get("ground_truth_path") for row in rows):
        from .cycles import actual_uncertainty  # local import keeps CLI light
        eps0 = []
        for row, x in zip(rows, xs):
            trace = run_cycles(x, solver, forward, cfg.n_cycles)
            eps0.append(actual_uncertainty(trace, read_raw(row["ground_truth_path"])).eps0_norm)
        eps0 = np.array(eps0)
    path = os.path.join(cfg.output_dir, "features.csv")
    os.makedirs(cfg.output_dir, exist_ok=True)
    write_features_csv(path, features, labels, eps0)
    print(f"wrote {features.shape[0]} feature rows to {path}")
    return 0


def _cmd_train(cfg: ExperimentConfig, features_path: str) -> int:
    X, y, _ = read_features_csv(features_path)
    hp, model = tune_hyperparams(X, y, cfg.classifier.budget, cfg.master_seed)
    (_, _), (X_valid, y_valid) = split_train_valid(X, y, cfg.master_seed)
    model.threshold = select_threshold(model, X_valid, y_valid)
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "model.json")
    save_classifier(path, model)
    print(f"trained {hp.n_trees} trees (depth {hp.max_depth}), "
          f"threshold {model.threshold:.4f}, saved to {path}")
    return 0


def _cmd_evaluate(cfg: ExperimentConfig, model_path: str, features_path: str) -> int:
    model = load_classifier(model_path)
    X, y, _ = read_features_csv(features_path)
    if model.n_features != X.shape[1]:
        raise DataError(
            f"model expects {model.n_features} features, CSV has {X.shape[1]}")
    probs = predict_proba(model, X)
    preds = predict_label(model, X)
    both = y.min() != y.max()
    line = {
        "accuracy": accuracy(preds, y),
        "auc": roc_auc(probs, y) if both else None,
        "ap": average_precision(probs, y) if both else None,
        "f1": f1(preds, y),
        "n_samples": int(len(y)),
    }
    print(json.dumps(line, sort_keys=True))
    return 0


def _cmd_plot_data(report_path: str, out_dir: str) -> int:
    with open(report_path, "r", encoding="ascii") as fh:
        report = json.load(fh)
    written = emit_plotdata(report, out_dir)
    print(f"wrote {len(written)} plot files to {out_dir}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_cfg(args)
        if args.command == "gen-data":
            return _cmd_gen_data(cfg)
        if args.command == "run-cycles":
            return _cmd_run_cycles(cfg, args.manifest, args.dump_images)
        if args.command == "fit-features":
            return _cmd_fit_features(cfg, args.manifest)
        if args.command == "train":
            return _cmd_train(cfg, args.features)
        if args.command == "evaluate":
            return _cmd_evaluate(cfg, args.model, args.features)
        if args.command == "deblur-exp":
            report = run_deblur_experiment(cfg)
            print(json.dumps({"report": os.path.join(cfg.output_dir, "report.json"),
                              "timings": report["timings"]}, sort_keys=True))
            return 0
        if args.command == "sr-exp":
            report = run_sr_experiment(cfg)
            print(json.dumps({"report": os.path.join(cfg.output_dir, "report.json"),
                              "matrix": report["matrix"]}, sort_keys=True))
            return 0
        if args.command == "verify-bounds":
            report = run_bounds_suite(cfg)
            print(json.dumps({k: report[k] for k in
                              ("L_hat", "l_hat", "eq6_pass_rate", "eq7_pass_rate",
                               "eq9or10_pass_rate")}, sort_keys=True))
            return 0
        if args.command == "plot-data":
            return _cmd_plot_data(args.report, cfg.output_dir)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
