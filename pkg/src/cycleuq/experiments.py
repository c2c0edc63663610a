"""End-to-end experiment protocols.

Three batch runs are provided: corrupted-input detection with the blur
testbed, cross-class OOD detection with the pooling testbed, and the
contraction-bound verification suite. Each run is fully determined by
(config, master seed): every stochastic stage draws from its own derived
stream, per-image work is aggregated in manifest order, and all report
files are written with round-trippable float formatting, so a rerun
reproduces them byte for byte.
"""

import csv
import dataclasses
import hashlib
import json
import os
import time

import numpy as np

from .boosting import (
    feature_importance,
    predict_label,
    predict_proba,
    select_threshold,
    split_train_valid,
    tune_hyperparams,
)
from .bounds import estimate_lipschitz, verification_report
from .config import ExperimentConfig
from .cycles import actual_uncertainty, run_cycles
from .exceptions import DataError
from .image import diff_norm
from .linear_model import fit_linear, predict, r_squared
from .metrics import accuracy, average_precision, f1, roc_auc
from .noise import add_gaussian, add_snp
from .operators import Blur, BlurKernel, Pool, blur_forward, generate_motion_kernel, pool_forward
from .regression import FEATURE_NAMES, extract_features, feature_matrix, fit_exponential, write_features_csv
from .rng import make_rng
from .scenes import SCENE_CLASSES, SceneSpec, generate_scene, hash_ints, ood_label, save_manifest
from .solvers import LandweberSolver, WienerSolver, calibrate_solver

GAUSS_LEVELS = (0.005, 0.009, 0.01, 0.02, 0.05, 0.10)
SNP_LEVELS = (0.01, 0.02)
AGG_RANGE = (0.01, 0.10)
DX1_INDEX = FEATURE_NAMES.index("dx1")


# ---------------------------------------------------------------------------
# record generation
# ---------------------------------------------------------------------------

def _draw_sigma(rng, sigma_spec) -> float:
    if isinstance(sigma_spec, (int, float)):
        return float(sigma_spec)
    if isinstance(sigma_spec, tuple) and len(sigma_spec) == 2:
        return float(rng.uniform(sigma_spec[0], sigma_spec[1]))
    if isinstance(sigma_spec, list) and sigma_spec:
        return float(sigma_spec[int(rng.integers(0, len(sigma_spec)))])
    raise DataError(f"bad sigma spec {sigma_spec!r}")


def _corrupt(clean, kind: str, sigma: float, seed: int):
    if kind == "gaussian":
        return add_gaussian(clean, sigma, seed)
    if kind == "snp":
        return add_snp(clean, sigma, seed)
    if kind == "none":
        return clean.copy()
    raise DataError(f"unknown noise kind {kind!r}")


def _records(cfg: ExperimentConfig, tag: int, n: int, kind: str, sigma_spec,
             measure, label=None, scene_class=None, fixed_scene_seed=None,
             kernel_ids=None, noise_domain: str = "measurement") -> list[dict]:
    """Generate n (measurement, truth) records for one condition.

    `measure` maps (scene, record_index) to the clean measurement;
    `kernel_ids` optionally tags each record with the kernel it used.
    Noise lands on the measurement by default; with
    noise_domain="measurement" the scene is corrupted before measuring,
    matching protocols where whole images are degraded upstream.
    """
    seed = cfg.master_seed
    group_class = scene_class or cfg.scene.class_id
    out = []
    for i in range(n):
        cls = group_class
        if cls == "mixed":
            cls = SCENE_CLASSES[int(make_rng(seed, tag, i, 3).integers(0, len(SCENE_CLASSES)))]
        scene_seed = fixed_scene_seed if fixed_scene_seed is not None else hash_ints(seed, tag, i, 0)
        scene = generate_scene(SceneSpec(class_id=cls, size=cfg.image_size, seed=scene_seed))
        sigma = _draw_sigma(make_rng(seed, tag, i, 1), sigma_spec)
        if noise_domain == "signal":
            corrupted = _corrupt(scene, kind, sigma, hash_ints(seed, tag, i, 2))
            x = measure(corrupted, i)
        else:
            x = _corrupt(measure(scene, i), kind, sigma, hash_ints(seed, tag, i, 2))
        out.append({
            "x": x,
            "truth": scene,
            "sigma": sigma,
            "noise_kind": kind,
            "label": int(label if label is not None else ood_label(kind, sigma)),
            "class": cls,
            "kernel_id": None if kernel_ids is None else int(kernel_ids[i]),
            "sha256": hashlib.sha256(x.tobytes()).hexdigest(),
        })
    return out


def _manifest_rows(records) -> list[dict]:
    return [
        {k: rec[k] for k in ("sigma", "noise_kind", "label", "class", "kernel_id", "sha256")}
        for rec in records
    ]


def _featurize_records(records, solvers, forwards, n_cycles, jobs):
    xs = [rec["x"] for rec in records]
    features, traces = feature_matrix(xs, solvers, forwards, n_cycles,
                                      jobs=jobs, with_traces=True)
    eps0 = np.array([
        actual_uncertainty(tr, rec["truth"]).eps0_norm
        for tr, rec in zip(traces, records)
    ])
    labels = np.array([rec["label"] for rec in records])
    return features, labels, eps0, traces


def _eval_metrics(probs, preds, labels) -> dict:
    both = labels.min() != labels.max() if len(labels) else False
    return {
        "accuracy": accuracy(preds, labels),
        "auc": roc_auc(probs, labels) if both else None,
        "ap": average_precision(probs, labels) if both else None,
        "f1": f1(preds, labels),
        "n_samples": int(len(labels)),
    }


def _evaluate_models(models, features_by_method, labels, experiment_id, subset,
                     noise_kind, level) -> list[dict]:
    rows = []
    for method, model in models.items():
        X = features_by_method[method]
        probs = predict_proba(model, X)
        preds = predict_label(model, X)
        entry = {
            "experiment_id": experiment_id,
            "subset": subset,
            "method": method,
            "noise_kind": noise_kind,
            "level": level,
        }
        entry.update(_eval_metrics(probs, preds, labels))
        rows.append(entry)
    return rows


def _train_classifier_pair(features, labels, budget, seed):
    """Five-feature classifier and the single-feature baseline, trained
    through the identical tune/threshold code path."""
    trained = {}
    for method, X in (("cycle", features), ("dx1_baseline", features[:, [DX1_INDEX]])):
        hp, model = tune_hyperparams(X, labels, budget, seed)
        (_, _), (X_valid, y_valid) = split_train_valid(X, labels, seed)
        model.threshold = select_threshold(model, X_valid, y_valid)
        trained[method] = (hp, model)
    return trained


# ---------------------------------------------------------------------------
# deblur experiment
# ---------------------------------------------------------------------------

def run_deblur_experiment(cfg: ExperimentConfig) -> dict:
    if cfg.testbed != "deblur":
        raise DataError(f"config testbed is {cfg.testbed!r}, expected 'deblur'")
    timings = {}
    clock = time.perf_counter
    seed = cfg.master_seed
    size = cfg.image_size
    fwd_cfg = cfg.forward

    # One core kernel plays the role of the inverse the solver has
    # implicitly learned; each image is measured with a kernel from a
    # family around that core, so the solver is never exactly matched.
    t = clock()
    core_kernel = generate_motion_kernel(hash_ints(seed, 100, 0),
                                         fwd_cfg.kernel_size, fwd_cfg.kernel_steps)

    def family_kernel(tag: int, i: int) -> BlurKernel:
        variant = generate_motion_kernel(hash_ints(seed, tag, 1 + i),
                                         fwd_cfg.kernel_size, fwd_cfg.kernel_steps)
        # deviation from the core varies kernel to kernel, up to the
        # configured ceiling, so solver mismatch spans a wide range
        mix = fwd_cfg.kernel_mix * make_rng(seed, tag, 7, i).uniform(0.2, 1.0)
        return BlurKernel((1.0 - mix) * core_kernel.weights + mix * variant.weights)

    train_kernels = [family_kernel(100, i) for i in range(fwd_cfg.n_train_kernels)]
    test_kernels = [family_kernel(101, i) for i in range(fwd_cfg.n_test_kernels)]
    timings["kernels"] = clock() - t

    def kernel_cycle(kernels):
        def measure(scene, i):
            return blur_forward(scene, kernels[i % len(kernels)])
        return measure

    # calibrate the fixed solver on the in-distribution mix of kernels
    # and noise levels it will actually face
    t = clock()
    n_cal = cfg.solver.n_calibration
    cal_records = _records(
        cfg, tag=102, n=n_cal, kind="gaussian",
        sigma_spec=(0.0, cfg.noise.id_sigma_max),
        measure=kernel_cycle(train_kernels),
    )
    id_pairs = [(rec["x"], rec["truth"]) for rec in cal_records]
    proto = WienerSolver(core_kernel, lam=cfg.solver.lambda_grid[0])
    solver = calibrate_solver(proto, id_pairs, cfg.solver.lambda_grid)
    lam = solver.lam
    timings["calibration"] = clock() - t

    def specs_for(records, kernels):
        forwards = [Blur(kernels[rec["kernel_id"]]) for rec in records]
        return solver, forwards

    # training data: ID below the corruption threshold, OOD at or above it
    t = clock()
    n_id, n_ood = cfg.data.n_train_id, cfg.data.n_train_ood
    train_records = _records(
        cfg, tag=110, n=n_id, kind="gaussian",
        sigma_spec=(0.0, cfg.noise.id_sigma_max),
        measure=kernel_cycle(train_kernels),
        kernel_ids=[i % len(train_kernels) for i in range(n_id)],
    ) + _records(
        cfg, tag=111, n=n_ood, kind="gaussian",
        sigma_spec=(cfg.noise.id_sigma_max, cfg.noise.ood_sigma_max),
        measure=kernel_cycle(train_kernels),
        kernel_ids=[i % len(train_kernels) for i in range(n_ood)],
    )
    solvers, forwards = specs_for(train_records, train_kernels)
    features, labels, _, _ = _featurize_records(
        train_records, solvers, forwards, cfg.n_cycles, cfg.jobs)
    timings["train_features"] = clock() - t

    t = clock()
    trained = _train_classifier_pair(features, labels, cfg.classifier.budget,
                                     hash_ints(seed, 140))
    timings["classifier"] = clock() - t

    # linear error predictor: one held-out scene, one held-out kernel,
    # noise level is the only variable
    t = clock()
    pred_scene_seed = hash_ints(seed, 130, 0, 0)
    pred_kernel = test_kernels[0]
    pred_solver = solver
    pred_forward = Blur(pred_kernel)

    def pred_measure(scene, i):
        return blur_forward(scene, pred_kernel)

    pred_train = _records(cfg, tag=131, n=cfg.data.n_predictor_train, kind="gaussian",
                          sigma_spec=(0.0, cfg.noise.ood_sigma_max),
                          measure=pred_measure, scene_class="shapes",
                          fixed_scene_seed=pred_scene_seed)
    pred_test = _records(cfg, tag=132, n=cfg.data.n_predictor_test, kind="snp",
                         sigma_spec=(0.0, cfg.noise.ood_sigma_max),
                         measure=pred_measure, scene_class="shapes",
                         fixed_scene_seed=pred_scene_seed)
    Xp_train, _, eps0_train, traces_train = _featurize_records(
        pred_train, pred_solver, pred_forward, cfg.n_cycles, cfg.jobs)
    Xp_test, _, eps0_test, _ = _featurize_records(
        pred_test, pred_solver, pred_forward, cfg.n_cycles, cfg.jobs)
    linear = fit_linear(Xp_train, eps0_train, ridge=cfg.classifier.ridge)
    pred_on_train = predict(linear, Xp_train)
    pred_on_test = predict(linear, Xp_test)
    predictor_summary = {
        "train_r2": r_squared(pred_on_train, eps0_train),
        "transfer_r2": r_squared(pred_on_test, eps0_test),
        "weights": [float(w) for w in linear.weights],
        "intercept": linear.intercept,
        "ridge": linear.ridge,
    }
    timings["predictor"] = clock() - t

    # evaluation: balanced per-level sets plus range aggregates, on
    # held-out kernels and scenes
    t = clock()
    evaluations = []
    accuracy_rows = []
    test_hashes = set()
    conditions = (
        [("gaussian", lvl, f"gaussian_{lvl}") for lvl in GAUSS_LEVELS]
        + [("gaussian", AGG_RANGE, "gaussian_agg")]
        + [("snp", lvl, f"snp_{lvl}") for lvl in SNP_LEVELS]
        + [("snp", AGG_RANGE, "snp_agg")]
    )
    models = {m: model for m, (hp, model) in trained.items()}
    for ci, (kind, level, subset) in enumerate(conditions):
        n_side = cfg.data.n_test_per_level
        ood_side = _records(
            cfg, tag=120 + ci, n=n_side, kind=kind, sigma_spec=level,
            measure=kernel_cycle(test_kernels),
            kernel_ids=[i % len(test_kernels) for i in range(n_side)],
        )
        id_side = _records(
            cfg, tag=150 + ci, n=n_side, kind="gaussian",
            sigma_spec=(0.0, cfg.noise.id_sigma_max),
            measure=kernel_cycle(test_kernels),
            kernel_ids=[i % len(test_kernels) for i in range(n_side)],
        )
        records = ood_side + id_side
        test_hashes.update(rec["sha256"] for rec in records)
        solvers, forwards = specs_for(records, test_kernels)
        X, y, _, _ = _featurize_records(records, solvers, forwards, cfg.n_cycles, cfg.jobs)
        by_method = {"cycle": X, "dx1_baseline": X[:, [DX1_INDEX]]}
        rows = _evaluate_models(models, by_method, y, "deblur", subset, kind,
                                level if isinstance(level, float) else "agg")
        evaluations.extend(rows)
        if kind == "gaussian" and isinstance(level, float):
            acc = {row["method"]: row["accuracy"] for row in rows}
            accuracy_rows.append([level, acc["cycle"], acc["dx1_baseline"]])
    timings["evaluation"] = clock() - t

    train_hashes = {rec["sha256"] for rec in train_records}
    leakage = {
        "disjoint": not (train_hashes & test_hashes),
        "n_train": len(train_hashes),
        "n_test": len(test_hashes),
    }
    if not leakage["disjoint"]:
        raise DataError("test leakage: shared image hashes between train and test")

    importance = feature_importance(models["cycle"])
    first_trace = traces_train[0]
    plots = {
        "cycle_curves": _cycle_curve_rows(first_trace),
        "scatter_eps": {
            "header": ["eps_y_hat", "eps0"],
            "rows": [[float(Xp_train[i, FEATURE_NAMES.index("eps_y")]), float(eps0_train[i])]
                     for i in range(Xp_train.shape[0])],
        },
        "predicted_vs_actual": {
            "header": ["subset", "predicted", "actual"],
            "rows": [["train", float(p), float(a)] for p, a in zip(pred_on_train, eps0_train)]
            + [["snp_test", float(p), float(a)] for p, a in zip(pred_on_test, eps0_test)],
        },
        "accuracy_vs_sigma": {
            "header": ["sigma", "cycle", "dx1_baseline"],
            "rows": accuracy_rows,
        },
        "importance": {
            "header": ["feature", "importance"],
            "rows": [[FEATURE_NAMES[i], float(importance[i])] for i in range(len(FEATURE_NAMES))],
        },
    }

    report = {
        "testbed": "deblur",
        "config": cfg.to_dict(),
        "calibrated_lambda": float(lam),
        "classifier": {
            "hp": dataclasses.asdict(trained["cycle"][0]),
            "threshold": float(models["cycle"].threshold),
            "importance": [float(v) for v in importance],
        },
        "baseline": {
            "hp": dataclasses.asdict(trained["dx1_baseline"][0]),
            "threshold": float(models["dx1_baseline"].threshold),
        },
        "predictor": predictor_summary,
        "evaluations": evaluations,
        "leakage_check": leakage,
        "plots": plots,
        "timings": {k: round(v, 3) for k, v in timings.items()},
    }

    _write_deblur_outputs(cfg, report, features, labels, train_records, _manifest_rows(train_records))
    return report


def _cycle_curve_rows(trace) -> dict:
    fit_y = fit_exponential(trace.dy, 1)
    fit_x = fit_exponential(trace.dx[1:], 2)
    rows = []
    for n in range(1, trace.n_cycles + 2):
        dy = float(trace.dy[n - 1]) if n <= trace.n_cycles else None
        dy_fit = (fit_y.eps_hat * fit_y.k_hat**n + fit_y.b_hat) if n <= trace.n_cycles else None
        dx_fit = (fit_x.eps_hat * fit_x.k_hat**n + fit_x.b_hat) if n >= 2 else None
        rows.append([n, dy, float(trace.dx[n - 1]), dy_fit, dx_fit])
    return {"header": ["n", "dy", "dx", "dy_fit", "dx_fit"], "rows": rows}


def _write_deblur_outputs(cfg, report, features, labels, train_records, manifest_rows):
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    _write_report_json(os.path.join(out, "report.json"), report)
    write_features_csv(os.path.join(out, "features_train.csv"), features, labels)
    save_manifest(os.path.join(out, "manifest_train.jsonl"), manifest_rows)
    _write_metrics_csv(os.path.join(out, "metrics.csv"), report["evaluations"])
    _write_table_csv(os.path.join(out, "table1.csv"), report["evaluations"])
    emit_plotdata(report, out)


# ---------------------------------------------------------------------------
# super-resolution experiment
# ---------------------------------------------------------------------------

def run_sr_experiment(cfg: ExperimentConfig) -> dict:
    if cfg.testbed != "sr":
        raise DataError(f"config testbed is {cfg.testbed!r}, expected 'sr'")
    timings = {}
    clock = time.perf_counter
    seed = cfg.master_seed
    factor = cfg.forward.pool_factor
    forward = Pool(factor)
    n_id = cfg.data.n_sr_id_pristine
    n_ood_half = max(1, cfg.data.n_sr_ood // 2)

    def pool_measure(scene, i):
        return pool_forward(scene, factor)

    per_class = {}
    matrix = {}
    matrix_baseline = {}
    t_all = clock()
    for ci, cls in enumerate(SCENE_CLASSES):
        base_tag = 200 + 20 * ci
        # calibration set mirrors the ID distribution: pristine images
        # plus the light augmentation noise, injected upstream of pooling
        n_half = max(1, cfg.solver.n_calibration // 2)
        cal_records = (
            _records(cfg, tag=base_tag, n=cfg.solver.n_calibration, kind="none",
                     sigma_spec=0.0, measure=pool_measure, scene_class=cls)
            + _records(cfg, tag=base_tag + 8, n=n_half, kind="gaussian",
                       sigma_spec=[0.005, 0.01], label=0, measure=pool_measure,
                       scene_class=cls, noise_domain="measurement")
            + _records(cfg, tag=base_tag + 9, n=n_half, kind="snp",
                       sigma_spec=[0.005, 0.01], label=0, measure=pool_measure,
                       scene_class=cls, noise_domain="measurement")
        )
        pairs = [(rec["x"], rec["truth"]) for rec in cal_records]
        proto = LandweberSolver(factor=factor, lam=cfg.solver.landweber_lambda_grid[0],
                                steps=cfg.solver.landweber_steps, clamp=cfg.solver.clamp)
        solver = calibrate_solver(proto, pairs, cfg.solver.landweber_lambda_grid)

        # training recipe: pristine + lightly-noised ID, noisier same-class
        # OOD; noise corrupts the image before it is measured
        groups = [
            ("none", 0.0, 0, n_id),
            ("gaussian", [0.005, 0.01], 0, n_id),
            ("snp", [0.005, 0.01], 0, n_id),
            ("gaussian", (0.02, 0.05), 1, n_ood_half),
            ("snp", (0.02, 0.05), 1, n_ood_half),
        ]
        records = []
        for gi, (kind, sig, label, count) in enumerate(groups):
            records += _records(cfg, tag=base_tag + 1 + gi, n=count, kind=kind,
                                sigma_spec=sig, label=label,
                                measure=pool_measure, scene_class=cls,
                                noise_domain="measurement")
        X, y, _, _ = _featurize_records(records, solver, forward, cfg.n_cycles, cfg.jobs)
        trained = _train_classifier_pair(X, y, cfg.classifier.budget,
                                         hash_ints(seed, base_tag + 7))
        per_class[cls] = {
            "solver_lambda": float(solver.lam),
            "threshold": float(trained["cycle"][1].threshold),
            "hp": dataclasses.asdict(trained["cycle"][0]),
            "importance": [float(v) for v in feature_importance(trained["cycle"][1])],
            "_models": trained,
            "_solver": solver,
            "_train_hashes": {rec["sha256"] for rec in records},
        }

    evaluations = []
    for ci, cls in enumerate(SCENE_CLASSES):
        info = per_class[cls]
        solver = info["_solver"]
        models = {m: model for m, (hp, model) in info["_models"].items()}
        matrix[cls] = {}
        matrix_baseline[cls] = {}
        for cj, test_cls in enumerate(SCENE_CLASSES):
            test_records = _records(cfg, tag=280 + cj, n=cfg.data.n_sr_test,
                                    kind="none", sigma_spec=0.0,
                                    label=0 if test_cls == cls else 1,
                                    measure=pool_measure, scene_class=test_cls)
            overlap = info["_train_hashes"] & {r["sha256"] for r in test_records}
            if overlap:
                raise DataError("test leakage: shared image hashes between train and test")
            X, y, _, _ = _featurize_records(test_records, solver, forward,
                                            cfg.n_cycles, cfg.jobs)
            by_method = {"cycle": X, "dx1_baseline": X[:, [DX1_INDEX]]}
            rows = _evaluate_models(models, by_method, y, "sr",
                                    f"{cls}_on_{test_cls}", "none", 0.0)
            evaluations.extend(rows)
            acc = {row["method"]: row["accuracy"] for row in rows}
            matrix[cls][test_cls] = acc["cycle"]
            matrix_baseline[cls][test_cls] = acc["dx1_baseline"]
    timings["total"] = clock() - t_all

    for cls in SCENE_CLASSES:
        for key in ("_models", "_solver", "_train_hashes"):
            per_class[cls].pop(key)

    plots = {
        "sr_matrix": _matrix_plot(matrix),
        "sr_matrix_baseline": _matrix_plot(matrix_baseline),
    }
    report = {
        "testbed": "sr",
        "config": cfg.to_dict(),
        "per_class": per_class,
        "matrix": matrix,
        "matrix_baseline": matrix_baseline,
        "evaluations": evaluations,
        "plots": plots,
        "timings": {k: round(v, 3) for k, v in timings.items()},
    }
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    _write_report_json(os.path.join(out, "report.json"), report)
    _write_metrics_csv(os.path.join(out, "metrics.csv"), evaluations)
    emit_plotdata(report, out)
    return report


def _matrix_plot(matrix) -> dict:
    header = ["train_class"] + list(SCENE_CLASSES)
    rows = [[cls] + [float(matrix[cls][tc]) for tc in SCENE_CLASSES] for cls in SCENE_CLASSES]
    return {"header": header, "rows": rows}


# ---------------------------------------------------------------------------
# bounds verification suite
# ---------------------------------------------------------------------------

def run_bounds_suite(cfg: ExperimentConfig, sigma: float = 0.02) -> dict:
    seed = cfg.master_seed
    kernel = generate_motion_kernel(hash_ints(seed, 300), cfg.forward.kernel_size,
                                    cfg.forward.kernel_steps)
    forward = Blur(kernel)

    cal_records = _records(cfg, tag=301, n=cfg.solver.n_calibration, kind="none",
                           sigma_spec=0.0,
                           measure=lambda scene, i: blur_forward(scene, kernel))
    pairs = [(rec["x"], rec["truth"]) for rec in cal_records]
    proto = WienerSolver(kernel, lam=cfg.solver.lambda_grid[0])
    solver = calibrate_solver(proto, pairs, cfg.solver.lambda_grid)
    precondition_held = solver.lam <= 1e-6

    records = _records(cfg, tag=302, n=cfg.data.n_bounds_suite, kind="gaussian",
                       sigma_spec=sigma,
                       measure=lambda scene, i: blur_forward(scene, kernel))
    estimate = estimate_lipschitz(solver, forward, records[0]["x"], probes=8,
                                  seed=hash_ints(seed, 303), method="exact_fourier")
    power = estimate_lipschitz(solver, forward, records[0]["x"], probes=8,
                               seed=hash_ints(seed, 303), method="power_iteration")

    per_trace = []
    for rec in records:
        trace = run_cycles(rec["x"], solver, forward, cfg.n_cycles)
        eps0 = actual_uncertainty(trace, rec["truth"])
        per_trace.append(verification_report(trace, estimate, eps0,
                                             precondition_held=precondition_held))

    def rate(key):
        verdicts = [entry[key] for entry in per_trace if entry[key] is not None]
        return float(np.mean([1.0 if v else 0.0 for v in verdicts])) if verdicts else None

    report = {
        "testbed": "bounds",
        "config": cfg.to_dict(),
        "L_hat": estimate.L_hat,
        "l_hat": estimate.l_hat,
        "method": estimate.method,
        "calibrated_lambda": float(solver.lam),
        "precondition_held": precondition_held,
        "noise_sigma": float(sigma),
        "cross_method_rel_err": abs(power.L_hat - estimate.L_hat) / estimate.L_hat,
        "eq6_pass_rate": rate("eq6_pass"),
        "eq7_pass_rate": rate("eq7_pass"),
        "eq9or10_regime": per_trace[0]["eq9or10_regime"],
        "eq9or10_pass_rate": rate("eq9or10_pass"),
        "per_trace": per_trace,
    }
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    _write_report_json(os.path.join(out, "bounds_report.json"), report)
    return report


# ---------------------------------------------------------------------------
# report/plot emission
# ---------------------------------------------------------------------------

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_report_json(path, report: dict) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_metrics_csv(path, evaluations) -> None:
    header = ["experiment_id", "subset", "accuracy", "auc", "ap", "f1", "n_samples"]
    rows = [
        [f'{e["experiment_id"]}_{e["method"]}', e["subset"], e["accuracy"],
         e["auc"], e["ap"], e["f1"], e["n_samples"]]
        for e in evaluations
    ]
    _write_csv(path, header, rows)


def _write_table_csv(path, evaluations) -> None:
    """Accuracy/AUC/AP blocks per method across noise kinds and levels."""
    subsets = []
    for e in evaluations:
        if e["subset"] not in subsets:
            subsets.append(e["subset"])
    header = ["method", "metric"] + subsets
    rows = []
    for method in ("cycle", "dx1_baseline"):
        for metric in ("accuracy", "auc", "ap"):
            row = [method, metric]
            for subset in subsets:
                match = [e for e in evaluations
                         if e["subset"] == subset and e["method"] == method]
                row.append(match[0][metric] if match else None)
            rows.append(row)
    _write_csv(path, header, rows)


def emit_plotdata(report: dict, out_dir) -> list[str]:
    """Write every embedded plot series as its own CSV; reruns with the
    same report produce identical bytes."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, plot in report.get("plots", {}).items():
        path = os.path.join(out_dir, f"{name}.csv")
        _write_csv(path, plot["header"], plot["rows"])
        written.append(path)
    return written
