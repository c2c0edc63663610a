"""Cycle-consistency uncertainty quantification for inverse imaging.

Runs forward-backward cycles between the measurement and signal domains
of an inverse problem, fits exponential models to the cycle-consistency
sequences, and uses the fitted uncertainty/bias estimators to predict
per-input error and detect corrupted or out-of-distribution inputs.
"""

from .boosting import (
    BoostedEnsemble,
    BoostedTreesClassifier,
    Hyperparams,
    feature_importance,
    select_threshold,
    split_train_valid,
    train_boosted,
    tune_hyperparams,
)
from .bounds import (
    LipschitzEstimate,
    check_lower_bound,
    check_recursive_bound,
    check_upper_bound,
    estimate_lipschitz,
)
from .config import ExperimentConfig, load_config, save_config
from .cycles import CycleTrace, GroundTruthError, actual_uncertainty, run_cycles
from .exceptions import CycleUQError, DataError, NumericalError
from .image import clamp_unit, diff_norm, l2_norm, read_pgm, read_raw, write_pgm, write_raw
from .linear_model import LinearModel, UncertaintyRegressor, fit_linear, r_squared
from .metrics import accuracy, average_precision, confusion_counts, f1, roc_auc
from .noise import NoiseSpec, add_gaussian, add_snp
from .operators import (
    Blur,
    BlurKernel,
    Pool,
    apply_forward,
    blur_forward,
    fft2,
    generate_motion_kernel,
    ifft2,
    pool_forward,
)
from .regression import (
    CycleFeatureExtractor,
    ExpFit,
    FeatureVector,
    FEATURE_NAMES,
    extract_features,
    fit_exponential,
)
from .scenes import SceneSpec, build_dataset, generate_scene, load_manifest, ood_label
from .solvers import LandweberSolver, WienerSolver, calibrate_solver, landweber_apply, wiener_apply

__version__ = "0.1.0"
