"""Linear prediction of the actual inference-error norm from the five
cycle features, with a small unpenalized-intercept ridge for conditioning."""

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .exceptions import DataError, NumericalError
from .validation import as_feature_matrix


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # one per feature
    intercept: float
    ridge: float


def fit_linear(features, targets, ridge: float = 1e-8) -> LinearModel:
    """Solve (X'X + ridge*I) w = X't with an unpenalized intercept column."""
    X = as_feature_matrix(features)
    t = np.asarray(targets, dtype=np.float64)
    if t.ndim != 1 or t.shape[0] != X.shape[0]:
        raise DataError("targets must be 1D and match the number of samples")
    if X.shape[0] < X.shape[1] + 1:
        raise DataError(
            f"need at least {X.shape[1] + 1} samples, got {X.shape[0]}"
        )
    if ridge < 0:
        raise DataError(f"ridge must be >= 0, got {ridge}")
    aug = np.hstack([X, np.ones((X.shape[0], 1))])
    normal = aug.T @ aug
    penalty = np.eye(X.shape[1] + 1) * ridge
    penalty[-1, -1] = 0.0  # intercept unpenalized
    lhs = normal + penalty
    if ridge == 0 and np.linalg.matrix_rank(lhs) < lhs.shape[0]:
        raise NumericalError("rank deficient; increase ridge")
    try:
        coef = np.linalg.solve(lhs, aug.T @ t)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("rank deficient; increase ridge") from exc
    return LinearModel(weights=coef[:-1], intercept=float(coef[-1]), ridge=float(ridge))


def predict(model: LinearModel, features) -> np.ndarray:
    X = as_feature_matrix(features, n_features=len(model.weights))
    return X @ model.weights + model.intercept


def r_squared(predicted, actual) -> float:
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape or p.ndim != 1 or len(p) == 0:
        raise DataError("predicted/actual must be equal-length nonempty vectors")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0:
        raise DataError("zero total variance: actual values are all identical")
    return 1.0 - float(np.sum((a - p) ** 2)) / ss_tot


def save_linear_model(path, model: LinearModel) -> None:
    payload = {
        "weights": [float(w) for w in model.weights],
        "intercept": model.intercept,
        "ridge": model.ridge,
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_linear_model(path) -> LinearModel:
    with open(path, "r", encoding="ascii") as fh:
        payload = json.load(fh)
    return LinearModel(
        weights=np.array(payload["weights"], dtype=np.float64),
        intercept=float(payload["intercept"]),
        ridge=float(payload["ridge"]),
    )


class UncertaintyRegressor(BaseEstimator, RegressorMixin):
    """scikit-learn facade over fit_linear/predict."""

    def __init__(self, ridge: float = 1e-8):
        self.ridge = ridge

    def fit(self, X, y):
        model = fit_linear(X, y, ridge=self.ridge)
        self.coef_ = model.weights
        self.intercept_ = model.intercept
        self.model_ = model
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise NotFittedError("UncertaintyRegressor is not fitted")
        return predict(self.model_, X)
