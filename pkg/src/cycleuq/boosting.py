"""Gradient-boosted decision trees for ID/OOD classification.

Second-order boosting on the logistic loss with exact greedy splits:
each tree is grown level-wise, scanning every sorted feature for the
split maximizing

    gain = 0.5 * (GL^2/(HL+lam) + GR^2/(HR+lam) - (GL+GR)^2/(HL+HR+lam))

where G/H are gradient/hessian sums, and leaves take -G/(H+lam). At the
few-feature, few-thousand-sample scale targeted here exact scans are
cheap and keep the training path bit-reproducible.
"""

import dataclasses
import json
import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .exceptions import DataError
from .metrics import f1, roc_auc
from .rng import make_rng
from .validation import as_binary_labels, as_feature_matrix

LEAF = -1


@dataclass
class TreeNode:
    feature: int = LEAF
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0
    gain: float = 0.0

    def is_leaf(self) -> bool:
        return self.feature == LEAF


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 100
    max_depth: int = 3
    min_child_weight: float = 1.0
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    subsample_fraction: float = 1.0


# Grid axes for tuning, in the fixed coordinate-descent order.
DEFAULT_GRID = {
    "n_trees": (50, 100, 200),
    "max_depth": (2, 3, 4),
    "min_child_weight": (1.0, 5.0, 10.0),
    "learning_rate": (0.05, 0.1, 0.3),
    "reg_lambda": (0.1, 1.0, 10.0),
    "subsample_fraction": (0.8, 1.0),
}


@dataclass
class BoostedEnsemble:
    trees: list
    learning_rate: float
    base_score: float
    threshold: float = 0.5
    hp: Hyperparams | None = None
    n_features: int = 5


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _leaf_value(G: float, H: float, reg_lambda: float) -> float:
    denom = H + reg_lambda
    return 0.0 if denom == 0 else -G / denom


def _best_split(X: np.ndarray, g: np.ndarray, h: np.ndarray,
                min_child_weight: float, reg_lambda: float):
    """Exhaustive scan over sorted feature values; returns
    (gain, feature, threshold) or None when no admissible split improves.
    Ties go to the smallest feature index, then the smallest threshold."""
    m, k = X.shape
    if m < 2:
        return None
    G, H = float(g.sum()), float(h.sum())
    parent = G * G / (H + reg_lambda)
    best = None
    for f in range(k):
        order = np.argsort(X[:, f], kind="stable")
        v = X[order, f]
        gl = np.cumsum(g[order])[:-1]
        hl = np.cumsum(h[order])[:-1]
        ok = (v[:-1] < v[1:]) & (hl >= min_child_weight) & (H - hl >= min_child_weight)
        if not ok.any():
            continue
        gains = 0.5 * (
            gl**2 / (hl + reg_lambda)
            + (G - gl) ** 2 / (H - hl + reg_lambda)
            - parent
        )
        gains[~ok] = -np.inf
        i = int(np.argmax(gains))
        if gains[i] > 0 and (best is None or gains[i] > best[0]):
            best = (float(gains[i]), f, float(0.5 * (v[i] + v[i + 1])))
    return best


def _grow_tree(X: np.ndarray, g: np.ndarray, h: np.ndarray, hp: Hyperparams) -> TreeNode:
    root = TreeNode(value=_leaf_value(g.sum(), h.sum(), hp.reg_lambda))
    frontier = [(root, np.arange(len(g)))]
    for _ in range(hp.max_depth):
        next_frontier = []
        for node, idx in frontier:
            found = _best_split(X[idx], g[idx], h[idx],
                                hp.min_child_weight, hp.reg_lambda)
            if found is None:
                continue
            gain, feature, threshold = found
            mask = X[idx, feature] < threshold
            left_idx, right_idx = idx[mask], idx[~mask]
            node.feature = feature
            node.threshold = threshold
            node.gain = gain
            node.left = TreeNode(value=_leaf_value(
                g[left_idx].sum(), h[left_idx].sum(), hp.reg_lambda))
            node.right = TreeNode(value=_leaf_value(
                g[right_idx].sum(), h[right_idx].sum(), hp.reg_lambda))
            next_frontier.append((node.left, left_idx))
            next_frontier.append((node.right, right_idx))
        frontier = next_frontier
        if not frontier:
            break
    return root


def _tree_apply(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if nd.is_leaf():
            out[idx] = nd.value
            continue
        mask = X[idx, nd.feature] < nd.threshold
        stack.append((nd.left, idx[mask]))
        stack.append((nd.right, idx[~mask]))
    return out


def train_boosted(X, y, hp: Hyperparams, seed: int) -> BoostedEnsemble:
    X = as_feature_matrix(X)
    y = as_binary_labels(y, n_samples=X.shape[0])
    if y.min() == y.max():
        raise DataError("degenerate labels: training data must contain both classes")
    n = X.shape[0]
    prior = float(y.mean())
    base_score = float(np.log(prior / (1.0 - prior)))
    raw = np.full(n, base_score)
    trees = []
    yf = y.astype(np.float64)
    for t in range(hp.n_trees):
        p = _sigmoid(raw)
        g = p - yf
        h = p * (1.0 - p)
        if hp.subsample_fraction < 1.0:
            rng = make_rng(seed, t)
            rows = np.sort(rng.choice(
                n, size=max(2, int(round(hp.subsample_fraction * n))), replace=False))
        else:
            rows = np.arange(n)
        tree = _grow_tree(X[rows], g[rows], h[rows], hp)
        trees.append(tree)
        raw = raw + hp.learning_rate * _tree_apply(tree, X)
    return BoostedEnsemble(trees=trees, learning_rate=hp.learning_rate,
                           base_score=base_score, hp=hp, n_features=X.shape[1])


def predict_raw(model: BoostedEnsemble, X) -> np.ndarray:
    X = as_feature_matrix(X)
    raw = np.full(X.shape[0], model.base_score)
    for tree in model.trees:
        raw += model.learning_rate * _tree_apply(tree, X)
    return raw


def predict_proba(model: BoostedEnsemble, X) -> np.ndarray:
    """Positive-class probability per sample, strictly inside (0, 1)."""
    return _sigmoid(predict_raw(model, X))


def predict_label(model: BoostedEnsemble, X) -> np.ndarray:
    return (predict_proba(model, X) >= model.threshold).astype(np.int64)


def split_train_valid(X, y, seed: int):
    """Stratified 80/20 split, deterministic per seed; both partitions
    keep both classes."""
    X = as_feature_matrix(X)
    y = as_binary_labels(y, n_samples=X.shape[0])
    if len(y) < 10:
        raise DataError(f"need at least 10 samples to split, got {len(y)}")
    rng = make_rng(seed, 80, 20)
    train_idx, valid_idx = [], []
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if len(members) < 2:
            raise DataError(f"too few samples of class {cls} to split")
        perm = rng.permutation(len(members))
        n_train = int(round(0.8 * len(members)))
        n_train = min(max(n_train, 1), len(members) - 1)
        train_idx.extend(members[perm[:n_train]])
        valid_idx.extend(members[perm[n_train:]])
    train_idx = np.sort(np.array(train_idx))
    valid_idx = np.sort(np.array(valid_idx))
    return (X[train_idx], y[train_idx]), (X[valid_idx], y[valid_idx])


def tune_hyperparams(X, y, budget: int, seed: int,
                     grid: dict | None = None):
    """Random grid search followed by one pass of coordinate descent.

    Phase 1 draws `budget` random grid points and scores validation AUC;
    phase 2 sweeps each axis in the fixed field order from the phase-1
    best, accepting strict improvements. Returns the winning
    hyperparameters and the model refit on the training partition.
    """
    if budget < 1:
        raise DataError(f"budget must be >= 1, got {budget}")
    grid = dict(DEFAULT_GRID if grid is None else grid)
    (X_train, y_train), (X_valid, y_valid) = split_train_valid(X, y, seed)
    train_seed = hash_seed(seed, 1)

    def score(hp: Hyperparams):
        model = train_boosted(X_train, y_train, hp, train_seed)
        return roc_auc(predict_proba(model, X_valid), y_valid), model

    rng = make_rng(seed, 2)
    best_hp, best_auc, best_model = None, -np.inf, None
    for _ in range(budget):
        hp = Hyperparams(**{
            name: values[rng.integers(0, len(values))]
            for name, values in grid.items()
        })
        auc, model = score(hp)
        if auc > best_auc:
            best_hp, best_auc, best_model = hp, auc, model

    for name, values in grid.items():
        for value in values:
            if getattr(best_hp, name) == value:
                continue
            candidate = dataclasses.replace(best_hp, **{name: value})
            auc, model = score(candidate)
            if auc > best_auc:
                best_hp, best_auc, best_model = candidate, auc, model

    return best_hp, best_model


def hash_seed(seed: int, *stream: int) -> int:
    # stable derived seed for nested stochastic stages
    return int(np.random.SeedSequence((seed,) + stream).generate_state(1)[0])


def select_threshold(model: BoostedEnsemble, X_valid, y_valid) -> float:
    """F1-maximizing threshold over midpoints of the sorted unique
    validation probabilities; ties resolve to the larger threshold."""
    y_valid = as_binary_labels(y_valid)
    if y_valid.min() == y_valid.max():
        raise DataError("degenerate labels: validation needs both classes")
    probs = predict_proba(model, X_valid)
    uniq = np.unique(probs)
    candidates = list(0.5 * (uniq[:-1] + uniq[1:])) + [0.5]
    best_thr, best_f1 = None, -1.0
    for thr in sorted(candidates):
        score = f1((probs >= thr).astype(np.int64), y_valid)
        if score >= best_f1:
            best_thr, best_f1 = float(thr), score
    return best_thr


def feature_importance(model: BoostedEnsemble) -> np.ndarray:
    """Total split gain per feature, normalized to sum to one."""
    totals = np.zeros(model.n_features)
    stack = [node for tree in model.trees for node in (tree,)]
    while stack:
        node = stack.pop()
        if node.is_leaf():
            continue
        totals[node.feature] += node.gain
        stack.append(node.left)
        stack.append(node.right)
    if totals.sum() == 0:
        raise DataError("no splits: the ensemble is all leaves")
    return totals / totals.sum()


def training_loss(model: BoostedEnsemble, X, y) -> np.ndarray:
    """Logistic loss after each boosting round (for monotonicity checks)."""
    X = as_feature_matrix(X)
    y = as_binary_labels(y, n_samples=X.shape[0]).astype(np.float64)
    raw = np.full(X.shape[0], model.base_score)
    losses = []
    for tree in model.trees:
        raw = raw + model.learning_rate * _tree_apply(tree, X)
        z = np.clip(raw, -500, 500)
        losses.append(float(np.mean(np.log1p(np.exp(-z)) + (1.0 - y) * z)))
    return np.array(losses)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _node_to_dict(node: TreeNode):
    if node.is_leaf():
        return {"value": node.value}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "gain": node.gain,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d) -> TreeNode:
    if "value" in d:
        return TreeNode(value=float(d["value"]))
    return TreeNode(
        feature=int(d["feature"]),
        threshold=float(d["threshold"]),
        gain=float(d.get("gain", 0.0)),
        left=_node_from_dict(d["left"]),
        right=_node_from_dict(d["right"]),
    )


def save_classifier(path, model: BoostedEnsemble) -> None:
    payload = {
        "trees": [_node_to_dict(t) for t in model.trees],
        "learning_rate": model.learning_rate,
        "base_score": model.base_score,
        "threshold": model.threshold,
        "hp": dataclasses.asdict(model.hp) if model.hp else None,
        "n_features": model.n_features,
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_classifier(path) -> BoostedEnsemble:
    with open(path, "r", encoding="ascii") as fh:
        payload = json.load(fh)
    return BoostedEnsemble(
        trees=[_node_from_dict(t) for t in payload["trees"]],
        learning_rate=float(payload["learning_rate"]),
        base_score=float(payload["base_score"]),
        threshold=float(payload["threshold"]),
        hp=Hyperparams(**payload["hp"]) if payload.get("hp") else None,
        n_features=int(payload.get("n_features", 5)),
    )


def train_timed(X, y, hp: Hyperparams, seed: int):
    start = time.perf_counter()
    model = train_boosted(X, y, hp, seed)
    return model, time.perf_counter() - start


class BoostedTreesClassifier(BaseEstimator, ClassifierMixin):
    """scikit-learn facade over the boosted ensemble."""

    def __init__(self, n_trees=100, max_depth=3, min_child_weight=1.0,
                 learning_rate=0.1, reg_lambda=1.0, subsample_fraction=1.0,
                 random_state=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_child_weight = min_child_weight
        self.learning_rate = learning_rate
        self.reg_lambda = reg_lambda
        self.subsample_fraction = subsample_fraction
        self.random_state = random_state

    def _hp(self) -> Hyperparams:
        return Hyperparams(
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            min_child_weight=self.min_child_weight,
            learning_rate=self.learning_rate,
            reg_lambda=self.reg_lambda,
            subsample_fraction=self.subsample_fraction,
        )

    def fit(self, X, y):
        self.ensemble_ = train_boosted(X, y, self._hp(), self.random_state)
        self.classes_ = np.array([0, 1])
        return self

    def _check_fitted(self):
        if not hasattr(self, "ensemble_"):
            raise NotFittedError("BoostedTreesClassifier is not fitted")

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        pos = predict_proba(self.ensemble_, X)
        return np.column_stack([1.0 - pos, pos])

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        return predict_label(self.ensemble_, X)

    def set_threshold(self, X_valid, y_valid) -> float:
        self._check_fitted()
        self.ensemble_.threshold = select_threshold(self.ensemble_, X_valid, y_valid)
        return self.ensemble_.threshold

    @property
    def feature_importances_(self) -> np.ndarray:
        self._check_fitted()
        return feature_importance(self.ensemble_)
