"""Random forest for regression and binary classification.

Randomness comes only from SplitMix64 streams: tree ``t`` uses
``derive_seed(seed, t)``; its bootstrap sample is drawn from child stream 0
and the node with heap index ``i`` (root 1, children ``2i`` and ``2i + 1``)
draws its feature subset from child stream ``i``. Rows are put in a canonical
order before training, so a model depends on the row multiset, not the order.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..catalog import FeatureSpec, LabeledRow
from ..fnv import fnv1a64
from .impurity import build_bins
from .rng import MASK64, SplitMix64, derive_seed

MODEL_VERSION = "rf-1"
TASKS = ("regression", "binary_classification")
STRATEGIES = ("auto", "all", "sqrt", "log2", "onethird")


class ForestError(ValueError):
    pass


class CorruptModelError(ForestError):
    pass


@dataclass(frozen=True)
class ForestConfig:
    task: str = "regression"
    num_trees: int = 100
    max_depth: int = 8
    max_bins: int = 32
    feature_subset_strategy: str = "auto"
    categorical_features_info: dict[int, int] = field(default_factory=dict)
    seed: int = 0
    bootstrap: bool | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ForestError(f"task must be one of {TASKS}")
        if self.num_trees < 1:
            raise ForestError("num_trees must be >= 1")
        if self.max_depth < 1:
            raise ForestError("max_depth must be >= 1")
        if self.max_bins < 2:
            raise ForestError("max_bins must be >= 2")
        if self.feature_subset_strategy not in STRATEGIES:
            raise ForestError(f"feature_subset_strategy must be one of {STRATEGIES}")
        for idx, arity in self.categorical_features_info.items():
            if arity < 1:
                raise ForestError(f"categorical feature {idx} needs arity >= 1")
            if arity > self.max_bins:
                raise ForestError(f"max_bins {self.max_bins} is below categorical arity {arity} of feature {idx}")
        object.__setattr__(self, "seed", self.seed & MASK64)
        object.__setattr__(
            self, "categorical_features_info", {int(k): int(v) for k, v in sorted(self.categorical_features_info.items())}
        )

    @property
    def use_bootstrap(self) -> bool:
        return self.num_trees > 1 if self.bootstrap is None else self.bootstrap

    def subset_size(self, n_features: int) -> int:
        s = self.feature_subset_strategy
        if s == "auto":
            if self.num_trees == 1:
                s = "all"
            else:
                s = "sqrt" if self.task == "binary_classification" else "onethird"
        if s == "all":
            k = n_features
        elif s == "sqrt":
            k = math.ceil(math.sqrt(n_features))
        elif s == "log2":
            k = max(1, math.ceil(math.log2(n_features)))
        else:
            k = math.ceil(n_features / 3)
        if not 1 <= k <= n_features:
            raise ForestError(f"strategy {self.feature_subset_strategy!r} gives {k} of {n_features} features")
        return k

    def to_dict(self) -> dict:
        d = asdict(self)
        d["categorical_features_info"] = {str(k): v for k, v in self.categorical_features_info.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ForestConfig":
        d = dict(d)
        d["categorical_features_info"] = {int(k): v for k, v in d.get("categorical_features_info", {}).items()}
        return cls(**d)


# --------------------------------------------------------------------------- growing


class _Grower:
    def __init__(self, X, y, candidates, categorical, config: ForestConfig, k: int):
        self.X = X
        self.y = y
        self.candidates = candidates
        self.categorical = categorical
        self.config = config
        self.k = k
        self.classify = config.task == "binary_classification"

    def leaf(self, yy: np.ndarray):
        if self.classify:
            ones = int(np.count_nonzero(yy))
            return {"leaf": 1 if ones > yy.size - ones else 0}
        return {"leaf": float(np.mean(yy))}

    def _gains(self, yy: np.ndarray, left: np.ndarray) -> np.ndarray:
        """Impurity decrease of every candidate column of the boolean ``left`` matrix."""
        n = yy.size
        n_left = left.sum(axis=0).astype(float)
        n_right = n - n_left
        valid = (n_left > 0) & (n_right > 0)
        nl = np.where(valid, n_left, 1.0)
        nr = np.where(valid, n_right, 1.0)
        if self.classify:
            ones_left = yy @ left
            ones_right = yy.sum() - ones_left
            p = yy.mean()
            parent = 1.0 - (p * p + (1 - p) * (1 - p))
            pl, pr = ones_left / nl, ones_right / nr
            gini_l = 1.0 - (pl * pl + (1 - pl) * (1 - pl))
            gini_r = 1.0 - (pr * pr + (1 - pr) * (1 - pr))
            gain = parent - (n_left * gini_l + n_right * gini_r) / n
        else:
            yc = yy - yy.mean()
            sum_all, sq_all = yc.sum(), (yc * yc).sum()
            s_left = yc @ left
            q_left = (yc * yc) @ left
            s_right, q_right = sum_all - s_left, sq_all - q_left
            sse_parent = sq_all - sum_all * sum_all / n
            sse_l = q_left - s_left * s_left / nl
            sse_r = q_right - s_right * s_right / nr
            gain = (sse_parent - sse_l - sse_r) / n
        return np.where(valid, gain, -np.inf)

    def grow(self, idx: np.ndarray, depth: int, node_id: int, tree_seed: int) -> dict:
        yy = self.y[idx]
        if depth >= self.config.max_depth or idx.size < 2 or np.all(yy == yy[0]):
            return self.leaf(yy)
        n_features = self.X.shape[1]
        rng = SplitMix64(derive_seed(tree_seed, node_id))
        best_gain, best = -np.inf, None
        for f in rng.sample_without_replacement(n_features, self.k):
            cands = self.candidates[f]
            if cands.size == 0:
                continue
            x = self.X[idx, f]
            left = (x[:, None] == cands[None, :]) if self.categorical[f] else (x[:, None] <= cands[None, :])
            gains = self._gains(yy, left)
            j = int(np.argmax(gains))
            if gains[j] > best_gain:
                best_gain, best = gains[j], (f, j, left[:, j])
        if best is None or not best_gain > 0:
            return self.leaf(yy)
        f, j, go_left = best
        node = {"feature": int(f)}
        if self.categorical[f]:
            node["category"] = int(self.candidates[f][j])
        else:
            node["threshold"] = float(self.candidates[f][j])
        node["left"] = self.grow(idx[go_left], depth + 1, 2 * node_id, tree_seed)
        node["right"] = self.grow(idx[~go_left], depth + 1, 2 * node_id + 1, tree_seed)
        return node


def _as_arrays(rows) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(rows, tuple) and len(rows) == 2 and isinstance(rows[0], np.ndarray):
        X, y = rows
    else:
        rows = list(rows)
        if not rows:
            raise ForestError("training needs at least 2 rows, got 0")
        X = np.array([r.features for r in rows], dtype=float)
        y = np.array([r.target for r in rows], dtype=float)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ForestError("features must be a 2-D matrix with one target per row")
    return X, y


def canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row permutation sorting by feature 0, then 1, ..., then target."""
    keys = [y] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


@dataclass
class ForestModel:
    config: ForestConfig
    trees: list[dict]
    n_features: int
    training_digest: str
    feature_spec: FeatureSpec | None = None
    _compiled: list | None = field(default=None, repr=False, compare=False)

    @property
    def depths(self) -> list[int]:
        return [_depth(t) for t in self.trees]

    def _tables(self):
        if self._compiled is None:
            self._compiled = [_compile(t) for t in self.trees]
        return self._compiled

    def tree_outputs(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ForestError(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.stack([_predict_tree(tab, X) for tab in self._tables()])

    def predict_many(self, X) -> np.ndarray:
        outputs = self.tree_outputs(X)
        if self.config.task == "binary_classification":
            votes = outputs.sum(axis=0)
            return (votes > len(self.trees) / 2).astype(int)
        return outputs.sum(axis=0) / len(self.trees)

    def predict(self, vector: Sequence[float]):
        vector = np.asarray(vector, dtype=float)
        if vector.ndim != 1 or vector.size != self.n_features:
            raise ForestError(f"expected a vector of {self.n_features} features, got shape {vector.shape}")
        out = self.predict_many(vector[None, :])[0]
        return int(out) if self.config.task == "binary_classification" else float(out)

    def to_dict(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "config": self.config.to_dict(),
            "n_features": self.n_features,
            "training_digest": self.training_digest,
            "feature_spec": self.feature_spec.to_dict() if self.feature_spec else None,
            "trees": self.trees,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


def _depth(node: dict) -> int:
    if "leaf" in node:
        return 0
    return 1 + max(_depth(node["left"]), _depth(node["right"]))


def _compile(tree: dict):
    feature, split, is_cat, left, right, value = [], [], [], [], [], []

    def visit(node) -> int:
        i = len(feature)
        feature.append(-1)
        split.append(0.0)
        is_cat.append(False)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        if "leaf" in node:
            value[i] = float(node["leaf"])
            return i
        feature[i] = node["feature"]
        if "category" in node:
            is_cat[i], split[i] = True, float(node["category"])
        else:
            split[i] = node["threshold"]
        left[i] = visit(node["left"])
        right[i] = visit(node["right"])
        return i

    visit(tree)
    return tuple(np.asarray(a) for a in (feature, split, is_cat, left, right, value))


def _predict_tree(tables, X: np.ndarray) -> np.ndarray:
    feature, split, is_cat, left, right, value = tables
    node = np.zeros(X.shape[0], dtype=int)
    rows = np.arange(X.shape[0])
    while True:
        f = feature[node]
        active = f >= 0
        if not active.any():
            return value[node]
        x = X[rows[active], f[active]]
        s = split[node[active]]
        go_left = np.where(is_cat[node[active]], x == s, x <= s)
        node[active] = np.where(go_left, left[node[active]], right[node[active]])


def training_digest(X: np.ndarray, y: np.ndarray, config: ForestConfig) -> str:
    order = canonical_order(X, y)
    h = fnv1a64(np.ascontiguousarray(X[order]).astype("<f8").tobytes())
    h = fnv1a64(np.ascontiguousarray(y[order]).astype("<f8").tobytes(), h)
    h = fnv1a64(json.dumps(config.to_dict(), sort_keys=True).encode(), h)
    return f"{h:016x}"


def train(rows, config: ForestConfig, feature_spec: FeatureSpec | None = None, workers: int = 1) -> ForestModel:
    """Train a forest on ``LabeledRow`` objects or an ``(X, y)`` array pair."""
    X, y = _as_arrays(rows)
    n, n_features = X.shape
    if n < 2:
        raise ForestError(f"training needs at least 2 rows, got {n}")
    if n_features < 1:
        raise ForestError("training needs at least one feature")
    if not np.all(np.isfinite(y)):
        raise ForestError("targets must be finite")
    if not np.all(np.isfinite(X)):
        raise ForestError("features must be finite")
    if config.task == "binary_classification" and not np.all((y == 0) | (y == 1)):
        raise ForestError("binary classification targets must be 0 or 1")
    if feature_spec is not None and feature_spec.n_features not in (n_features, n_features - 1):
        raise ForestError("feature spec does not match the row width")
    if any(f >= n_features for f in config.categorical_features_info):
        raise ForestError("categorical feature index out of range")
    categorical = [False] * n_features
    candidates = []
    for f in range(n_features):
        arity = config.categorical_features_info.get(f)
        if arity is not None:
            col = X[:, f]
            if np.any((col != np.floor(col)) | (col < 0) | (col >= arity)):
                raise ForestError(f"feature {f} has codes outside 0..{arity - 1}")
            categorical[f] = True
            candidates.append(build_bins(col, config.max_bins, "categorical", arity))
        else:
            candidates.append(build_bins(X[:, f], config.max_bins))
    k = config.subset_size(n_features)

    order = canonical_order(X, y)
    X, y = X[order], y[order]
    grower = _Grower(X, y, candidates, categorical, config, k)

    def one_tree(t: int) -> dict:
        tree_seed = derive_seed(config.seed, t)
        if config.use_bootstrap:
            idx = np.sort(np.asarray(SplitMix64(derive_seed(tree_seed, 0)).bootstrap(n), dtype=int))
        else:
            idx = np.arange(n)
        return grower.grow(idx, 0, 1, tree_seed)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            trees = list(pool.map(one_tree, range(config.num_trees)))
    else:
        trees = [one_tree(t) for t in range(config.num_trees)]
    return ForestModel(config, trees, n_features, training_digest(X, y, config), feature_spec)


def bootstrap_indices(config: ForestConfig, tree_index: int, n: int) -> list[int]:
    """The bootstrap draw of one tree, as used in training (before sorting)."""
    return SplitMix64(derive_seed(derive_seed(config.seed, tree_index), 0)).bootstrap(n)


def predict(model: ForestModel, vector: Sequence[float]):
    return model.predict(vector)


def save_model(model: ForestModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model.dumps())


def loads_model(text: str) -> ForestModel:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModelError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(d, dict) or "version" not in d:
        raise CorruptModelError("model file has no version field")
    if d["version"] != MODEL_VERSION:
        raise ForestError(f"unsupported model version {d['version']!r}; expected {MODEL_VERSION!r}")
    try:
        spec = FeatureSpec.from_dict(d["feature_spec"]) if d.get("feature_spec") else None
        model = ForestModel(
            ForestConfig.from_dict(d["config"]), d["trees"], int(d["n_features"]), d["training_digest"], spec
        )
        model._tables()
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModelError(f"model file is malformed: {exc}") from None
    return model


def load_model(path) -> ForestModel:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
