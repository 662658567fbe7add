"""Split criteria and candidate-split construction."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def gini(counts: Sequence[float]) -> float:
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("class counts must be non-negative")
    total = counts.sum()
    if total == 0:
        raise ValueError("gini impurity is undefined for all-zero counts")
    p = counts / total
    return float(1.0 - np.sum(p * p))


def variance_impurity(targets: Sequence[float]) -> float:
    """Population variance."""
    y = np.asarray(targets, dtype=float)
    if y.size == 0:
        raise ValueError("variance impurity needs at least one target")
    return float(np.mean((y - y.mean()) ** 2))


def build_bins(values, max_bins: int, kind: str = "continuous", arity: int | None = None) -> np.ndarray:
    """Candidate splits for one feature column.

    Continuous columns give ascending thresholds for ``x <= t``: midpoints
    between consecutive distinct values when there are at most ``max_bins`` of
    them, otherwise up to ``max_bins - 1`` cuts at the lower empirical
    ``j / max_bins`` quantiles (midpoint to the next distinct value above),
    deduplicated. Categorical columns give one one-vs-rest candidate per level.
    """
    if max_bins < 2:
        raise ValueError("max_bins must be at least 2")
    if kind == "categorical":
        if arity is None:
            raise ValueError("categorical bins need the feature arity")
        if arity > max_bins:
            raise ValueError(f"categorical arity {arity} exceeds max_bins {max_bins}")
        return np.arange(arity, dtype=float)
    if kind != "continuous":
        raise ValueError(f"unknown feature kind {kind!r}")
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("cannot bin an empty column")
    distinct = np.unique(v)
    if distinct.size <= 1:
        return np.empty(0)
    if distinct.size <= max_bins:
        return (distinct[:-1] + distinct[1:]) / 2.0
    n = v.size
    cuts = []
    for j in range(1, max_bins):
        q = v[-(-j * n // max_bins) - 1]
        above = np.searchsorted(distinct, q, side="right")
        if above < distinct.size:
            cuts.append((q + distinct[above]) / 2.0)
    return np.unique(np.asarray(cuts, dtype=float))
