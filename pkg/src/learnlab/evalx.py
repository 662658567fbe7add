"""Holdout splitting, regression and binary-classification metrics."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence, TypeVar

import numpy as np

T = TypeVar("T")


@dataclass(frozen=True)
class RegressionReport:
    mse: float
    rmse: float
    mae: float
    r_squared: float
    explained_variance: float
    n: int

    @property
    def r_squared_defined(self) -> bool:
        return not math.isnan(self.r_squared)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("r_squared", "explained_variance"):
            if math.isnan(d[k]):
                d[k] = None
        d["r_squared_defined"] = self.r_squared_defined
        return d

    def render(self) -> str:
        rows = [
            ("MSE", self.mse),
            ("RMSE", self.rmse),
            ("MAE", self.mae),
            ("R-squared", self.r_squared),
            ("Explained variance", self.explained_variance),
        ]
        lines = [f"{name:<20}{_fmt(value):>12}" for name, value in rows]
        lines.append(f"{'n':<20}{self.n:>12d}")
        return "\n".join(lines)


@dataclass(frozen=True)
class ClassificationReport:
    confusion: tuple[tuple[int, int], tuple[int, int]]
    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return sum(sum(r) for r in self.confusion)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["confusion"] = [list(r) for r in self.confusion]
        d["undefined"] = list(self.undefined)
        d["n"] = self.n
        return d

    def render(self) -> str:
        (tn, fp), (fn, tp) = self.confusion
        lines = [
            f"{'':<12}{'pred 0':>8}{'pred 1':>8}",
            f"{'true 0':<12}{tn:>8d}{fp:>8d}",
            f"{'true 1':<12}{fn:>8d}{tp:>8d}",
        ]
        for name in ("accuracy", "precision", "recall", "f1"):
            flag = " (undefined, reported 0)" if name in self.undefined else ""
            lines.append(f"{name:<12}{getattr(self, name):>16.6f}{flag}")
        return "\n".join(lines)


def _fmt(value: float) -> str:
    return "undefined" if math.isnan(value) else f"{value:.6f}"


def split(rows: Sequence[T], train_fraction: float = 0.7, seed: int = 0) -> tuple[list[T], list[T]]:
    """Seeded holdout split; both parts keep the input order."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = len(rows)
    if n < 2:
        raise ValueError("splitting needs at least 2 rows")
    n_train = min(n - 1, max(1, math.floor(n * train_fraction + 0.5)))
    perm = np.random.default_rng(seed).permutation(n)
    in_train = np.zeros(n, dtype=bool)
    in_train[perm[:n_train]] = True
    train = [r for r, t in zip(rows, in_train) if t]
    test = [r for r, t in zip(rows, in_train) if not t]
    return train, test


def regression_metrics(y_true, y_pred) -> RegressionReport:
    y = np.asarray(y_true, dtype=float)
    p = np.asarray(y_pred, dtype=float)
    if y.shape != p.shape or y.ndim != 1:
        raise ValueError(f"length mismatch: {y.shape} vs {p.shape}")
    if y.size < 2:
        raise ValueError("regression metrics need at least 2 pairs")
    resid = y - p
    mse = float(np.mean(resid * resid))
    mae = float(np.mean(np.abs(resid)))
    dev = y - y.mean()
    ss_tot = float(np.sum(dev * dev))
    if ss_tot == 0.0:
        r2 = ev = float("nan")
    else:
        r2 = 1.0 - float(np.sum(resid * resid)) / ss_tot
        rc = resid - resid.mean()
        ev = 1.0 - float(np.mean(rc * rc)) / (ss_tot / y.size)
    return RegressionReport(mse, math.sqrt(mse), mae, r2, ev, int(y.size))


def classification_metrics(y_true, y_pred) -> ClassificationReport:
    y = np.asarray(y_true)
    p = np.asarray(y_pred)
    if y.shape != p.shape or y.ndim != 1:
        raise ValueError(f"length mismatch: {y.shape} vs {p.shape}")
    if y.size < 1:
        raise ValueError("classification metrics need at least 1 pair")
    for arr in (y, p):
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("labels must be 0 or 1")
    tp = int(np.sum((y == 1) & (p == 1)))
    tn = int(np.sum((y == 0) & (p == 0)))
    fp = int(np.sum((y == 0) & (p == 1)))
    fn = int(np.sum((y == 1) & (p == 0)))
    undefined = []

    def ratio(num, den, name):
        if den == 0:
            undefined.append(name)
            return 0.0
        return num / den

    precision = ratio(tp, tp + fp, "precision")
    recall = ratio(tp, tp + fn, "recall")
    f1 = ratio(2 * precision * recall, precision + recall, "f1")
    return ClassificationReport(((tn, fp), (fn, tp)), (tp + tn) / y.size, precision, recall, f1, tuple(undefined))


def report_json(report) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True)
