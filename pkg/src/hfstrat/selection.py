"""Stratified splitting, stratified k-fold plans and exhaustive grid search."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import RngHandle

log = logging.getLogger(__name__)


class SelectionError(ValueError):
    pass


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray

    def to_dict(self) -> dict:
        return {"train": self.train.tolist(), "test": self.test.tolist()}

    @classmethod
    def from_dict(cls, d) -> "SplitIndices":
        return cls(np.array(d["train"], dtype=np.int64), np.array(d["test"], dtype=np.int64))


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple  # tuple of sorted index arrays

    @property
    def k(self) -> int:
        return len(self.folds)

    def train_test(self, i: int):
        test = self.folds[i]
        train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return train, test

    def __iter__(self):
        return (self.train_test(i) for i in range(self.k))


def _class_indices(y):
    y = np.asarray(y)
    return [np.flatnonzero(y == c) for c in np.unique(y)]


def stratified_split(y, test_fraction: float = 0.2, seed: int = 0) -> SplitIndices:
    """Per class, shuffle by ``seed`` and send the first
    ``round_half_up(test_fraction * class_count)`` indices to the test side."""
    if not 0.0 < test_fraction < 1.0:
        raise SelectionError("test_fraction must lie in (0, 1)")
    classes = _class_indices(y)
    if len(classes) < 2:
        raise SelectionError("both classes must be present")
    test = []
    for c, idx in enumerate(classes):
        if idx.size < 2:
            raise SelectionError(f"class {c} has fewer than 2 samples")
        perm = RngHandle(seed, c).child("split").stream().permutation(idx.size)
        n_test = min(max(_round_half_up(test_fraction * idx.size), 1), idx.size - 1)
        test.extend(idx[perm[:n_test]].tolist())
    test = np.sort(np.array(test, dtype=np.int64))
    train = np.setdiff1d(np.arange(len(np.asarray(y))), test)
    return SplitIndices(train, test)


def stratified_kfold(y, k: int = 5, seed: int = 0) -> FoldPlan:
    """Per-class seeded shuffle, then round-robin fold assignment.

    The round-robin position carries over between classes, which keeps
    overall fold sizes within one sample of each other.
    """
    if k < 2:
        raise SelectionError("k must be >= 2")
    classes = _class_indices(y)
    folds = [[] for _ in range(k)]
    pos = 0
    for c, idx in enumerate(classes):
        if idx.size < k:
            raise SelectionError(f"class {c} has {idx.size} samples, fewer than k={k}")
        perm = RngHandle(seed, c).child("kfold").stream().permutation(idx.size)
        for i in idx[perm]:
            folds[pos % k].append(int(i))
            pos += 1
    return FoldPlan(tuple(np.sort(np.array(f, dtype=np.int64)) for f in folds))


def expand_grid(grid: dict) -> list[dict]:
    """Candidates in lexicographic order: parameter names sorted, values in declared order."""
    if not grid:
        return [{}]
    names = sorted(grid)
    for n in names:
        if len(grid[n]) == 0:
            raise SelectionError(f"grid entry {n!r} has no candidate values")
    return [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]


@dataclass
class CandidateResult:
    params: dict
    fold_scores: list
    mean_score: float
    valid: bool = True
    error: str | None = None
    winner: bool = False

    def to_dict(self) -> dict:
        return {
            "candidate": _jsonable(self.params),
            "fold_accuracies": self.fold_scores,
            "mean": self.mean_score,
            "valid": self.valid,
            "error": self.error,
            "winner": self.winner,
        }


@dataclass
class GridResult:
    candidates: list
    best_index: int
    model: object = None
    folds: FoldPlan | None = None
    metric: str = "accuracy"
    fold_bookkeeping: list = field(default_factory=list)

    @property
    def best(self) -> CandidateResult:
        return self.candidates[self.best_index]

    @property
    def best_params(self) -> dict:
        return self.best.params

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "k": self.folds.k if self.folds else None,
            "candidates": [c.to_dict() for c in self.candidates],
            "winner": _jsonable(self.best.params),
        }


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "to_dict"):
        return v.to_dict()
    if isinstance(v, np.generic):
        return v.item()
    return v


def accuracy_score(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    return float(np.mean(y_true == np.asarray(y_pred)))


def grid_search(trainer, grid: dict, X, y, k: int = 5, seed: int = 0, scorer=accuracy_score, refit: bool = True):
    """Exhaustive k-fold grid search.

    ``trainer(X, y, **params)`` returns a model with ``predict_label``. A
    candidate whose trainer raises on any fold is excluded. The winner has
    the highest mean fold score (first in grid order on ties) and is refit on
    all of ``(X, y)``.
    """
    candidates = expand_grid(grid)
    X = np.asarray(X)
    y = np.asarray(y)
    plan = stratified_kfold(y, k, seed)
    bookkeeping = []
    for tr, te in plan:
        if np.intersect1d(tr, te).size:
            raise AssertionError("fold leakage: test indices inside the training set")
        bookkeeping.append((tr, te))
    results = []
    for params in candidates:
        scores = []
        try:
            for tr, te in bookkeeping:
                m = trainer(X[tr], y[tr], **params)
                scores.append(float(scorer(y[te], m.predict_label(X[te]))))
        except Exception as exc:  # noqa: BLE001 - any trainer failure invalidates the candidate
            log.warning("grid candidate %s failed: %s", params, exc)
            results.append(CandidateResult(params, scores, math.nan, False, f"{type(exc).__name__}: {exc}"))
            continue
        results.append(CandidateResult(params, scores, float(np.mean(scores))))
    valid = [i for i, r in enumerate(results) if r.valid]
    if not valid:
        raise SelectionError("all grid candidates failed")
    best = valid[0]
    for i in valid[1:]:
        if results[i].mean_score > results[best].mean_score:
            best = i
    results[best].winner = True
    model = trainer(X, y, **results[best].params) if refit else None
    return GridResult(results, best, model, plan, getattr(scorer, "__name__", "score").replace("_score", ""), bookkeeping)
