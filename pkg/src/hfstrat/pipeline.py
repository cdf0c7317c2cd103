"""End-to-end training helpers shared by the CLI and the demo scripts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import DesignMatrix, LabeledCohort, encode
from .learners import Kernel, TreeParams, train_svc, train_tree
from .numerics import derive_seed
from .selection import GridResult, SplitIndices, grid_search, stratified_split
from .stacking import StackingConfig, StackingEnsemble, train_stacking


def tree_trainer(X, y, max_depth=None, min_samples_split=2, min_samples_leaf=1):
    return train_tree(X, y, TreeParams(max_depth, min_samples_split, min_samples_leaf))


def make_svc_trainer(tol: float = 1e-3, max_passes: int = 200):
    def trainer(X, y, C=1.0, kernel="linear", gamma=None):
        return train_svc(X, y, C=C, kernel=Kernel(kernel, gamma), tol=tol, max_passes=max_passes)

    return trainer


@dataclass
class TrainedExperiment:
    split: SplitIndices
    train: DesignMatrix
    test: DesignMatrix
    ensemble: StackingEnsemble
    tree_search: GridResult
    svc_search: GridResult

    def models(self) -> dict:
        """The six compared models in table order."""
        return {
            "meta": self.ensemble,
            **self.ensemble.base_models(),
            "tree": self.tree_search.model,
            "svc": self.svc_search.model,
        }


def train_experiment(
    data: LabeledCohort | DesignMatrix,
    stacking: StackingConfig,
    tree_grid: dict,
    svc_grid: dict,
    test_fraction: float = 0.2,
    svc_tol: float = 1e-3,
) -> TrainedExperiment:
    """Stratified split, then the stacking ensemble and both flat baselines on
    the training portion; cross-validation never touches the test rows."""
    dm = data if isinstance(data, DesignMatrix) else encode(data)
    seed = stacking.seed
    split = stratified_split(dm.y, test_fraction, derive_seed(seed, "train_test_split"))
    tr, te = dm.take_rows(split.train), dm.take_rows(split.test)
    ensemble = train_stacking(tr, stacking)
    tree_search = grid_search(tree_trainer, tree_grid, tr.X, tr.y, stacking.k, seed)
    svc_search = grid_search(make_svc_trainer(svc_tol), svc_grid, tr.X, tr.y, stacking.k, seed)
    return TrainedExperiment(split, tr, te, ensemble, tree_search, svc_search)


def assert_disjoint(train_idx, test_idx) -> None:
    if np.intersect1d(np.asarray(train_idx), np.asarray(test_idx)).size:
        raise AssertionError("leakage: evaluation index found in the training split")
