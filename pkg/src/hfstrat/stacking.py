"""Domain-segregated stacking: a clinical-block logistic model, an
echocardiographic-block logistic model and a full-feature random forest
feed their labels and confidences to a logistic meta-model."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .cohort.encoding import DesignMatrix
from .cohort.schema import Group
from .learners import ForestParams, train_forest, train_logistic
from .learners.serialize import model_from_dict, model_to_dict
from .numerics import derive_seed
from .selection import grid_search, stratified_kfold

log = logging.getLogger(__name__)

ENSEMBLE_FORMAT = "hfstrat.stacking"
ENSEMBLE_VERSION = 1
BASE_NAMES = ("clinical", "echo", "forest")
OUT_OF_FOLD = "out_of_fold"
IN_SAMPLE = "in_sample"

DEFAULT_LOGISTIC_GRID = {"C": [0.01, 0.1, 1.0, 10.0, 100.0]}
DEFAULT_FOREST_GRID = {"n_trees": [100, 300], "max_depth": [3, 5, None], "min_samples_leaf": [1, 3]}


class StackingError(ValueError):
    pass


@dataclass(frozen=True)
class StackingConfig:
    clinical_grid: dict = field(default_factory=lambda: dict(DEFAULT_LOGISTIC_GRID))
    echo_grid: dict = field(default_factory=lambda: dict(DEFAULT_LOGISTIC_GRID))
    forest_grid: dict = field(default_factory=lambda: dict(DEFAULT_FOREST_GRID))
    meta_grid: dict = field(default_factory=lambda: dict(DEFAULT_LOGISTIC_GRID))
    k: int = 5
    meta_protocol: str = OUT_OF_FOLD
    meta_features: str = "labels_and_confidences"  # or "confidences"
    seed: int = 0
    logistic_tol: float = 1e-6
    logistic_max_iter: int = 10000

    def __post_init__(self):
        if self.k < 2:
            raise StackingError("k must be >= 2")
        if self.meta_protocol not in (OUT_OF_FOLD, IN_SAMPLE):
            raise StackingError(f"meta_protocol must be {OUT_OF_FOLD!r} or {IN_SAMPLE!r}")
        if self.meta_features not in ("labels_and_confidences", "confidences"):
            raise StackingError("meta_features must be 'labels_and_confidences' or 'confidences'")
        for name in ("clinical_grid", "echo_grid", "forest_grid", "meta_grid"):
            g = getattr(self, name)
            if not g or any(len(v) == 0 for v in g.values()):
                raise StackingError(f"{name} must be nonempty")

    def to_dict(self) -> dict:
        return {
            "clinical_grid": self.clinical_grid,
            "echo_grid": self.echo_grid,
            "forest_grid": self.forest_grid,
            "meta_grid": self.meta_grid,
            "k": self.k,
            "meta_protocol": self.meta_protocol,
            "meta_features": self.meta_features,
            "seed": self.seed,
            "logistic_tol": self.logistic_tol,
            "logistic_max_iter": self.logistic_max_iter,
        }


class ColumnModel:
    """A model trained on a column subset, applied to full-width rows."""

    def __init__(self, model, columns):
        self.model = model
        self.columns = np.asarray(columns, dtype=np.int64)

    def _sub(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        return X[:, self.columns]

    def predict_confidence(self, X):
        return self.model.predict_confidence(self._sub(X))

    def predict_label(self, X):
        return self.model.predict_label(self._sub(X))


def _logistic_trainer(cfg: StackingConfig):
    def trainer(X, y, C):
        return train_logistic(X, y, C=C, tol=cfg.logistic_tol, max_iter=cfg.logistic_max_iter)

    return trainer


def _forest_trainer(seed: int):
    def trainer(X, y, **params):
        return train_forest(X, y, ForestParams(**params), seed=seed)

    return trainer


def meta_feature_matrix(base_outputs, mode: str = "labels_and_confidences") -> np.ndarray:
    """Columns ``[clinical_label, clinical_conf, echo_label, echo_conf, full_label, full_conf]``
    (confidences only in ``"confidences"`` mode)."""
    cols = []
    for label, conf in base_outputs:
        if mode == "labels_and_confidences":
            cols.append(np.asarray(label, dtype=np.float64))
        cols.append(np.asarray(conf, dtype=np.float64))
    return np.column_stack(cols)


def _base_outputs(models, X_blocks):
    out = []
    for m, Xb in zip(models, X_blocks):
        conf = np.asarray(m.predict_confidence(Xb), dtype=np.float64)
        out.append(((conf >= 0.5).astype(np.int64), conf))
    return out


@dataclass
class StackingEnsemble:
    clinical_model: object
    echo_model: object
    full_model: object
    meta_model: object
    clinical_columns: np.ndarray
    echo_columns: np.ndarray
    n_columns: int
    schema_hash: str
    majority_class: int
    meta_features: str = "labels_and_confidences"
    provenance: dict = field(default_factory=dict)

    # -- inference -------------------------------------------------------------------
    def _check_width(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_columns:
            raise StackingError(f"expected {self.n_columns} encoded columns, got {X.shape[1]}")
        return X

    def base_outputs(self, X):
        X = self._check_width(X)
        return _base_outputs(
            (self.clinical_model, self.echo_model, self.full_model),
            (X[:, self.clinical_columns], X[:, self.echo_columns], X),
        )

    def meta_features_for(self, X) -> np.ndarray:
        return meta_feature_matrix(self.base_outputs(X), self.meta_features)

    def predict_confidence(self, X) -> np.ndarray:
        return self.meta_model.predict_confidence(self.meta_features_for(X))

    def predict_label(self, X) -> np.ndarray:
        return (self.predict_confidence(X) >= 0.5).astype(np.int64)

    def base_models(self) -> dict:
        """Base models as full-width classifiers, keyed by name."""
        return {
            "clinical": ColumnModel(self.clinical_model, self.clinical_columns),
            "echo": ColumnModel(self.echo_model, self.echo_columns),
            "forest": ColumnModel(self.full_model, np.arange(self.n_columns)),
        }

    # -- serialization ---------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": ENSEMBLE_FORMAT,
            "version": ENSEMBLE_VERSION,
            "schema_hash": self.schema_hash,
            "n_columns": self.n_columns,
            "column_split": {
                "clinical": self.clinical_columns.tolist(),
                "echocardiographic": self.echo_columns.tolist(),
            },
            "majority_class": self.majority_class,
            "meta_features": self.meta_features,
            "models": {
                "clinical": model_to_dict(self.clinical_model, self.schema_hash),
                "echo": model_to_dict(self.echo_model, self.schema_hash),
                "forest": model_to_dict(self.full_model, self.schema_hash),
                "meta": model_to_dict(self.meta_model, None),
            },
            "provenance": self.provenance,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "StackingEnsemble":
        if d.get("format") != ENSEMBLE_FORMAT or d.get("version") != ENSEMBLE_VERSION:
            raise StackingError("not a supported stacking ensemble document")
        m = d["models"]
        return cls(
            clinical_model=model_from_dict(m["clinical"]),
            echo_model=model_from_dict(m["echo"]),
            full_model=model_from_dict(m["forest"]),
            meta_model=model_from_dict(m["meta"]),
            clinical_columns=np.array(d["column_split"]["clinical"], dtype=np.int64),
            echo_columns=np.array(d["column_split"]["echocardiographic"], dtype=np.int64),
            n_columns=int(d["n_columns"]),
            schema_hash=d["schema_hash"],
            majority_class=int(d["majority_class"]),
            meta_features=d.get("meta_features", "labels_and_confidences"),
            provenance=d.get("provenance", {}),
        )

    @classmethod
    def loads(cls, text: str) -> "StackingEnsemble":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "StackingEnsemble":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def _summary(gr) -> dict:
    return {"best_params": gr.to_dict()["winner"], "best_cv_accuracy": gr.best.mean_score, "grid": gr.to_dict()}


def train_stacking(dm: DesignMatrix, cfg: StackingConfig = StackingConfig()) -> StackingEnsemble:
    """Grid-search the three base models, build meta-features by the configured
    protocol, then grid-search the meta-model on them."""
    if dm.y is None:
        raise StackingError("design matrix has no labels")
    X, y = dm.X, np.asarray(dm.y, dtype=np.int64)
    if np.unique(y).size < 2:
        raise StackingError("both classes must be present")
    clin = dm.group_columns(Group.CLINICAL)
    echo = dm.group_columns(Group.ECHO)
    if clin.size == 0 or echo.size == 0:
        raise StackingError("degenerate group: a feature group has zero columns")
    if np.isnan(X).any():
        raise StackingError("training matrix contains missing values")

    logit = _logistic_trainer(cfg)
    forest_seed = derive_seed(cfg.seed, "forest")
    forest = _forest_trainer(forest_seed)
    blocks = (X[:, clin], X[:, echo], X)
    trainers = (logit, logit, forest)
    grids = (cfg.clinical_grid, cfg.echo_grid, cfg.forest_grid)

    searches = [grid_search(t, g, Xb, y, cfg.k, cfg.seed) for t, g, Xb in zip(trainers, grids, blocks)]
    base = [s.model for s in searches]

    fold_of_sample = None
    if cfg.meta_protocol == OUT_OF_FOLD:
        plan = stratified_kfold(y, cfg.k, derive_seed(cfg.seed, "out_of_fold"))
        labels = [np.zeros(y.size, dtype=np.int64) for _ in BASE_NAMES]
        confs = [np.zeros(y.size) for _ in BASE_NAMES]
        fold_of_sample = np.full(y.size, -1, dtype=np.int64)
        for f, (tr, te) in enumerate(plan):
            if np.intersect1d(tr, te).size:
                raise AssertionError("out-of-fold leakage: held-out sample in its own training fold")
            if np.any(fold_of_sample[te] >= 0):
                raise AssertionError("out-of-fold bookkeeping: sample assigned to two folds")
            fold_of_sample[te] = f
            for b, (t, s, Xb) in enumerate(zip(trainers, searches, blocks)):
                m = t(Xb[tr], y[tr], **s.best_params)
                conf = np.asarray(m.predict_confidence(Xb[te]), dtype=np.float64)
                confs[b][te] = conf
                labels[b][te] = (conf >= 0.5).astype(np.int64)
        if np.any(fold_of_sample < 0):
            raise AssertionError("out-of-fold bookkeeping: sample without meta-features")
        outputs = list(zip(labels, confs))
    else:
        outputs = _base_outputs(base, blocks)

    Z = meta_feature_matrix(outputs, cfg.meta_features)
    meta_search = grid_search(logit, cfg.meta_grid, Z, y, cfg.k, cfg.seed)

    n_pos = int(y.sum())
    majority = 1 if n_pos * 2 >= y.size else 0
    provenance = {
        "config": cfg.to_dict(),
        "forest_seed": forest_seed,
        "n_train": int(y.size),
        "base": {name: _summary(s) for name, s in zip(BASE_NAMES, searches)},
        "meta": _summary(meta_search),
        "oof_fold_of_sample": None if fold_of_sample is None else fold_of_sample.tolist(),
    }
    return StackingEnsemble(
        clinical_model=base[0],
        echo_model=base[1],
        full_model=base[2],
        meta_model=meta_search.model,
        clinical_columns=clin,
        echo_columns=echo,
        n_columns=X.shape[1],
        schema_hash=dm.schema_hash,
        majority_class=majority,
        meta_features=cfg.meta_features,
        provenance=provenance,
    )


@dataclass(frozen=True)
class Prediction:
    label: int
    confidence: float
    explanation: tuple  # ((model name, label, confidence), ...)
    degraded: bool = False

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "confidence": self.confidence,
            "degraded": self.degraded,
            "explanation": [{"model": n, "label": lab, "confidence": c} for n, lab, c in self.explanation],
        }


def _finish(e: StackingEnsemble, outputs, degraded: bool) -> Prediction:
    Z = meta_feature_matrix([(np.array([lab]), np.array([c])) for lab, c in outputs], e.meta_features)
    conf = float(e.meta_model.predict_confidence(Z)[0])
    expl = tuple((name, int(lab), float(c)) for name, (lab, c) in zip(BASE_NAMES, outputs))
    return Prediction(int(conf >= 0.5), conf, expl, degraded)


def predict_stacking(e: StackingEnsemble, x, schema_hash: str | None = None) -> Prediction:
    """Predict one encoded record, returning each base model's vote as explanation."""
    if schema_hash is not None and schema_hash != e.schema_hash:
        raise StackingError("schema hash mismatch between record encoding and ensemble")
    X = e._check_width(x)
    if X.shape[0] != 1:
        raise StackingError("predict_stacking takes a single record")
    if np.isnan(X).any():
        raise StackingError("record has missing values; use predict_with_missing_group")
    outputs = [(int(lab[0]), float(c[0])) for lab, c in e.base_outputs(X)]
    return _finish(e, outputs, False)


def predict_with_missing_group(e: StackingEnsemble, x, missing, schema_hash: str | None = None) -> Prediction:
    """Predict when one feature group is absent.

    The absent group's model and the full-feature forest contribute the
    neutral pair (training majority class, 0.5).
    """
    if schema_hash is not None and schema_hash != e.schema_hash:
        raise StackingError("schema hash mismatch between record encoding and ensemble")
    missing = set(Group(m) for m in ([missing] if isinstance(missing, (str, Group)) else missing))
    if missing >= {Group.CLINICAL, Group.ECHO}:
        raise StackingError("both feature groups missing; nothing to predict from")
    if not missing:
        return predict_stacking(e, x, schema_hash)
    X = e._check_width(x)
    neutral = (e.majority_class, 0.5)
    present_cols = e.echo_columns if Group.CLINICAL in missing else e.clinical_columns
    if np.isnan(X[:, present_cols]).any():
        raise StackingError("the present feature group has missing values")
    if Group.CLINICAL in missing:
        c = float(e.echo_model.predict_confidence(X[:, e.echo_columns])[0])
        outputs = [neutral, (int(c >= 0.5), c), neutral]
    else:
        c = float(e.clinical_model.predict_confidence(X[:, e.clinical_columns])[0])
        outputs = [(int(c >= 0.5), c), neutral, neutral]
    return _finish(e, outputs, True)


def check_oof_bookkeeping(e: StackingEnsemble) -> bool:
    """Every training sample got its meta-features from exactly one held-out fold."""
    folds = e.provenance.get("oof_fold_of_sample")
    if folds is None:
        return e.provenance.get("config", {}).get("meta_protocol") == IN_SAMPLE
    f = np.asarray(folds)
    k = e.provenance["config"]["k"]
    return bool(f.size == e.provenance["n_train"] and f.min() >= 0 and f.max() < k)
