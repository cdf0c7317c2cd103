"""Confusion matrices and the five evaluation metrics (accuracy, precision,
sensitivity, F1, diagnostic odds ratio), plus model comparison tables.

The positive class is 1 (at risk). Percentages are kept raw; display values
are rounded half-up to whole percent.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

METRIC_ROWS = ("Accuracy", "Precision", "Sensitivity", "F1-Score", "DOR")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {p.shape}")
    for name, a in (("y_true", t), ("y_pred", p)):
        if not np.all((a == 0) | (a == 1)):
            raise ValueError(f"{name} must contain only 0/1")
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        tn=int(np.sum((t == 0) & (p == 0))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
    )


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("accuracy of an empty confusion matrix")
    return 100.0 * (cm.tp + cm.tn) / cm.total


def precision(cm: ConfusionMatrix) -> float | None:
    d = cm.tp + cm.fp
    return None if d == 0 else 100.0 * cm.tp / d


def sensitivity(cm: ConfusionMatrix) -> float | None:
    d = cm.tp + cm.fn
    return None if d == 0 else 100.0 * cm.tp / d


def specificity(cm: ConfusionMatrix) -> float | None:
    d = cm.tn + cm.fp
    return None if d == 0 else 100.0 * cm.tn / d


def f1(cm: ConfusionMatrix) -> float | None:
    """Harmonic mean of precision and sensitivity; ``None`` when undefined."""
    p, s = precision(cm), sensitivity(cm)
    if p is None or s is None or p + s == 0:
        return None
    return 2.0 * p * s / (p + s)


def dor(cm: ConfusionMatrix) -> tuple[float, bool]:
    """Diagnostic odds ratio ``(tp*tn)/(fp*fn)`` and whether the
    Haldane-Anscombe +0.5 correction was applied (any zero cell)."""
    if min(cm.tp, cm.tn, cm.fp, cm.fn) == 0:
        return (cm.tp + 0.5) * (cm.tn + 0.5) / ((cm.fp + 0.5) * (cm.fn + 0.5)), True
    return cm.tp * cm.tn / (cm.fp * cm.fn), False


def round_half_up(x: float, ndigits: int = 0) -> float:
    q = 10.0**ndigits
    return math.floor(x * q + 0.5) / q


@dataclass(frozen=True)
class MetricsReport:
    confusion: ConfusionMatrix
    accuracy: float
    precision: float
    sensitivity: float
    f1: float
    dor: float
    dor_corrected: bool
    undefined: tuple = ()  # names of metrics reported as 0 because undefined

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix) -> "MetricsReport":
        undefined = []
        vals = {}
        for name, fn in (("precision", precision), ("sensitivity", sensitivity), ("f1", f1)):
            v = fn(cm)
            if v is None:
                undefined.append(name)
                v = 0.0
            vals[name] = v
        d, corrected = dor(cm)
        return cls(cm, accuracy(cm), vals["precision"], vals["sensitivity"], vals["f1"], d, corrected, tuple(undefined))

    def rounded(self) -> dict:
        return {
            "accuracy": int(round_half_up(self.accuracy)),
            "precision": int(round_half_up(self.precision)),
            "sensitivity": int(round_half_up(self.sensitivity)),
            "f1": int(round_half_up(self.f1)),
            "dor": round_half_up(self.dor, 2),
        }

    def to_dict(self, model: str | None = None) -> dict:
        d = {
            "confusion": self.confusion.to_dict(),
            "metrics": {
                "accuracy": self.accuracy,
                "precision": self.precision,
                "sensitivity": self.sensitivity,
                "f1": self.f1,
                "dor": self.dor,
                "dor_corrected": self.dor_corrected,
            },
            "rounded": self.rounded(),
            "undefined": list(self.undefined),
        }
        if model is not None:
            d = {"model": model, **d}
        return d


def evaluate(model, X_test, y_test) -> MetricsReport:
    y_test = np.asarray(y_test)
    if y_test.size == 0:
        raise ValueError("empty test set")
    return MetricsReport.from_confusion(confusion(y_test, model.predict_label(X_test)))


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple  # (model name, MetricsReport)

    def to_dict(self) -> list:
        return [rep.to_dict(name) for name, rep in self.rows]

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        """Aligned plain text, one five-row block per model."""
        name_w = max([len("Model")] + [len(n) for n, _ in self.rows])
        metric_w = max(len(m) for m in METRIC_ROWS)
        lines = [f"{'Model':<{name_w}}  {'Metric':<{metric_w}}  {'Value':>8}", "-" * (name_w + metric_w + 12)]
        for name, rep in self.rows:
            r = rep.rounded()
            dor_txt = f"{r['dor']:g}" + ("*" if rep.dor_corrected else "")
            vals = [f"{r['accuracy']}%", f"{r['precision']}%", f"{r['sensitivity']}%", f"{r['f1']}%", dor_txt]
            for i, (metric, v) in enumerate(zip(METRIC_ROWS, vals)):
                lines.append(f"{name if i == 0 else '':<{name_w}}  {metric:<{metric_w}}  {v:>8}")
            lines.append("-" * (name_w + metric_w + 12))
        if any(rep.dor_corrected for _, rep in self.rows):
            lines.append("* Haldane-Anscombe corrected (a confusion cell was zero)")
        return "\n".join(lines) + "\n"


def compare_models(models, X_test, y_test) -> ComparisonTable:
    """``models`` is an ordered mapping or sequence of ``(name, model)``."""
    items = models.items() if hasattr(models, "items") else models
    return ComparisonTable(tuple((name, evaluate(m, X_test, y_test)) for name, m in items))
