"""Versioned JSON documents for trained models."""
from __future__ import annotations

import json

from .logistic import LogisticModel
from .svc import SvcModel
from .tree import DecisionTreeModel, RandomForestModel

MODEL_FORMAT = "hfstrat.model"
MODEL_FORMAT_VERSION = 1

_KINDS = {
    "logistic": LogisticModel,
    "tree": DecisionTreeModel,
    "forest": RandomForestModel,
    "svc": SvcModel,
}


class ModelFormatError(ValueError):
    pass


def model_to_dict(model, schema_hash: str | None = None, **meta) -> dict:
    doc = {"format": MODEL_FORMAT, "version": MODEL_FORMAT_VERSION, "schema_hash": schema_hash}
    doc.update(meta)
    doc["model"] = model.to_dict()
    return doc


def model_from_dict(doc: dict):
    if doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"not a model document (format={doc.get('format')!r})")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {doc.get('version')!r}")
    body = doc["model"]
    try:
        cls = _KINDS[body["kind"]]
    except KeyError:
        raise ModelFormatError(f"unknown model kind {body.get('kind')!r}") from None
    return cls.from_dict(body)


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def dump_model(path, model, schema_hash: str | None = None, **meta) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model_to_dict(model, schema_hash, **meta)))


def load_model(path):
    """Return ``(model, document)``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return model_from_dict(doc), doc
