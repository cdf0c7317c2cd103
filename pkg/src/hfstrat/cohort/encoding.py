"""Schema-driven encoding of labeled cohorts into design matrices, and the
clinical/echocardiographic column partition."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .records import LabeledCohort
from .schema import CohortSchema, Group, Kind


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray | None
    column_names: tuple
    column_group: tuple
    encoder_map: dict  # feature name -> tuple of column indices into X
    schema_hash: str
    source_columns: tuple = ()  # indices into the parent matrix, for blocks

    def __post_init__(self):
        if self.X.shape[1] != len(self.column_names) or len(self.column_names) != len(self.column_group):
            raise ValueError("column metadata does not match X")
        if self.y is not None and len(self.y) != self.X.shape[0]:
            raise ValueError("X and y have different lengths")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_cols(self) -> int:
        return self.X.shape[1]

    def group_columns(self, group: Group) -> np.ndarray:
        return np.array([i for i, g in enumerate(self.column_group) if g is group], dtype=int)

    def take_rows(self, idx) -> "DesignMatrix":
        idx = np.asarray(idx, dtype=int)
        return DesignMatrix(
            self.X[idx],
            None if self.y is None else self.y[idx],
            self.column_names,
            self.column_group,
            self.encoder_map,
            self.schema_hash,
            self.source_columns,
        )

    def select_columns(self, cols) -> "DesignMatrix":
        cols = [int(c) for c in cols]
        remap = {c: i for i, c in enumerate(cols)}
        enc = {
            f: tuple(remap[c] for c in cs)
            for f, cs in self.encoder_map.items()
            if cs and all(c in remap for c in cs)
        }
        parent = self.source_columns or tuple(range(self.n_cols))
        return DesignMatrix(
            self.X[:, cols],
            self.y,
            tuple(self.column_names[c] for c in cols),
            tuple(self.column_group[c] for c in cols),
            enc,
            self.schema_hash,
            tuple(parent[c] for c in cols),
        )


@dataclass(frozen=True)
class Encoder:
    """Column layout for a schema; categorical domains come from the schema,
    so every cohort under the same schema gets the same columns."""

    schema: CohortSchema

    @property
    def layout(self):
        cols = []
        for f in self.schema.features:
            if f.kind is Kind.CATEGORICAL:
                cols.extend((f, c) for c in f.categories)
            else:
                cols.append((f, None))
        return cols

    @property
    def column_names(self) -> tuple:
        return tuple(f.name if c is None else f"{f.name}={c}" for f, c in self.layout)

    @property
    def column_group(self) -> tuple:
        return tuple(f.group for f, _ in self.layout)

    @property
    def encoder_map(self) -> dict:
        out, i = {}, 0
        for f in self.schema.features:
            width = len(f.categories) if f.kind is Kind.CATEGORICAL else 1
            out[f.name] = tuple(range(i, i + width))
            i += width
        return out

    @property
    def hash(self) -> str:
        """Identity of the encoding: schema plus derived column layout."""
        blob = json.dumps(
            {
                "schema": self.schema.hash(),
                "columns": list(self.column_names),
                "groups": [g.value for g in self.column_group],
            },
            separators=(",", ":"),
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def encode_values(self, values: dict) -> np.ndarray:
        """Encode one record's feature values; missing features become NaN columns."""
        row = []
        for f in self.schema.features:
            v = values.get(f.name)
            if f.kind is Kind.CATEGORICAL:
                if v is None:
                    row.extend([np.nan] * len(f.categories))
                else:
                    if v not in f.categories:
                        raise ValueError(f"{f.name}: value {v!r} outside domain {list(f.categories)}")
                    row.extend(1.0 if c == v else 0.0 for c in f.categories)
            else:
                row.append(np.nan if v is None else float(v))
        return np.array(row, dtype=np.float64)

    def decode_row(self, row) -> dict:
        out = {}
        for f in self.schema.features:
            cols = self.encoder_map[f.name]
            if f.kind is Kind.CATEGORICAL:
                block = np.asarray(row)[list(cols)]
                out[f.name] = f.categories[int(np.argmax(block))]
            elif f.kind is Kind.BINARY:
                out[f.name] = int(row[cols[0]])
            else:
                out[f.name] = float(row[cols[0]])
        return out

    def encode_records(self, records, y=None) -> DesignMatrix:
        X = np.array([self.encode_values(r.values) for r in records], dtype=np.float64)
        if X.size == 0:
            X = X.reshape(len(records), len(self.layout))
        return DesignMatrix(
            X,
            None if y is None else np.asarray(y, dtype=np.int64),
            self.column_names,
            self.column_group,
            self.encoder_map,
            self.hash,
        )


def encode(cohort: LabeledCohort) -> DesignMatrix:
    if len(cohort) == 0:
        raise ValueError("cannot encode an empty cohort")
    return Encoder(cohort.schema).encode_records(cohort.records, cohort.labels)


def split_columns(dm: DesignMatrix):
    """Partition into (clinical block, echocardiographic block)."""
    return (
        dm.select_columns(dm.group_columns(Group.CLINICAL)),
        dm.select_columns(dm.group_columns(Group.ECHO)),
    )
