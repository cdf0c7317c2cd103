"""Feature schema: names, clinical/echocardiographic grouping, kinds and domains."""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .. import _toml


class Group(str, enum.Enum):
    CLINICAL = "clinical"
    ECHO = "echocardiographic"


class Kind(str, enum.Enum):
    NUMERIC = "numeric"
    BINARY = "binary"
    CATEGORICAL = "categorical"


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    group: Group
    kind: Kind
    categories: tuple = ()
    low: float = -math.inf
    high: float = math.inf
    required: bool = True

    def __post_init__(self):
        if self.kind is Kind.CATEGORICAL and not self.categories:
            raise SchemaError(f"categorical feature {self.name!r} has an empty domain")
        if self.kind is Kind.NUMERIC and not self.low <= self.high:
            raise SchemaError(f"numeric feature {self.name!r} has min > max")
        if self.kind is Kind.BINARY and self.categories not in ((), (0, 1)):
            raise SchemaError(f"binary feature {self.name!r} must have domain {{0, 1}}")

    @property
    def domain(self):
        if self.kind is Kind.BINARY:
            return (0, 1)
        if self.kind is Kind.CATEGORICAL:
            return self.categories
        return (self.low, self.high)

    def in_domain(self, value) -> bool:
        if value is None:
            return False
        if self.kind is Kind.CATEGORICAL:
            return value in self.categories
        if isinstance(value, str):
            return False
        if not math.isfinite(value):
            return False
        if self.kind is Kind.BINARY:
            return value in (0, 1)
        return self.low <= value <= self.high

    def to_dict(self) -> dict:
        d = {"name": self.name, "group": self.group.value, "kind": self.kind.value}
        if self.kind is Kind.CATEGORICAL:
            d["categories"] = list(self.categories)
        elif self.kind is Kind.NUMERIC:
            d["range"] = [self.low, self.high]
        if not self.required:
            d["required"] = False
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        try:
            kind = Kind(d["kind"])
            group = Group(d["group"])
            name = d["name"]
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"bad feature entry {d!r}: {exc}") from None
        kw = {}
        if kind is Kind.CATEGORICAL:
            kw["categories"] = tuple(d.get("categories", ()))
        elif kind is Kind.NUMERIC and "range" in d:
            lo, hi = d["range"]
            kw["low"], kw["high"] = float(lo), float(hi)
        return cls(name=name, group=group, kind=kind, required=d.get("required", True), **kw)


@dataclass(frozen=True)
class CohortSchema:
    features: tuple

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if not names:
            raise SchemaError("schema has no features")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def __getitem__(self, name: str) -> FeatureSpec:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def __len__(self):
        return len(self.features)

    def group_names(self, group: Group) -> list[str]:
        return [f.name for f in self.features if f.group is group]

    def to_dict(self) -> dict:
        return {"feature": [f.to_dict() for f in self.features]}

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "CohortSchema":
        if "feature" not in d:
            raise SchemaError("schema document has no [[feature]] entries")
        return cls(tuple(FeatureSpec.from_dict(f) for f in d["feature"]))


def load_schema(path) -> CohortSchema:
    with open(path, "rb") as fh:
        return CohortSchema.from_dict(_toml.load(fh))


def default_schema() -> CohortSchema:
    """The 33-feature clinical/echocardiographic schema shipped with the package."""
    text = resources.files("hfstrat.data").joinpath("feature_schema.toml").read_text("utf-8")
    return CohortSchema.from_dict(_toml.loads(text))


def default_schema_path() -> Path:
    return Path(str(resources.files("hfstrat.data").joinpath("feature_schema.toml")))
