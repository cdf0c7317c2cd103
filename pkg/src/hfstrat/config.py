"""Experiment configuration (TOML) and run manifests."""
from __future__ import annotations

import copy
import datetime as dt
import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import __version__, _toml
from .cohort import CohortSchema, GeneratorSpec, PreprocessConfig, default_schema, load_schema
from .stacking import StackingConfig

DEFAULT_GRIDS = {
    "clinical": {"C": [0.01, 0.1, 1.0, 10.0, 100.0]},
    "echo": {"C": [0.01, 0.1, 1.0, 10.0, 100.0]},
    "meta": {"C": [0.01, 0.1, 1.0, 10.0, 100.0]},
    "forest": {"n_trees": [100, 300], "max_depth": [3, 5, None], "min_samples_leaf": [1, 3]},
    "tree": {"max_depth": [2, 3, 4, 5, None], "min_samples_split": [2, 5, 10]},
    "svc": {"C": [0.1, 1.0, 10.0], "kernel": ["linear", "rbf"]},
}


class ConfigError(ValueError):
    pass


def _none_tokens(values):
    # TOML has no null; "none" in a grid means "unbounded".
    return [None if isinstance(v, str) and v.lower() == "none" else v for v in values]


@dataclass
class ExperimentConfig:
    schema_path: str | None = None
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    generator: dict | None = None
    grids: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_GRIDS))
    stacking: dict = field(default_factory=dict)
    test_fraction: float = 0.2
    seed: int = 0
    output_dir: str = "runs"
    svc_tol: float = 1e-3
    raw: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        exp = d.get("experiment", {})
        if "seed" not in exp:
            raise ConfigError("experiment.seed is required")
        grids = copy.deepcopy(DEFAULT_GRIDS)
        for name, g in d.get("grids", {}).items():
            if name not in grids:
                raise ConfigError(f"unknown grid [grids.{name}]")
            if not isinstance(g, dict) or not g:
                raise ConfigError(f"[grids.{name}] must be a nonempty table")
            grids[name] = {k: _none_tokens(list(v)) for k, v in g.items()}
        try:
            pre = PreprocessConfig(**d.get("preprocess", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[preprocess]: {exc}") from None
        tf = float(exp.get("test_fraction", 0.2))
        if not 0 < tf < 1:
            raise ConfigError("experiment.test_fraction must lie in (0, 1)")
        return cls(
            schema_path=exp.get("schema") or None,
            preprocess=pre,
            generator=d.get("generator"),
            grids=grids,
            stacking=dict(d.get("stacking", {})),
            test_fraction=tf,
            seed=int(exp["seed"]),
            output_dir=exp.get("output_dir", "runs"),
            svc_tol=float(exp.get("svc_tol", 1e-3)),
            raw=d,
            base_dir=base_dir or Path.cwd(),
        )

    def load_schema(self) -> CohortSchema:
        if not self.schema_path:
            return default_schema()
        p = Path(self.schema_path)
        if not p.is_absolute():
            p = self.base_dir / p
        if not p.exists():
            raise ConfigError(f"schema file not found: {p}")
        return load_schema(p)

    def generator_spec(self) -> GeneratorSpec:
        if not self.generator:
            raise ConfigError("missing [generator] section (generator spec) in config")
        return GeneratorSpec.from_dict(self.generator)

    def stacking_config(self) -> StackingConfig:
        st = self.stacking
        known = {"k", "meta_protocol", "meta_features", "logistic_tol", "logistic_max_iter"}
        extra = set(st) - known
        if extra:
            raise ConfigError(f"unknown [stacking] keys {sorted(extra)}")
        return StackingConfig(
            clinical_grid=self.grids["clinical"],
            echo_grid=self.grids["echo"],
            forest_grid=self.grids["forest"],
            meta_grid=self.grids["meta"],
            seed=self.seed,
            **st,
        )

    def snapshot(self) -> dict:
        snap = copy.deepcopy(self.raw)
        snap.setdefault("experiment", {})["seed"] = self.seed
        return snap


def load_config(path=None, seed: int | None = None) -> ExperimentConfig:
    """Read a TOML experiment config; ``None`` loads the packaged default."""
    if path is None:
        text = resources.files("hfstrat.data").joinpath("default_experiment.toml").read_text("utf-8")
        base = Path.cwd()
    else:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        text = p.read_text("utf-8")
        base = p.parent
    try:
        d = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    if seed is not None:
        d.setdefault("experiment", {})["seed"] = seed
    return ExperimentConfig.from_dict(d, base)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, command: str, config: ExperimentConfig | None, outputs, inputs=()) -> dict:
    """Record every written file with its content hash.

    The manifest is the only artifact carrying wall-clock timestamps.
    """
    doc = {
        "tool": "hfstrat",
        "version": __version__,
        "command": command,
        "created_utc": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        "config": config.snapshot() if config else None,
        "inputs": [{"path": str(p), "sha256": sha256_file(p)} for p in inputs],
        "files": [
            {"path": os.path.relpath(p, Path(path).parent), "sha256": sha256_file(p), "bytes": os.path.getsize(p)}
            for p in outputs
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc
