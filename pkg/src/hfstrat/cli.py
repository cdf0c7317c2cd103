"""Command-line interface: synth, preprocess, train, evaluate, compare, predict.

Exit codes: 0 success, 1 runtime failure, 2 configuration or validation error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .cohort import (
    CohortError,
    Encoder,
    Group,
    SynthesisError,
    encode,
    preprocess,
    read_cohort,
    read_labeled,
    synthesize_cohort,
    write_cohort,
    write_labeled,
)
from .cohort.records import parse_value
from .config import ConfigError, load_config, write_manifest
from .learners import ModelFormatError, load_model
from .learners.serialize import dump_model
from .metrics import compare_models
from .pipeline import assert_disjoint, train_experiment
from .selection import SplitIndices
from .stacking import StackingEnsemble, StackingError, predict_stacking, predict_with_missing_group

log = logging.getLogger("hfstrat")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Configuration or validation problem (exit code 2)."""


def _setup_logging():
    level = os.environ.get("HFSTRAT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _config(args):
    try:
        return load_config(args.config, seed=args.seed)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _ids_digest(ids) -> str:
    return hashlib.sha256("\n".join(ids).encode("utf-8")).hexdigest()


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


# ------------------------------------------------------------------ commands

def cmd_synth(args) -> int:
    cfg = _config(args)
    try:
        spec = cfg.generator_spec()
        schema = cfg.load_schema()
        records = synthesize_cohort(spec, cfg.seed, schema)
    except (ConfigError, SynthesisError) as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    write_cohort(out, records, schema)
    write_manifest(str(out) + ".manifest.json", "synth", cfg, [out])
    print(f"wrote {len(records)} records to {out}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    cfg = _config(args)
    schema = cfg.load_schema()
    records, report = read_cohort(args.inp, schema)
    for lineno, rid, msg in report.rejected:
        log.warning("line %d (%s) rejected: %s", lineno, rid, msg)
    cohort = preprocess(records, schema, cfg.preprocess)
    out = Path(args.out)
    write_labeled(out, cohort)
    funnel_path = out.with_suffix(".funnel.json")
    funnel = json.loads(cohort.funnel_json())
    _write_json(funnel_path, funnel)
    write_manifest(str(out) + ".manifest.json", "preprocess", cfg, [out, funnel_path], [args.inp])
    counts = " -> ".join(str(s["records_remaining"]) for s in funnel)
    print(f"funnel: {len(records) + len(report.rejected)} rows read, {counts}; labeled {len(cohort)} records")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    schema = cfg.load_schema()
    cohort = read_labeled(args.inp, schema)
    try:
        stacking = cfg.stacking_config()
    except (StackingError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    exp = train_experiment(cohort, stacking, cfg.grids["tree"], cfg.grids["svc"], cfg.test_fraction, cfg.svc_tol)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ids = [r.id for r in cohort.records]
    split_doc = {
        **exp.split.to_dict(),
        "test_fraction": cfg.test_fraction,
        "n_records": len(ids),
        "ids_sha256": _ids_digest(ids),
        "test_ids": [ids[i] for i in exp.split.test],
    }
    written = []
    paths = {
        "split": outdir / "split.json",
        "ensemble": outdir / "ensemble.json",
        "tree": outdir / "tree.json",
        "svc": outdir / "svc.json",
    }
    _write_json(paths["split"], split_doc)
    exp.ensemble.save(paths["ensemble"])
    h = exp.ensemble.schema_hash
    dump_model(paths["tree"], exp.tree_search.model, h, name="tree", best_params=exp.tree_search.to_dict()["winner"])
    dump_model(paths["svc"], exp.svc_search.model, h, name="svc", best_params=exp.svc_search.to_dict()["winner"])
    written += list(paths.values())
    grids = {name: exp.ensemble.provenance["base"][name]["grid"] for name in ("clinical", "echo", "forest")}
    grids["meta"] = exp.ensemble.provenance["meta"]["grid"]
    grids["tree"] = exp.tree_search.to_dict()
    grids["svc"] = exp.svc_search.to_dict()
    for name, g in grids.items():
        p = outdir / f"grid_{name}.json"
        _write_json(p, g)
        written.append(p)
    write_manifest(outdir / "manifest.json", "train", cfg, written, [args.inp])
    print(f"trained on {len(exp.split.train)} records; held out {len(exp.split.test)}; artifacts in {outdir}")
    return EXIT_OK


def _expand_models(spec: str):
    """``--models`` entries: model files or a training directory; ensembles expand to four rows."""
    items = []
    for part in [p for p in spec.split(",") if p.strip()]:
        p = Path(part.strip())
        if p.is_dir():
            items += [p / "ensemble.json", p / "tree.json", p / "svc.json"]
        else:
            items.append(p)
    return items


def _load_named_models(paths, schema_hash: str):
    named = []
    split_path = None
    for p in paths:
        if not p.exists():
            raise UsageError(f"model file not found: {p}")
        with open(p, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("schema_hash") != schema_hash:
            raise UsageError(
                f"schema hash mismatch: {p} was trained on encoding {str(doc.get('schema_hash'))[:12]}..., "
                f"data encodes as {schema_hash[:12]}...; refusing to evaluate"
            )
        if doc.get("format") == "hfstrat.stacking":
            e = StackingEnsemble.from_dict(doc)
            named.append(("meta", e))
            named += list(e.base_models().items())
        else:
            try:
                model, _ = load_model(p)
            except ModelFormatError as exc:
                raise UsageError(f"{p}: {exc}") from None
            named.append((doc.get("name") or p.stem, model))
        split_path = split_path or p.parent / "split.json"
    return named, split_path


def _test_rows(args, cohort, split_path):
    path = Path(args.split) if args.split else split_path
    if path is None or not path.exists():
        raise UsageError(f"persisted split file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    split = SplitIndices.from_dict(doc)
    ids = [r.id for r in cohort.records]
    if doc.get("ids_sha256") != _ids_digest(ids):
        raise UsageError("split file does not belong to this labeled dataset (record ids differ)")
    assert_disjoint(split.train, split.test)
    if [ids[i] for i in split.test] != doc.get("test_ids"):
        raise AssertionError("leakage guard: test indices do not match persisted test ids")
    return split


def _report(args, named, cohort, split):
    dm = encode(cohort)
    te = dm.take_rows(split.test)
    table = compare_models(named, te.X, te.y)
    text, js = table.to_text(), table.to_json()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.json").write_text(js, encoding="utf-8")
        (out / "comparison.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(js if args.format == "json" else text)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    schema = cfg.load_schema()
    cohort = read_labeled(args.inp, schema)
    h = Encoder(schema).hash
    named, split_path = _load_named_models(_expand_models(args.models), h)
    split = _test_rows(args, cohort, split_path)
    return _report(args, named, cohort, split)


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    schema = cfg.load_schema()
    cohort = read_labeled(args.inp, schema)
    h = Encoder(schema).hash
    named, split_path = _load_named_models(_expand_models(args.models), h)
    if args.name:
        named = [(n, m) for n, m in named if n in args.name.split(",")]
        if not named:
            raise UsageError(f"no model named {args.name!r}")
    else:
        named = named[:1]
    split = _test_rows(args, cohort, split_path)
    return _report(args, named, cohort, split)


def _parse_record(doc: dict, schema):
    if not isinstance(doc, dict):
        raise UsageError("record must be a JSON object of feature values")
    unknown = [k for k in doc if k not in schema.names and k != "id"]
    if unknown:
        raise UsageError(f"unknown fields in record: {unknown}")
    values, errors = {}, []
    for f in schema.features:
        raw = doc.get(f.name)
        if raw is None or raw == "":
            values[f.name] = None
            continue
        if f.kind.value == "categorical":
            v = str(raw)
        elif isinstance(raw, bool) or not isinstance(raw, (int, float, str)):
            errors.append(f"{f.name}: expected a number, got {raw!r}")
            continue
        elif isinstance(raw, str):
            try:
                v = parse_value(f, raw)
            except CohortError as exc:
                errors.append(str(exc))
                continue
        else:
            v = raw
        if not f.in_domain(v):
            errors.append(f"{f.name}: value {raw!r} outside domain {list(f.domain)}")
        values[f.name] = v
    if errors:
        raise UsageError("invalid record: " + "; ".join(errors))
    missing_groups = []
    for g in (Group.CLINICAL, Group.ECHO):
        names = schema.group_names(g)
        absent = [n for n in names if values[n] is None]
        if len(absent) == len(names):
            missing_groups.append(g)
        elif absent:
            raise UsageError(f"record incomplete in {g.value} group: missing {absent}")
    return values, missing_groups


def cmd_predict(args) -> int:
    cfg = _config(args)
    schema = cfg.load_schema()
    try:
        e = StackingEnsemble.load(args.model)
    except (OSError, json.JSONDecodeError, StackingError) as exc:
        raise UsageError(f"cannot load ensemble {args.model}: {exc}") from None
    with open(args.record, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed record JSON: {exc}") from None
    values, missing = _parse_record(doc, schema)
    enc = Encoder(schema)
    x = enc.encode_values(values)
    try:
        if missing:
            pred = predict_with_missing_group(e, x, missing, enc.hash)
        else:
            pred = predict_stacking(e, x, enc.hash)
    except StackingError as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(json.dumps(pred.to_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hfstrat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment TOML (packaged default when omitted)")
        sp.add_argument("--seed", type=int, help="overrides experiment.seed")
        return sp

    sp = common(sub.add_parser("synth", help="generate a synthetic raw cohort CSV"))
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = common(sub.add_parser("preprocess", help="run the preprocessing funnel and label records"))
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_preprocess)

    sp = common(sub.add_parser("train", help="train the stacking ensemble and baselines"))
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_train)

    for name, func, hlp in (
        ("evaluate", cmd_evaluate, "metrics for one model on the persisted test split"),
        ("compare", cmd_compare, "comparison table on the persisted test split"),
    ):
        sp = common(sub.add_parser(name, help=hlp))
        sp.add_argument("--in", dest="inp", required=True, help="labeled CSV used for training")
        sp.add_argument("--models", required=True, help="comma-separated model files or a training directory")
        sp.add_argument("--split", help="split file (default: split.json beside the first model)")
        sp.add_argument("--format", choices=("json", "text"), default="text")
        sp.add_argument("--out", help="also write comparison.json / comparison.txt here")
        if name == "evaluate":
            sp.add_argument("--name", help="model name(s) to report, e.g. meta or clinical")
        sp.set_defaults(func=func)

    sp = common(sub.add_parser("predict", help="predict one patient record"))
    sp.add_argument("--model", required=True, help="ensemble JSON")
    sp.add_argument("--record", required=True, help="JSON object of raw feature values")
    sp.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CohortError, StackingError, OSError, ValueError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
