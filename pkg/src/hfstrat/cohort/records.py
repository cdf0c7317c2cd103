"""Patient records: CSV ingestion, lifespan derivation, the preprocessing
funnel and three-year labeling."""
from __future__ import annotations

import csv
import datetime as dt
import json
import logging
from dataclasses import dataclass, field

from .schema import CohortSchema, Kind

log = logging.getLogger(__name__)

AT_RISK = 1
NOT_AT_RISK = 0

META_COLUMNS = ("id", "characterization_date", "death_date", "last_followup_date")
DIAGNOSIS_SEPARATORS = ("+", ";", "|", "/")


class CohortError(ValueError):
    pass


@dataclass(frozen=True)
class RawPatientRecord:
    id: str
    values: dict
    characterization_date: dt.date
    death_date: dt.date | None = None
    last_followup_date: dt.date | None = None

    def __post_init__(self):
        for label, d in (("death_date", self.death_date), ("last_followup_date", self.last_followup_date)):
            if d is not None and d < self.characterization_date:
                raise CohortError(f"{label} {d} precedes characterization_date {self.characterization_date}")


@dataclass(frozen=True)
class PreprocessConfig:
    label_threshold_days: int = 1095
    min_followup_days: int = 1095

    def __post_init__(self):
        if self.label_threshold_days <= 0 or self.min_followup_days <= 0:
            raise ValueError("thresholds must be strictly positive")


@dataclass(frozen=True)
class FunnelStep:
    step_name: str
    records_in: int
    records_remaining: int


@dataclass
class LabeledCohort:
    schema: CohortSchema
    records: list
    lifespans: list
    censored: list
    labels: list
    funnel_report: list
    initial_count: int = 0

    def __post_init__(self):
        if not (len(self.records) == len(self.labels) == len(self.lifespans) == len(self.censored)):
            raise CohortError("records, lifespans, censored and labels must align")

    def __len__(self):
        return len(self.records)

    def funnel_json(self) -> str:
        return json.dumps(
            [
                {"step_name": s.step_name, "records_in": s.records_in, "records_remaining": s.records_remaining}
                for s in self.funnel_report
            ],
            indent=2,
        )


@dataclass
class LoadReport:
    rows_read: int = 0
    rejected: list = field(default_factory=list)  # (line number, id, message)
    ignored_columns: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.rejected


# --------------------------------------------------------------------------- I/O

def _parse_date(text: str, column: str):
    text = text.strip()
    if not text:
        return None
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise CohortError(f"unparseable date in {column}: {text!r}") from None


def parse_value(spec, text):
    """Convert a CSV cell to a feature value; empty cells are missing (``None``)."""
    if text is None:
        return None
    text = text.strip()
    if text == "":
        return None
    if spec.kind is Kind.CATEGORICAL:
        return text
    try:
        v = float(text)
    except ValueError:
        raise CohortError(f"non-numeric value in {spec.name}: {text!r}") from None
    if spec.kind is Kind.BINARY and v.is_integer():
        return int(v)
    return v


def split_diagnosis(text: str) -> tuple:
    """Split a raw two-valued diagnosis string into (primary, secondary)."""
    text = (text or "").strip()
    if not text:
        return None, None
    for sep in DIAGNOSIS_SEPARATORS:
        if sep in text:
            first, second = text.split(sep, 1)
            return first.strip(), second.strip() or "none"
    return text, "none"


def read_cohort(path, schema: CohortSchema, *, split_diagnosis_column: str | None = None, extra_columns=()):
    """Read a cohort CSV, returning ``(records, LoadReport)``.

    Bad rows are collected in the report rather than raised; a malformed
    header raises :class:`CohortError`.
    """
    report = LoadReport()
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CohortError("malformed header: file is empty") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise CohortError("malformed header: duplicate column names")
        needed = list(META_COLUMNS[:2])
        feature_cols = list(schema.names)
        if split_diagnosis_column:
            needed.append(split_diagnosis_column)
            feature_cols = [n for n in feature_cols if n not in ("Primary_Diagnosis", "Secondary_Diagnosis")]
        missing = [c for c in needed + feature_cols if c not in header]
        if missing:
            raise CohortError(f"malformed header: missing columns {missing}")
        known = set(META_COLUMNS) | set(schema.names) | {split_diagnosis_column} | set(extra_columns)
        report.ignored_columns = [h for h in header if h not in known]
        for col in report.ignored_columns:
            log.warning("ignoring unknown column %r", col)
        pos = {h: i for i, h in enumerate(header)}

        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            report.rows_read += 1
            get = lambda c: row[pos[c]] if c in pos and pos[c] < len(row) else ""  # noqa: E731
            rid = get("id").strip() or f"row{lineno}"
            if len(row) != len(header):
                report.rejected.append((lineno, rid, f"expected {len(header)} cells, got {len(row)}"))
                continue
            try:
                values = {}
                for name in feature_cols:
                    values[name] = parse_value(schema[name], get(name))
                if split_diagnosis_column:
                    prim, sec = split_diagnosis(get(split_diagnosis_column))
                    values["Primary_Diagnosis"], values["Secondary_Diagnosis"] = prim, sec
                char = _parse_date(get("characterization_date"), "characterization_date")
                if char is None:
                    raise CohortError("missing characterization_date")
                rec = RawPatientRecord(
                    id=rid,
                    values={n: values[n] for n in schema.names},
                    characterization_date=char,
                    death_date=_parse_date(get("death_date"), "death_date"),
                    last_followup_date=_parse_date(get("last_followup_date"), "last_followup_date"),
                )
            except CohortError as exc:
                report.rejected.append((lineno, rid, str(exc)))
                continue
            records.append(rec)
    return records, report


def load_cohort(path, schema: CohortSchema, **kw) -> list:
    records, report = read_cohort(path, schema, **kw)
    for lineno, rid, msg in report.rejected:
        log.warning("line %d (%s) rejected: %s", lineno, rid, msg)
    return records


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_cohort(path, records, schema: CohortSchema) -> None:
    """Write raw records in the ingestion CSV layout (byte-stable)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(META_COLUMNS) + schema.names)
        for r in records:
            w.writerow(
                [
                    r.id,
                    r.characterization_date.isoformat(),
                    r.death_date.isoformat() if r.death_date else "",
                    r.last_followup_date.isoformat() if r.last_followup_date else "",
                ]
                + [_format_value(r.values.get(n)) for n in schema.names]
            )


LABELED_EXTRA = ("lifespan", "censored", "label")


def write_labeled(path, cohort: LabeledCohort) -> None:
    schema = cohort.schema
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(META_COLUMNS) + schema.names + list(LABELED_EXTRA))
        for r, span, cens, lab in zip(cohort.records, cohort.lifespans, cohort.censored, cohort.labels):
            w.writerow(
                [
                    r.id,
                    r.characterization_date.isoformat(),
                    r.death_date.isoformat() if r.death_date else "",
                    r.last_followup_date.isoformat() if r.last_followup_date else "",
                ]
                + [_format_value(r.values[n]) for n in schema.names]
                + [span, int(cens), lab]
            )


def read_labeled(path, schema: CohortSchema) -> LabeledCohort:
    """Read a labeled CSV written by :func:`write_labeled`."""
    records, report = read_cohort(path, schema, extra_columns=LABELED_EXTRA)
    if report.rejected:
        lineno, rid, msg = report.rejected[0]
        raise CohortError(f"labeled file line {lineno} ({rid}): {msg}")
    lifespans, censored, labels = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for col in LABELED_EXTRA:
            if col not in (reader.fieldnames or []):
                raise CohortError(f"labeled file lacks column {col!r}")
        for row in reader:
            lifespans.append(int(row["lifespan"]))
            censored.append(bool(int(row["censored"])))
            lab = int(row["label"])
            if lab not in (0, 1):
                raise CohortError(f"label must be 0 or 1, got {lab}")
            labels.append(lab)
    if len(labels) != len(records):
        raise CohortError("labeled file row count mismatch")
    return LabeledCohort(schema, records, lifespans, censored, labels, [], len(records))


# ---------------------------------------------------------------------- funnel

def derive_lifespan(r: RawPatientRecord):
    """Days from characterization to outcome as ``(days, censored)``, or ``None``.

    Death wins over follow-up; a follow-up-only record is censored.
    """
    if r.death_date is not None:
        return (r.death_date - r.characterization_date).days, False
    if r.last_followup_date is not None:
        return (r.last_followup_date - r.characterization_date).days, True
    return None


def assign_label(lifespan_days: int, censored: bool, cfg: PreprocessConfig = PreprocessConfig()) -> int:
    if censored:
        if lifespan_days < cfg.min_followup_days:
            raise CohortError(
                f"censored lifespan {lifespan_days} < min_followup_days {cfg.min_followup_days}; "
                "record should have been filtered"
            )
        return NOT_AT_RISK
    return AT_RISK if lifespan_days <= cfg.label_threshold_days else NOT_AT_RISK


def has_missing(r: RawPatientRecord, schema: CohortSchema) -> bool:
    return any(r.values.get(n) is None for n in schema.names)


def domain_violations(r: RawPatientRecord, schema: CohortSchema) -> list[str]:
    """Names of features whose present value lies outside the declared domain."""
    bad = []
    for f in schema.features:
        v = r.values.get(f.name)
        if v is not None and not f.in_domain(v):
            bad.append(f.name)
    return bad


def preprocess(records, schema: CohortSchema, cfg: PreprocessConfig = PreprocessConfig()) -> LabeledCohort:
    """Run the five-step funnel: lifespan, follow-up retention, completeness,
    domain validity, labeling.

    Steps are per-record, so output order follows input order.
    """
    records = list(records)
    n0 = len(records)
    funnel = []

    spans = [derive_lifespan(r) for r in records]
    funnel.append(FunnelStep("lifespan", n0, n0))

    kept = [
        (r, s)
        for r, s in zip(records, spans)
        if s is not None and (not s[1] or s[0] >= cfg.min_followup_days)
    ]
    funnel.append(FunnelStep("followup_retention", n0, len(kept)))

    n_in = len(kept)
    kept = [(r, s) for r, s in kept if not has_missing(r, schema)]
    funnel.append(FunnelStep("missing_values", n_in, len(kept)))

    n_in = len(kept)
    kept = [(r, s) for r, s in kept if not domain_violations(r, schema)]
    funnel.append(FunnelStep("domain_validity", n_in, len(kept)))

    if not kept:
        raise CohortError("cohort exhausted by preprocessing")

    labels = [assign_label(s[0], s[1], cfg) for _, s in kept]
    return LabeledCohort(
        schema=schema,
        records=[r for r, _ in kept],
        lifespans=[s[0] for _, s in kept],
        censored=[s[1] for _, s in kept],
        labels=labels,
        funnel_report=funnel,
        initial_count=n0,
    )
