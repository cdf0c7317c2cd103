"""Deterministic synthetic cohorts.

Features are drawn from independent per-feature marginals; the outcome is a
latent logistic score over a chosen signal subset. An optional funnel plan
places exact numbers of records into each preprocessing drop-out category.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from ..numerics import RngHandle
from .records import RawPatientRecord
from .schema import CohortSchema, Kind

# mean, sd for numeric; P(1) for binary; category weights for categorical
DEFAULT_MARGINALS = {
    "Primary_Diagnosis": [0.40, 0.25, 0.20, 0.10, 0.05],
    "Secondary_Diagnosis": [0.55, 0.10, 0.15, 0.08, 0.07, 0.05],
    "HFpEF": [0.45, 0.20, 0.35],
    "EF": (40.0, 12.0),
    "NYHA": [0.20, 0.45, 0.28, 0.07],
    "Age": (70.0, 11.0),
    "BMI": (27.0, 4.5),
    "Sex": 0.62,
    "Hypertension": 0.60,
    "Dyslipidemia": 0.45,
    "Diabetic": 0.30,
    "Bronchopneumonia": 0.18,
    "Beta-Blocker": 0.80,
    "ACE_SART": 0.70,
    "Anti-Aldosterone": 0.45,
    "PARETE POST": (10.5, 1.8),
    "SETTO": (11.0, 2.2),
    "LVES_DIAM": (42.0, 10.0),
    "LVED_DIAM": (57.0, 8.0),
    "VDx": (29.0, 5.0),
    "LVMI": (125.0, 32.0),
    "ASx": (44.0, 7.0),
    "TAPSE": (19.0, 4.5),
    "RS": 0.12,
    "BBSx": 0.22,
    "BBDx": 0.10,
    "NT-proBNP": (3000.0, 2500.0),
    "Blood Creatinine Level": (1.3, 0.5),
    "Glucose": (115.0, 35.0),
    "FA": 0.30,
    "Flutter": 0.06,
    "PM": 0.15,
    "Hb": (12.8, 1.8),
}

CLINICAL_SIGNAL = {"EF": -1.0, "Age": 1.0, "NYHA": 1.0, "Diabetic": 0.6, "BMI": -0.5, "Anti-Aldosterone": 0.5}
ECHO_SIGNAL = {"NT-proBNP": 1.0, "TAPSE": -1.0, "LVMI": 0.8, "Blood Creatinine Level": 0.7, "Hb": -0.6, "FA": 0.5}

SIGNAL_PRESETS = {
    "clinical": CLINICAL_SIGNAL,
    "echo": ECHO_SIGNAL,
    "split": {**CLINICAL_SIGNAL, **ECHO_SIGNAL},
    "none": {},
}

PLACEHOLDERS = [("NYHA", "2.5"), ("EF", -1.0), ("Age", 999.0), ("Sex", 2), ("Hb", 0.0)]


class SynthesisError(ValueError):
    pass


@dataclass(frozen=True)
class FunnelPlan:
    """Exact record counts remaining after follow-up retention, missing-value
    removal and domain validation."""

    retained: int
    complete: int
    valid: int


@dataclass(frozen=True)
class GeneratorSpec:
    size: int
    signal: dict = field(default_factory=lambda: dict(SIGNAL_PRESETS["split"]))
    signal_strength: float = 1.0
    noiseless: bool = False
    positive_fraction: float = 0.45
    late_death_fraction: float = 0.2
    missing_rates: dict = field(default_factory=dict)
    marginals: dict = field(default_factory=dict)
    funnel: FunnelPlan | None = None
    start_date: dt.date = dt.date(2010, 1, 1)
    enrollment_days: int = 7 * 365

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        d = dict(d)
        if "size" not in d:
            raise SynthesisError("generator spec needs 'size'")
        sig = d.pop("signal", "split")
        if isinstance(sig, str):
            if sig not in SIGNAL_PRESETS:
                raise SynthesisError(f"unknown signal preset {sig!r}; choose from {sorted(SIGNAL_PRESETS)}")
            sig = dict(SIGNAL_PRESETS[sig])
        funnel = d.pop("funnel", None)
        if funnel is not None:
            funnel = FunnelPlan(int(funnel["retained"]), int(funnel["complete"]), int(funnel["valid"]))
        if "start_date" in d and isinstance(d["start_date"], str):
            d["start_date"] = dt.date.fromisoformat(d["start_date"])
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise SynthesisError(f"unknown generator fields {sorted(extra)}")
        return cls(signal=sig, funnel=funnel, **d)


def _marginal(spec: GeneratorSpec, name: str):
    return spec.marginals.get(name, DEFAULT_MARGINALS.get(name))


def _sample_features(schema: CohortSchema, spec: GeneratorSpec, n: int, h: RngHandle):
    """Per-feature independent draws; returns (values by feature, standardized signal codes)."""
    values, codes = {}, {}
    for f in schema.features:
        rng = h.child("feature", f.name).stream()
        m = _marginal(spec, f.name)
        if f.kind is Kind.NUMERIC:
            mean, sd = m if m is not None else (0.5 * (f.low + f.high), (f.high - f.low) / 6.0)
            raw = np.clip(mean + sd * rng.normal(n), f.low, f.high)
            v = np.round(raw, 2)
            values[f.name] = [float(x) for x in v]
            codes[f.name] = (v - mean) / sd
        elif f.kind is Kind.BINARY:
            p = 0.5 if m is None else float(m)
            v = (rng.uniform(n) < p).astype(int)
            values[f.name] = [int(x) for x in v]
            codes[f.name] = (v - p) / max(np.sqrt(p * (1 - p)), 1e-12)
        else:
            w = np.ones(len(f.categories)) if m is None else np.asarray(m, dtype=float)
            if len(w) != len(f.categories):
                raise SynthesisError(f"{f.name}: {len(w)} weights for {len(f.categories)} categories")
            cdf = np.cumsum(w / w.sum())
            idx = np.minimum(np.searchsorted(cdf, rng.uniform(n), side="right"), len(w) - 1)
            values[f.name] = [f.categories[i] for i in idx]
            k = np.arange(len(w))
            mu = float((k * w).sum() / w.sum())
            sd = float(np.sqrt(((k - mu) ** 2 * w).sum() / w.sum())) or 1.0
            codes[f.name] = (idx - mu) / sd
    return values, codes


def latent_risk(codes: dict, spec: GeneratorSpec, n: int) -> np.ndarray:
    score = np.zeros(n)
    for name, w in sorted(spec.signal.items()):
        if name not in codes:
            raise SynthesisError(f"signal feature {name!r} not in schema")
        score += spec.signal_strength * float(w) * codes[name]
    return score


def synthesize_cohort(spec: GeneratorSpec, seed: int, schema: CohortSchema | None = None) -> list:
    """Generate ``spec.size`` raw records, deterministic in ``(spec, seed)``."""
    if schema is None:
        from .schema import default_schema

        schema = default_schema()
    n = int(spec.size)
    if n <= 0:
        raise SynthesisError("empty cohort requested")
    if not 0.0 < spec.positive_fraction < 1.0:
        raise SynthesisError("positive_fraction must lie strictly between 0 and 1")
    for name, rate in spec.missing_rates.items():
        if name not in schema.names or not 0.0 <= rate <= 1.0:
            raise SynthesisError(f"bad missing rate for {name!r}: {rate}")

    root = RngHandle(int(seed)).child("synthesize")
    values, codes = _sample_features(schema, spec, n, root.child("features"))

    # Funnel roles: 0 kept, 1 dropped at follow-up retention, 2 missing, 3 invalid.
    role = np.zeros(n, dtype=int)
    if spec.funnel is not None:
        fp = spec.funnel
        if not n >= fp.retained >= fp.complete >= fp.valid > 0:
            raise SynthesisError("funnel plan must satisfy size >= retained >= complete >= valid > 0")
        order = root.child("roles").stream().permutation(n)
        role[order[: n - fp.retained]] = 1
        role[order[n - fp.retained : n - fp.complete]] = 2
        role[order[n - fp.complete : n - fp.valid]] = 3

    final = np.flatnonzero(role == 0)
    k_pos = int(np.floor(spec.positive_fraction * len(final) + 0.5))
    if k_pos == 0 or k_pos == len(final):
        raise SynthesisError(
            f"positive_fraction {spec.positive_fraction} infeasible for {len(final)} final records"
        )

    score = latent_risk(codes, spec, n)
    if not spec.noiseless:
        u = root.child("outcome_noise").stream().uniform(n)
        u = np.clip(u, 1e-16, 1 - 1e-16)
        score = score + np.log(u / (1.0 - u))
    # Exact class balance among surviving records: top-k latent scores are at risk.
    at_risk = np.zeros(n, dtype=bool)
    ranked = final[np.lexsort((final, -score[final]))]
    at_risk[ranked[:k_pos]] = True
    # Dropped records get labels at the same rate, so their dates look alike.
    others = np.flatnonzero(role != 0)
    if others.size:
        k_other = int(np.floor(spec.positive_fraction * others.size + 0.5))
        ranked_o = others[np.lexsort((others, -score[others]))]
        at_risk[ranked_o[:k_other]] = True

    date_rng = root.child("dates").stream()
    start_off = date_rng.integers(spec.enrollment_days, n)
    u_span = date_rng.uniform(n)
    u_kind = date_rng.uniform(n)
    miss_rng = root.child("missing").stream()
    bad_rng = root.child("placeholders").stream()

    records = []
    width = len(str(n))
    for i in range(n):
        vals = {name: values[name][i] for name in schema.names}
        char = spec.start_date + dt.timedelta(days=int(start_off[i]))
        death = follow = None
        if role[i] == 1:
            if u_kind[i] < 0.5:
                pass  # no outcome information at all
            else:
                follow = char + dt.timedelta(days=30 + int(u_span[i] * 1064))  # 30..1093 days
        elif at_risk[i]:
            death = char + dt.timedelta(days=30 + int(u_span[i] * 1065))  # 30..1094
        elif u_kind[i] < spec.late_death_fraction:
            death = char + dt.timedelta(days=1096 + int(u_span[i] * 1900))
        else:
            follow = char + dt.timedelta(days=1095 + int(u_span[i] * 1900))

        if role[i] == 2:
            n_miss = 1 + miss_rng.integers(3)
            for j in miss_rng.choice(len(schema), n_miss):
                vals[schema.names[int(j)]] = None
        elif role[i] == 3:
            name, bad = PLACEHOLDERS[bad_rng.integers(len(PLACEHOLDERS))]
            if name in vals:
                vals[name] = bad
        if spec.funnel is None and spec.missing_rates:
            u_m = miss_rng.uniform(len(schema))
            for j, name in enumerate(schema.names):
                if u_m[j] < spec.missing_rates.get(name, 0.0):
                    vals[name] = None
        records.append(
            RawPatientRecord(
                id=f"P{i + 1:0{width}d}",
                values=vals,
                characterization_date=char,
                death_date=death,
                last_followup_date=follow,
            )
        )
    return records


def funnel_fixture_spec() -> GeneratorSpec:
    """Generator settings for the 1040-record fixture (464 / 365 / 357 funnel)."""
    return GeneratorSpec(size=1040, funnel=FunnelPlan(464, 365, 357), positive_fraction=0.45)


FIXTURE_SEED = 20240607


def funnel_fixture_path():
    """Path of the shipped 1040-record fixture CSV."""
    from importlib import resources
    from pathlib import Path

    return Path(str(resources.files("hfstrat.data").joinpath("funnel_fixture.csv")))
