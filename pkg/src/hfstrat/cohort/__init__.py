from .encoding import DesignMatrix, Encoder, encode, split_columns
from .records import (
    AT_RISK,
    NOT_AT_RISK,
    CohortError,
    FunnelStep,
    LabeledCohort,
    LoadReport,
    PreprocessConfig,
    RawPatientRecord,
    assign_label,
    derive_lifespan,
    load_cohort,
    preprocess,
    read_cohort,
    read_labeled,
    split_diagnosis,
    write_cohort,
    write_labeled,
)
from .schema import CohortSchema, FeatureSpec, Group, Kind, SchemaError, default_schema, load_schema
from .synth import (
    FIXTURE_SEED,
    FunnelPlan,
    GeneratorSpec,
    SynthesisError,
    funnel_fixture_path,
    funnel_fixture_spec,
    synthesize_cohort,
)
