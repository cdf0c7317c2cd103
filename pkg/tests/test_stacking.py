import numpy as np
import pytest

from hfstrat.cohort import GeneratorSpec, Group, encode, preprocess, synthesize_cohort
from hfstrat.cohort.synth import SIGNAL_PRESETS
from hfstrat.numerics import derive_seed
from hfstrat.selection import stratified_split
from hfstrat.stacking import (
    IN_SAMPLE,
    StackingConfig,
    StackingEnsemble,
    StackingError,
    check_oof_bookkeeping,
    meta_feature_matrix,
    predict_stacking,
    predict_with_missing_group,
    train_stacking,
)

SMALL = dict(
    clinical_grid={"C": [0.1, 1.0]},
    echo_grid={"C": [0.1, 1.0]},
    forest_grid={"n_trees": [15], "max_depth": [4]},
    meta_grid={"C": [1.0]},
)


def cohort_dm(schema, signal="split", size=240, seed=11, noiseless=False):
    spec = GeneratorSpec(size=size, signal=SIGNAL_PRESETS[signal], noiseless=noiseless)
    return encode(preprocess(synthesize_cohort(spec, seed, schema), schema))


@pytest.fixture(scope="module")
def clinical_dm(schema):
    return cohort_dm(schema, "clinical")


@pytest.fixture(scope="module")
def clinical_ensemble(clinical_dm):
    return train_stacking(clinical_dm, StackingConfig(**SMALL, seed=3))


def test_meta_feature_layout(clinical_ensemble, clinical_dm):
    Z = clinical_ensemble.meta_features_for(clinical_dm.X)
    assert Z.shape == (len(clinical_dm.y), 6)
    for lab, conf in ((0, 1), (2, 3), (4, 5)):
        assert np.array_equal(Z[:, lab], (Z[:, conf] >= 0.5).astype(float))
        assert np.all((Z[:, conf] >= 0) & (Z[:, conf] <= 1))
    assert meta_feature_matrix([(np.array([1]), np.array([0.7]))] * 3, "confidences").shape == (1, 3)


def test_clinical_signal_prefers_clinical_model(clinical_ensemble):
    base = clinical_ensemble.provenance["base"]
    assert base["clinical"]["best_cv_accuracy"] > base["echo"]["best_cv_accuracy"]


def test_column_split_matches_schema(clinical_ensemble, clinical_dm):
    assert np.array_equal(clinical_ensemble.clinical_columns, clinical_dm.group_columns(Group.CLINICAL))
    assert np.array_equal(clinical_ensemble.echo_columns, clinical_dm.group_columns(Group.ECHO))
    assert clinical_ensemble.meta_model.weights.size == 6


def test_deterministic(clinical_dm, clinical_ensemble):
    again = train_stacking(clinical_dm, StackingConfig(**SMALL, seed=3))
    assert again.dumps() == clinical_ensemble.dumps()
    assert clinical_ensemble.provenance["forest_seed"] == derive_seed(3, "forest")


def test_oof_bookkeeping(clinical_ensemble):
    assert check_oof_bookkeeping(clinical_ensemble)
    folds = np.array(clinical_ensemble.provenance["oof_fold_of_sample"])
    assert set(folds.tolist()) == set(range(5))


def test_group_isolation(clinical_ensemble, clinical_dm):
    e = clinical_ensemble
    X = clinical_dm.X[:20].copy()
    models = e.base_models()
    before_c = models["clinical"].predict_confidence(X)
    before_e = models["echo"].predict_confidence(X)
    rng = np.random.default_rng(0)
    Xe = X.copy()
    Xe[:, e.echo_columns] += rng.normal(scale=5, size=(20, e.echo_columns.size))
    assert np.array_equal(models["clinical"].predict_confidence(Xe), before_c)
    Xc = X.copy()
    Xc[:, e.clinical_columns] += rng.normal(scale=5, size=(20, e.clinical_columns.size))
    assert np.array_equal(models["echo"].predict_confidence(Xc), before_e)


def test_serialization_round_trip(clinical_ensemble, clinical_dm, tmp_path):
    e = clinical_ensemble
    p = tmp_path / "e.json"
    e.save(p)
    back = StackingEnsemble.load(p)
    rng = np.random.default_rng(1)
    rows = clinical_dm.X[rng.integers(0, len(clinical_dm.y), 100)]
    rows = rows + rng.normal(scale=0.1, size=rows.shape)
    assert np.array_equal(back.predict_confidence(rows), e.predict_confidence(rows))
    assert back.dumps() == e.dumps()
    with pytest.raises(StackingError):
        StackingEnsemble.from_dict({"format": "other"})


def test_label_coherence(clinical_ensemble, clinical_dm):
    conf = clinical_ensemble.predict_confidence(clinical_dm.X)
    assert np.array_equal(clinical_ensemble.predict_label(clinical_dm.X), (conf >= 0.5).astype(int))


def test_in_sample_consistency(clinical_dm):
    e = train_stacking(clinical_dm, StackingConfig(**SMALL, meta_protocol=IN_SAMPLE, seed=3))
    assert e.provenance["oof_fold_of_sample"] is None and check_oof_bookkeeping(e)
    Z_train = e.meta_features_for(clinical_dm.X)
    # the stored meta-model was fit on exactly these rows: refitting with its C reproduces it
    from hfstrat.learners import train_logistic

    refit = train_logistic(Z_train, clinical_dm.y, C=e.meta_model.C)
    assert np.array_equal(refit.weights, e.meta_model.weights)


def test_confident_bases_give_positive_meta(clinical_ensemble):
    Z = meta_feature_matrix([(np.array([1]), np.array([0.99]))] * 3)
    assert clinical_ensemble.meta_model.predict_confidence(Z)[0] > 0.5


def test_predict_explanation(clinical_ensemble, clinical_dm):
    p = predict_stacking(clinical_ensemble, clinical_dm.X[0], clinical_dm.schema_hash)
    assert len(p.explanation) == 3 and not p.degraded
    assert [n for n, _, _ in p.explanation] == ["clinical", "echo", "forest"]
    assert p.confidence == pytest.approx(clinical_ensemble.predict_confidence(clinical_dm.X[:1])[0])
    with pytest.raises(StackingError, match="schema hash"):
        predict_stacking(clinical_ensemble, clinical_dm.X[0], "deadbeef")


def test_missing_group(clinical_ensemble, clinical_dm):
    e = clinical_ensemble
    x = clinical_dm.X[0].copy()
    x[e.echo_columns] = np.nan
    p = predict_with_missing_group(e, x, Group.ECHO)
    assert p.degraded
    assert p.explanation[1] == ("echo", e.majority_class, 0.5)
    assert p.explanation[2] == ("forest", e.majority_class, 0.5)
    assert predict_with_missing_group(e, clinical_dm.X[0], "clinical").degraded
    with pytest.raises(StackingError):
        predict_with_missing_group(e, x, [Group.ECHO, Group.CLINICAL])


def test_degraded_accuracy_close_to_full(schema):
    dm = cohort_dm(schema, "clinical", size=400, seed=21)
    split = stratified_split(dm.y, 0.2, 5)
    e = train_stacking(dm.take_rows(split.train), StackingConfig(**SMALL, seed=5))
    test = dm.take_rows(split.test)
    full = np.mean(e.predict_label(test.X) == test.y)
    degraded = np.mean([predict_with_missing_group(e, x, Group.ECHO).label for x in test.X] == test.y)
    assert abs(full - degraded) * 100 <= 5


def test_errors(clinical_dm):
    only_clin = clinical_dm.select_columns(clinical_dm.group_columns(Group.CLINICAL))
    with pytest.raises(StackingError, match="degenerate group"):
        train_stacking(only_clin, StackingConfig(**SMALL))
    with pytest.raises(StackingError):
        StackingConfig(k=1)
    with pytest.raises(StackingError):
        StackingConfig(meta_protocol="whatever")
    with pytest.raises(StackingError):
        StackingConfig(meta_grid={"C": []})
