import json

import numpy as np
import pytest

from eegstates.errors import (
    EmptyTrainError,
    IncompleteMetadataError,
    LengthMismatchError,
    MixedRecordsError,
    TooFewFramesError,
)
from eegstates.features import N_FEATURES, FeatureSet
from eegstates.splits import (
    DatasetSplit,
    Paradigm,
    split_common_subject,
    split_leave_one_out,
)
from eegstates.standardize import (
    CLEAN,
    LEAKY,
    FitScope,
    Scheme,
    StandardizationRun,
    StandardizerParams,
    apply,
    audit_leakage,
    fit_global_train,
    fit_per_record,
    load_params,
    save_params,
    standardize_split,
)

from oracles import two_pass_mean_std


def single_record_set(rows, subject=1, record=3):
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[0]
    return FeatureSet(
        rows,
        np.arange(n, dtype=float),
        np.zeros(n, dtype=np.int64),
        np.full(n, subject, dtype=np.int64),
        np.full(n, record, dtype=np.int64),
        None,
    )


def column_set(values, **kwargs):
    """Feature rows where every one of the 252 columns equals `values`."""
    rows = np.tile(np.asarray(values, dtype=float)[:, None], (1, N_FEATURES))
    return single_record_set(rows, **kwargs)


# -- per-record fitting ---------------------------------------------------------

def test_fit_per_record_two_point_example():
    params = fit_per_record(column_set([0.0, 2.0]))
    np.testing.assert_array_equal(params.mu, np.full(N_FEATURES, 1.0))
    np.testing.assert_array_equal(params.sigma, np.full(N_FEATURES, 1.0))
    assert params.scheme is Scheme.PER_RECORD
    assert params.fit_scope.to_dict() == {"kind": "record", "subject": 1, "record": 3}


def test_fit_per_record_constant_column_guard():
    rows = np.tile(np.array([[0.0], [2.0]]), (1, N_FEATURES))
    rows[:, 5] = 7.0  # constant feature
    fs = single_record_set(rows)
    params = fit_per_record(fs)
    assert params.sigma[5] == 1.0
    standardized = apply(params, fs.features)
    np.testing.assert_array_equal(standardized[:, 5], [0.0, 0.0])


def test_fit_per_record_mixed_records():
    a = column_set([0.0, 1.0], record=3)
    b = column_set([0.0, 1.0], record=4)
    mixed = FeatureSet.concat([a, b])
    with pytest.raises(MixedRecordsError):
        fit_per_record(mixed)


def test_fit_per_record_too_few_frames():
    with pytest.raises(TooFewFramesError):
        fit_per_record(column_set([1.0]))


def test_per_record_self_standardization_invariant(small_features):
    for subject, record in small_features.records():
        frames = small_features.select(
            small_features.indices_of_record(subject, record)
        )
        params = fit_per_record(frames)
        standardized = apply(params, frames.features)
        nonconstant = frames.features.std(axis=0) >= 1e-12
        assert np.abs(standardized.mean(axis=0)[nonconstant]).max() < 1e-9
        assert np.abs(standardized.std(axis=0)[nonconstant] - 1.0).max() < 1e-9


# -- global-train fitting -------------------------------------------------------

def _three_frame_split():
    fs = column_set([1.0, 3.0, 5.0])
    split = DatasetSplit(
        Paradigm.COMMON_SUBJECT,
        train=np.array([0, 1]),
        validation=np.array([], dtype=np.int64),
        test=np.array([2]),
        rng_seed=0,
    )
    return fs, split


def test_fit_global_train_arithmetic_example():
    fs, split = _three_frame_split()
    params = fit_global_train(fs, split)
    np.testing.assert_array_equal(params.mu, np.full(N_FEATURES, 2.0))
    np.testing.assert_array_equal(params.sigma, np.full(N_FEATURES, 1.0))
    standardized_test = apply(params, fs.features[split.test])
    np.testing.assert_array_equal(standardized_test, np.full((1, N_FEATURES), 3.0))


def test_fit_global_train_never_reads_held_out():
    fs, split = _three_frame_split()
    before = fit_global_train(fs, split)
    fs.features[split.test] += 1234.5  # mutate every held-out value
    after = fit_global_train(fs, split)
    assert before.mu.tobytes() == after.mu.tobytes()
    assert before.sigma.tobytes() == after.sigma.tobytes()


def test_fit_global_train_empty_train():
    fs = column_set([1.0, 2.0])
    split = DatasetSplit(
        Paradigm.COMMON_SUBJECT,
        train=np.array([], dtype=np.int64),
        validation=np.array([], dtype=np.int64),
        test=np.array([0, 1]),
    )
    with pytest.raises(EmptyTrainError):
        fit_global_train(fs, split)


def test_fit_global_train_matches_two_pass_oracle(rng):
    rows = rng.standard_normal((10000, N_FEATURES)) * rng.uniform(
        0.1, 50.0, size=N_FEATURES
    ) + rng.uniform(-20.0, 20.0, size=N_FEATURES)
    fs = single_record_set(rows)
    train = np.sort(rng.choice(len(rows), size=8000, replace=False))
    rest = np.setdiff1d(np.arange(len(rows)), train)
    split = DatasetSplit(
        Paradigm.COMMON_SUBJECT, train, np.array([], dtype=np.int64), rest
    )
    params = fit_global_train(fs, split)
    mu, sigma = two_pass_mean_std(rows[train])
    np.testing.assert_allclose(params.mu, mu, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(params.sigma, sigma, rtol=1e-10)


# -- apply ----------------------------------------------------------------------

def test_apply_identity_cases():
    params = StandardizerParams(
        np.zeros(N_FEATURES), np.ones(N_FEATURES), Scheme.GLOBAL_TRAIN, None
    )
    x = np.linspace(-1, 1, N_FEATURES)
    np.testing.assert_array_equal(apply(params, x), x)

    params2 = StandardizerParams(
        x.copy(), np.ones(N_FEATURES), Scheme.GLOBAL_TRAIN, None
    )
    np.testing.assert_array_equal(apply(params2, x), np.zeros(N_FEATURES))


def test_apply_affine_property(rng):
    mu = rng.standard_normal(N_FEATURES)
    sigma = rng.uniform(0.5, 2.0, N_FEATURES)
    params = StandardizerParams(mu, sigma, Scheme.GLOBAL_TRAIN, None)
    x = rng.standard_normal(N_FEATURES)
    a, b = 2.5, -1.25
    lhs = apply(params, a * x + b)
    rhs = (a * x + b - mu) / sigma
    np.testing.assert_array_equal(lhs, rhs)


def test_apply_length_mismatch():
    params = StandardizerParams(
        np.zeros(N_FEATURES), np.ones(N_FEATURES), Scheme.GLOBAL_TRAIN, None
    )
    with pytest.raises(LengthMismatchError):
        apply(params, np.zeros(100))


# -- auditor ----------------------------------------------------------------------

def test_audit_global_train_clean(small_features):
    split = split_leave_one_out(small_features, small_features.subjects()[0])
    run = standardize_split(small_features, split, Scheme.GLOBAL_TRAIN).run
    report = audit_leakage(run)
    assert report.verdict == CLEAN
    assert report.findings == []


def test_audit_per_record_loso_leaky(small_features):
    split = split_leave_one_out(small_features, small_features.subjects()[0])
    run = standardize_split(small_features, split, Scheme.PER_RECORD).run
    report = audit_leakage(run)
    assert report.verdict == LEAKY
    assert any("fit scope contains test frames" in f for f in report.findings)
    assert any("mutation probe changed" in f for f in report.findings)


def test_audit_per_record_common_subject_reason(small_features):
    split = split_common_subject(small_features, 0.8, seed=0)
    run = standardize_split(small_features, split, Scheme.PER_RECORD).run
    report = audit_leakage(run)
    assert report.verdict == LEAKY
    assert any("train transform used test statistics" in f for f in report.findings)


def test_audit_requires_metadata(small_features):
    split = split_common_subject(small_features, 0.8, seed=0)
    params = fit_global_train(small_features, split)
    params.fit_scope = None
    run = StandardizationRun(small_features, split, Scheme.GLOBAL_TRAIN, [params])
    with pytest.raises(IncompleteMetadataError):
        audit_leakage(run)


def test_audit_probe_catches_forged_scope(small_features):
    # params secretly fitted on all frames, scope claiming train-only
    split = split_common_subject(small_features, 0.8, seed=0)
    mu = small_features.features.mean(axis=0)
    sigma = small_features.features.std(axis=0)
    sigma[sigma < 1e-12] = 1.0
    forged = StandardizerParams(
        mu, sigma, Scheme.GLOBAL_TRAIN, FitScope("split", split=split.describe())
    )
    run = StandardizationRun(small_features, split, Scheme.GLOBAL_TRAIN, [forged])
    report = audit_leakage(run)
    assert report.verdict == LEAKY
    assert any("mutation probe" in f for f in report.findings)


@pytest.mark.parametrize("seed", range(5))
def test_audit_verdicts_property(seed):
    from eegstates import SpectrogramConfig, extract_features, generate_synthetic

    records, _ = generate_synthetic(2, 4, 60, seed=seed)
    config = SpectrogramConfig(4, 128)
    fs = FeatureSet.concat(
        [extract_features(r, config) for r in records if r.record_index > 2]
    )
    split = split_leave_one_out(fs, 1 + seed % 2)
    clean = audit_leakage(standardize_split(fs, split, Scheme.GLOBAL_TRAIN).run)
    leaky = audit_leakage(standardize_split(fs, split, Scheme.PER_RECORD).run)
    assert clean.verdict == CLEAN
    assert leaky.verdict == LEAKY


# -- standardized split plumbing ---------------------------------------------------

def test_standardize_split_shapes(small_features):
    split = split_leave_one_out(small_features, small_features.subjects()[0])
    std = standardize_split(small_features, split, Scheme.GLOBAL_TRAIN)
    assert std.train_x.shape == (len(split.train), N_FEATURES)
    assert std.validation_x.shape == (len(split.validation), N_FEATURES)
    assert std.test_x.shape == (len(split.test), N_FEATURES)
    assert len(std.run.params) == 1

    std_pr = standardize_split(small_features, split, Scheme.PER_RECORD)
    assert len(std_pr.run.params) == len(small_features.records())


def test_params_json_round_trip_full_precision(tmp_path, small_features):
    split = split_leave_one_out(small_features, small_features.subjects()[0])
    run = standardize_split(small_features, split, Scheme.PER_RECORD).run
    path = save_params(run.params, tmp_path / "params.json")
    back = load_params(path)
    assert len(back) == len(run.params)
    for orig, loaded in zip(run.params, back):
        assert orig.mu.tobytes() == loaded.mu.tobytes()
        assert orig.sigma.tobytes() == loaded.sigma.tobytes()
        assert orig.fit_scope.to_dict() == loaded.fit_scope.to_dict()
    payload = json.loads(path.read_text())
    assert payload[0]["scheme"] == "per-record"
