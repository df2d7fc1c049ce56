"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; the -v test names themselves double as the pass/fail report.
"""

import json
import time

import numpy as np
import pytest

from eegstates import (
    ClassifierSpec,
    FeatureSet,
    ModelKind,
    Scheme,
    SpectrogramConfig,
    cap_40min,
    extract_features,
    generate_synthetic,
    run_loso,
    split_leave_one_out,
)
from eegstates.cli import main
from eegstates.data import MentalState
from eegstates.experiment import run_paradigm
from eegstates.features import blackman_window, stft_power
from eegstates.models import init_mlp, loss_and_grads
from eegstates.splits import Paradigm, split_common_subject
from eegstates.standardize import (
    CLEAN,
    LEAKY,
    apply,
    audit_leakage,
    fit_global_train,
    fit_per_record,
    standardize_split,
)
from eegstates.training import (
    EarlyStopState,
    SchedulerState,
    early_stop_check,
    scheduler_step,
)

from oracles import naive_dft_power, nearest_centroid_accuracy, window_band_powers

E2E_SEED = 1729


@pytest.fixture(scope="module")
def e2e_features():
    """The end-to-end dataset: 4 subjects x 4 records x 240 s, fixed seed."""
    records, _ = generate_synthetic(4, 4, 240, seed=E2E_SEED)
    eligible = [cap_40min(r) for r in records if r.record_index > 2]
    config = SpectrogramConfig(4, 128)
    features = FeatureSet.concat([extract_features(r, config) for r in eligible])
    return eligible, features


def test_criterion_01_feature_dimension_randomized_configs():
    start = time.monotonic()
    records, _ = generate_synthetic(2, 1, 60, seed=101)
    record = records[0]
    rng = np.random.default_rng(404)
    checked = 0
    for _ in range(20):
        window = int(rng.integers(4, 41))
        hop = int(rng.integers(8, 397))
        fs = extract_features(record, SpectrogramConfig(window, hop))
        assert fs.features.shape[1] == 252
        assert np.isfinite(fs.features).all()
        checked += 1
    elapsed = time.monotonic() - start
    assert checked >= 20
    assert elapsed < 30.0
    print(f"\nACCEPTANCE 1 (252-dim features, {checked} random configs, "
          f"{elapsed:.1f}s < 30s): PASS")


def test_criterion_02_stft_oracle_and_blackman_identities():
    rng = np.random.default_rng(777)
    for _ in range(50):
        length = int(rng.integers(64, 2049))
        window = int(rng.choice([16, 32, 64, 128, 256]))
        window = min(window, length)
        hop = int(rng.integers(1, window + 1))
        signal = rng.standard_normal(length)
        ours = stft_power(signal, window, hop)
        oracle = naive_dft_power(signal, window, hop)
        scale = max(oracle.max(), 1e-300)
        assert np.max(np.abs(ours - oracle)) <= 1e-9 * scale

    for n in (5, 17, 129, 511, 513):
        w = blackman_window(n)
        assert w[0] == 0.0 and w[-1] == 0.0
        assert w[(n - 1) // 2] == 1.0
        assert np.array_equal(w, w[::-1])
    print("\nACCEPTANCE 2 (STFT vs naive DFT oracle at 1e-9; Blackman "
          "endpoint=0.0, center=1.0 exactly): PASS")


def test_criterion_03_standardization_invariants(e2e_features):
    _, features = e2e_features
    for subject, record in features.records():
        frames = features.select(features.indices_of_record(subject, record))
        params = fit_per_record(frames)
        standardized = apply(params, frames.features)
        nonconstant = frames.features.std(axis=0) >= 1e-12
        assert np.abs(standardized.mean(axis=0)[nonconstant]).max() < 1e-9
        assert np.abs(standardized.std(axis=0)[nonconstant] - 1.0).max() < 1e-9

    split = split_leave_one_out(features, features.subjects()[0])
    before = fit_global_train(features, split)
    held_out = np.concatenate([split.validation, split.test])
    mutated = FeatureSet(
        features.features.copy(),
        features.t_center_s,
        features.labels,
        features.subject_ids,
        features.record_indices,
        features.config,
    )
    mutated.features[held_out] = -999.25
    after = fit_global_train(mutated, split)
    assert before.mu.tobytes() == after.mu.tobytes()
    assert before.sigma.tobytes() == after.sigma.tobytes()
    print("\nACCEPTANCE 3 (per-record mean/std at 1e-9; global-train "
          "bit-invariant under held-out mutation): PASS")


def test_criterion_04_leakage_audit_zero_false_verdicts():
    applied = 0
    for seed in range(20):
        records, _ = generate_synthetic(2, 4, 60, seed=seed)
        config = SpectrogramConfig(4, 128)
        fs = FeatureSet.concat(
            [extract_features(r, config) for r in records if r.record_index > 2]
        )
        if seed % 2 == 0:
            split = split_leave_one_out(fs, 1 + seed % 2)
        else:
            split = split_common_subject(fs, 0.8, seed=seed)
        assert len(split.test) > 0
        clean = audit_leakage(standardize_split(fs, split, Scheme.GLOBAL_TRAIN).run)
        leaky = audit_leakage(standardize_split(fs, split, Scheme.PER_RECORD).run)
        assert clean.verdict == CLEAN, f"false LEAKY at seed {seed}"
        assert leaky.verdict == LEAKY, f"false CLEAN at seed {seed}"
        applied += 1
    assert applied == 20
    print(f"\nACCEPTANCE 4 (audit verdicts on {applied} random datasets, "
          "0 false verdicts): PASS")


def test_criterion_05_gradient_check_ten_seeds():
    worst_overall = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        model = init_mlp([252, 4, 3], seed=seed, activation="tanh")
        x = rng.standard_normal((5, 252))
        y = rng.integers(0, 3, size=5)
        _, grads_w, grads_b = loss_and_grads(model, x, y)

        def loss():
            value, _, _ = loss_and_grads(model, x, y)
            return value

        step = 1e-5
        for analytic, holder in [(grads_w, model.weights), (grads_b, model.biases)]:
            for g, arr in zip(analytic, holder):
                numeric = np.empty_like(arr)
                flat, nflat = arr.reshape(-1), numeric.reshape(-1)
                for i in range(flat.size):
                    orig = flat[i]
                    flat[i] = orig + step
                    up = loss()
                    flat[i] = orig - step
                    down = loss()
                    flat[i] = orig
                    nflat[i] = (up - down) / (2 * step)
                scale = max(np.abs(g).max(), np.abs(numeric).max(), 1e-12)
                worst_overall = max(
                    worst_overall, np.abs(g - numeric).max() / scale
                )
    assert worst_overall < 1e-4
    print(f"\nACCEPTANCE 5 (gradient check, 10 seeds, worst relative error "
          f"{worst_overall:.2e} < 1e-4): PASS")


def test_criterion_06_scheduler_and_early_stop_traces():
    # halving exactly at the 3rd stagnant epoch
    state = SchedulerState(lr=1.0)
    halved_at = []
    for epoch, acc in enumerate([0.5, 0.5, 0.5, 0.5], start=1):
        state, halved = scheduler_step(state, acc, patience=3)
        if halved:
            halved_at.append(epoch)
    assert halved_at == [4]  # 3rd stagnant epoch after the epoch-1 best
    assert state.lr == 0.5

    # the 7-value double-halving trace: lr ends at initial/4
    state = SchedulerState(lr=1.0)
    halvings = 0
    for acc in [0.5] * 7:
        state, halved = scheduler_step(state, acc, patience=3)
        halvings += halved
    assert halvings == 2 and state.lr == 0.25

    # stop exactly at the 10th stagnant epoch, best restored to epoch 1
    stopper = EarlyStopState()
    stopped_at = None
    for epoch, acc in enumerate([0.7] + [0.6] * 10, start=1):
        stopper, stop = early_stop_check(stopper, acc, patience=10)
        if stop:
            stopped_at = epoch
            break
    assert stopped_at == 11 and stopper.best_epoch == 1

    # lr trace on a live run equals initial / 2^halvings everywhere
    from eegstates.models.mlp import init_mlp as build
    from eegstates.training import TrainConfig, train_loop

    rng = np.random.default_rng(0)
    x = rng.standard_normal((60, 252))
    y = rng.integers(0, 3, 60)
    model = build([252, 8, 3], seed=0)
    history, _ = train_loop(
        model, x[:40], y[:40], x[40:], y[40:],
        TrainConfig(initial_lr=0.5, max_epochs=30, early_stop_patience=25),
        seed=0,
    )
    halvings = 0
    for record in history:
        assert record.learning_rate == 0.5 / 2.0**halvings
        if "halved" in record.events:
            halvings += 1
    print("\nACCEPTANCE 6 (halving at 3rd stagnant epoch, double halving on "
          "the 7-trace, stop at 10th, lr = initial/2^h): PASS")


def test_criterion_07_end_to_end_synthetic_loso(e2e_features):
    start = time.monotonic()
    records, features = e2e_features

    majority = max(
        float(np.mean(features.labels == int(state))) for state in MentalState
    )
    assert majority == pytest.approx(0.5, abs=0.01)

    # independent nearest-band-power-centroid oracle on raw signal windows
    band_logs, labels = {}, {}
    for r in records:
        n_eff = min(r.n_samples, 307200)
        band_logs[r.subject_id, r.record_index] = window_band_powers(
            r.samples, n_eff, 512, 128
        )
        idx = features.indices_of_record(r.subject_id, r.record_index)
        labels[r.subject_id, r.record_index] = features.labels[idx]
    subjects = sorted({r.subject_id for r in records})
    oracle_accs = []
    for s in subjects:
        train_x = np.concatenate([v for k, v in band_logs.items() if k[0] != s])
        train_y = np.concatenate([v for k, v in labels.items() if k[0] != s])
        test_x = np.concatenate([v for k, v in band_logs.items() if k[0] == s])
        test_y = np.concatenate([v for k, v in labels.items() if k[0] == s])
        oracle_accs.append(
            nearest_centroid_accuracy(train_x, train_y, test_x, test_y)
        )
    oracle_mean = float(np.mean(oracle_accs))
    assert oracle_mean >= 0.95

    spec = ClassifierSpec(ModelKind.RANDOM_FOREST, seed=E2E_SEED)
    result = run_loso(features, spec, Scheme.GLOBAL_TRAIN)
    elapsed = time.monotonic() - start
    assert result.mean_accuracy >= 0.80
    assert elapsed < 300.0
    print(f"\nACCEPTANCE 7 (LOSO RF {result.mean_accuracy:.3f} >= 0.80; "
          f"centroid oracle {oracle_mean:.3f} >= 0.95; majority "
          f"{majority:.3f} ~ 0.50; {elapsed:.0f}s < 300s): PASS")


def test_criterion_08_leaky_vs_clean_ordering(e2e_features):
    _, features = e2e_features
    spec = ClassifierSpec(ModelKind.RANDOM_FOREST, seed=E2E_SEED)
    leaky = run_paradigm(
        features, Paradigm.COMMON_SUBJECT, spec, Scheme.PER_RECORD, seed=E2E_SEED
    )
    clean = run_paradigm(
        features, Paradigm.COMMON_SUBJECT, spec, Scheme.GLOBAL_TRAIN, seed=E2E_SEED
    )
    assert leaky.mean_accuracy >= clean.mean_accuracy
    print(f"\nACCEPTANCE 8 (common-subject accuracy: leaky per-record "
          f"{leaky.mean_accuracy:.4f} >= clean global-train "
          f"{clean.mean_accuracy:.4f}): PASS")


def test_criterion_09_sweep_byte_determinism(tmp_path):
    data_dir = tmp_path / "data"
    assert main(
        ["synth", "--subjects", "2", "--records", "4", "--duration", "60",
         "--seed", str(E2E_SEED), "--out", str(data_dir)]
    ) == 0

    def sweep(out):
        return main(
            ["sweep", "--manifest", str(data_dir / "manifest.json"),
             "--models", "rf", "--windows", "4,8", "--hops", "64,128",
             "--scheme", "global-train", "--seed", str(E2E_SEED),
             "--out", str(out)]
        )

    out1, out2 = tmp_path / "sweep1", tmp_path / "sweep2"
    assert sweep(out1) == 0
    assert sweep(out2) == 0
    compared = []
    for name in ("heatmap_rf.csv", "summary_rf.json", "best_accuracy_table.csv"):
        a = (out1 / name).read_bytes()
        b = (out2 / name).read_bytes()
        assert a == b, f"{name} differs between identical sweeps"
        compared.append(name)
    # re-running in place must also rewrite identical bytes
    assert sweep(out1) == 0
    for name in compared:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    print(f"\nACCEPTANCE 9 (2x2 sweep, fixed seed: {', '.join(compared)} "
          "byte-identical across reruns): PASS")


def test_leakage_report_side_by_side(e2e_features, tmp_path):
    # supporting output for criterion 8: both numbers reported together
    _, features = e2e_features
    spec = ClassifierSpec(ModelKind.RANDOM_FOREST, seed=E2E_SEED)
    rows = {
        "per-record (leaky baseline)": run_paradigm(
            features, Paradigm.COMMON_SUBJECT, spec, Scheme.PER_RECORD, seed=E2E_SEED
        ).mean_accuracy,
        "global-train (corrected)": run_paradigm(
            features, Paradigm.COMMON_SUBJECT, spec, Scheme.GLOBAL_TRAIN, seed=E2E_SEED
        ).mean_accuracy,
    }
    report = tmp_path / "leaky_vs_clean.json"
    report.write_text(json.dumps(rows, indent=2, sort_keys=True))
    assert set(json.loads(report.read_text())) == set(rows)
    print("\nACCEPTANCE 8 side-by-side report:", json.dumps(rows))
