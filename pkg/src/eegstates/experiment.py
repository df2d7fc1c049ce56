"""End-to-end runs: leave-one-subject-out evaluation, (window x hop) sweeps,
heatmap emission, and the best-accuracy-per-model table.

A sweep cell extracts features at its (window, hop), evaluates the paradigm,
and stores the mean test accuracy. Cells are independent: a failing cell
records an error marker without disturbing the others, and per-cell seeds
are derived from (master seed, window, hop, model kind) so results do not
depend on execution order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import RawRecord
from .errors import BadArgsError, EmptyError, TooFewSubjectsError
from .features import FeatureSet, SpectrogramConfig, extract_features
from .models import ClassifierSpec, ModelKind, accuracy, fit, predict
from .splits import (
    Paradigm,
    cap_40min,
    split_common_subject,
    split_leave_one_out,
    split_subject_specific,
)
from .standardize import Scheme, standardize_split
from .training import TrainConfig

_KIND_ORDINAL = {kind: i for i, kind in enumerate(ModelKind)}

# Reporting order for the combined best-accuracy table.
TABLE_ORDER = (
    ModelKind.RANDOM_FOREST,
    ModelKind.SVM,
    ModelKind.GRAD_BOOST,
    ModelKind.DNN4_LARGE,
    ModelKind.DNN6,
    ModelKind.DNN4_SMALL,
)

DEFAULT_WINDOWS_S = (4, 8, 16, 24, 32, 40)
DEFAULT_HOPS = (8, 32, 64, 128, 192, 384)


@dataclass
class LosoResult:
    per_subject: dict[int, float]
    mean_accuracy: float


def cell_seed(master_seed: int, window_length_s: int, hop_samples: int, kind: ModelKind) -> int:
    """Deterministic per-cell seed: SeedSequence over (master, window, hop,
    model-kind ordinal), collapsed to one 64-bit integer."""
    ss = np.random.SeedSequence(
        [
            int(master_seed) & 0xFFFFFFFFFFFFFFFF,
            int(window_length_s),
            int(hop_samples),
            _KIND_ORDINAL[kind],
        ]
    )
    return int(ss.generate_state(1, np.uint64)[0])


def evaluate_split(
    features: FeatureSet,
    split,
    spec: ClassifierSpec,
    scheme: Scheme,
    train_config: TrainConfig | None,
) -> float:
    """Standardize per the scheme, fit, and score test accuracy."""
    std = standardize_split(features, split, scheme)
    trained = fit(
        spec,
        std.train_x,
        std.train_y,
        std.validation_x,
        std.validation_y,
        train_config,
    )
    labels, _ = predict(trained, std.test_x)
    return accuracy(labels, std.test_y)


def run_loso(
    features: FeatureSet,
    spec: ClassifierSpec,
    scheme: Scheme,
    train_config: TrainConfig | None = None,
    subjects: Sequence[int] | None = None,
) -> LosoResult:
    """Iterate the test subject over all subjects and average test accuracy.

    The mean is the unweighted arithmetic mean over subjects, regardless of
    how many frames each subject contributes. `subjects` narrows the folds
    that are evaluated (default: every subject in turn).
    """
    if len(features.subjects()) < 2:
        raise TooFewSubjectsError("leave-one-out needs at least 2 subjects")
    folds = list(subjects) if subjects is not None else features.subjects()
    per_subject: dict[int, float] = {}
    for subject in folds:
        split = split_leave_one_out(features, subject)
        per_subject[subject] = evaluate_split(
            features, split, spec, scheme, train_config
        )
    mean = sum(per_subject.values()) / len(per_subject)
    return LosoResult(per_subject, mean)


def _needs_validation(kind: ModelKind) -> bool:
    from .models import MLP_KINDS

    return kind in MLP_KINDS


def run_paradigm(
    features: FeatureSet,
    paradigm: Paradigm,
    spec: ClassifierSpec,
    scheme: Scheme,
    train_config: TrainConfig | None = None,
    seed: int = 0,
    train_fraction: float = 0.8,
    with_validation: bool | None = None,
    subject: int | None = None,
    test_subject: int | None = None,
) -> LosoResult:
    """Evaluate one paradigm; per-subject map keys depend on the paradigm.

    leave-one-out: one entry per test subject (optionally narrowed to
    `test_subject`). subject-specific: one entry per subject (each split
    80/20 on that subject's own frames), optionally narrowed to `subject`.
    common-subject: a single pooled entry keyed 0.
    """
    if with_validation is None:
        with_validation = _needs_validation(spec.kind)
    if paradigm is Paradigm.LEAVE_ONE_OUT:
        narrowed = [test_subject] if test_subject is not None else None
        return run_loso(features, spec, scheme, train_config, subjects=narrowed)
    if paradigm is Paradigm.COMMON_SUBJECT:
        split = split_common_subject(
            features, train_fraction, seed, with_validation=with_validation
        )
        acc = evaluate_split(features, split, spec, scheme, train_config)
        return LosoResult({0: acc}, acc)
    per_subject = {}
    subjects = [subject] if subject is not None else features.subjects()
    for s in subjects:
        split = split_subject_specific(
            features, s, train_fraction, seed, with_validation=with_validation
        )
        per_subject[s] = evaluate_split(features, split, spec, scheme, train_config)
    return LosoResult(per_subject, sum(per_subject.values()) / len(per_subject))


@dataclass(frozen=True)
class SweepGrid:
    """Axes and fixed context for one model's (window x hop) sweep."""

    window_lengths_s: tuple[int, ...]
    hop_lengths: tuple[int, ...]
    model_kind: ModelKind
    scheme: Scheme
    paradigm: Paradigm = Paradigm.LEAVE_ONE_OUT
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.window_lengths_s or not self.hop_lengths:
            raise BadArgsError("sweep axes must be non-empty")
        if len(set(self.window_lengths_s)) != len(self.window_lengths_s):
            raise BadArgsError("duplicate window lengths")
        if len(set(self.hop_lengths)) != len(self.hop_lengths):
            raise BadArgsError("duplicate hop lengths")
        object.__setattr__(
            self, "window_lengths_s", tuple(sorted(int(w) for w in self.window_lengths_s))
        )
        object.__setattr__(
            self, "hop_lengths", tuple(sorted(int(h) for h in self.hop_lengths))
        )


@dataclass
class SweepResult:
    """Mean-accuracy matrix indexed (window, hop), plus per-cell detail."""

    grid: SweepGrid
    master_seed: int
    accuracy: np.ndarray  # (n_windows, n_hops); NaN marks a failed cell
    per_cell: dict[tuple[int, int], dict[int, float]]
    errors: dict[tuple[int, int], str]

    def best(self) -> tuple[float, int, int]:
        """(accuracy, window, hop) of the matrix argmax; ties go to the
        smaller window, then the smaller hop."""
        if not np.isfinite(self.accuracy).any():
            raise EmptyError("sweep has no successful cells")
        best_acc = np.nanmax(self.accuracy)
        for wi, window in enumerate(self.grid.window_lengths_s):
            for hi, hop in enumerate(self.grid.hop_lengths):
                if self.accuracy[wi, hi] == best_acc:
                    return float(best_acc), window, hop
        raise EmptyError("unreachable")  # pragma: no cover


def _run_cell(
    records: Sequence[RawRecord],
    grid: SweepGrid,
    window: int,
    hop: int,
    master_seed: int,
    train_config: TrainConfig | None,
) -> dict[int, float]:
    config = SpectrogramConfig(window, hop)
    features = FeatureSet.concat(
        [extract_features(cap_40min(r), config) for r in records]
    )
    seed = cell_seed(master_seed, window, hop, grid.model_kind)
    spec = ClassifierSpec(grid.model_kind, dict(grid.hyperparameters), seed=seed)
    result = run_paradigm(
        features,
        grid.paradigm,
        spec,
        grid.scheme,
        train_config,
        seed=seed,
    )
    return result.per_subject


def run_sweep(
    records: Sequence[RawRecord],
    grid: SweepGrid,
    train_config: TrainConfig | None = None,
    master_seed: int = 0,
    jobs: int = 1,
) -> SweepResult:
    """Evaluate every (window, hop) cell; failed cells record an error marker.

    Records are expected to be habituation-free already; the 40-minute cap is
    applied here. With jobs > 1, cells run in a process pool; per-cell seeds
    make the result identical either way.
    """
    cells = [
        (wi, hi, window, hop)
        for wi, window in enumerate(grid.window_lengths_s)
        for hi, hop in enumerate(grid.hop_lengths)
    ]
    acc = np.full((len(grid.window_lengths_s), len(grid.hop_lengths)), np.nan)
    per_cell: dict[tuple[int, int], dict[int, float]] = {}
    errors: dict[tuple[int, int], str] = {}

    def finish(wi, hi, window, hop, outcome, error):
        if error is not None:
            errors[(window, hop)] = error
            return
        per_cell[(window, hop)] = outcome
        acc[wi, hi] = sum(outcome.values()) / len(outcome)

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                (wi, hi, window, hop): pool.submit(
                    _run_cell, list(records), grid, window, hop, master_seed, train_config
                )
                for wi, hi, window, hop in cells
            }
            for (wi, hi, window, hop), future in futures.items():
                try:
                    finish(wi, hi, window, hop, future.result(), None)
                except Exception as exc:  # cell isolation: record, don't abort
                    finish(wi, hi, window, hop, None, f"{type(exc).__name__}: {exc}")
    else:
        for wi, hi, window, hop in cells:
            try:
                outcome = _run_cell(records, grid, window, hop, master_seed, train_config)
                finish(wi, hi, window, hop, outcome, None)
            except Exception as exc:  # cell isolation: record, don't abort
                finish(wi, hi, window, hop, None, f"{type(exc).__name__}: {exc}")

    return SweepResult(grid, master_seed, acc, per_cell, errors)


@dataclass(frozen=True)
class TableRow:
    model_kind: ModelKind
    best_accuracy: float
    window_length_s: int
    hop_lengths: tuple[int, ...]  # all hops tied at the best accuracy


def best_accuracy_table(results: dict[ModelKind, SweepResult]) -> list[TableRow]:
    """One row per model: its best cell, with tied hops all reported.

    The reported window is the smallest achieving the best accuracy; every
    hop reaching it at that window is listed. Rows follow the fixed
    reporting order.
    """
    if not results:
        raise EmptyError("no sweep results to tabulate")
    rows = []
    ordered = [k for k in TABLE_ORDER if k in results]
    ordered += [k for k in results if k not in TABLE_ORDER]
    for kind in ordered:
        sweep = results[kind]
        best_acc, best_window, _ = sweep.best()
        wi = sweep.grid.window_lengths_s.index(best_window)
        tied = tuple(
            hop
            for hi, hop in enumerate(sweep.grid.hop_lengths)
            if sweep.accuracy[wi, hi] == best_acc
        )
        rows.append(TableRow(kind, best_acc, best_window, tied))
    return rows


def table_to_csv(rows: list[TableRow], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        f.write("model,best_accuracy,window_length_s,hop_samples\n")
        for row in rows:
            hops = " and ".join(str(h) for h in row.hop_lengths)
            f.write(
                f"{row.model_kind.value},{row.best_accuracy:.6f},"
                f"{row.window_length_s},{hops}\n"
            )
    return path


def emit_heatmap(sweep: SweepResult, path: str | Path) -> Path:
    """CSV heatmap: first row the hop axis, first column the window axis,
    cells the mean accuracy at 6 decimals (or ERR), axes ascending."""
    if sweep.accuracy.size == 0 or not np.isfinite(sweep.accuracy).any():
        raise EmptyError("sweep has no successful cells")
    path = Path(path)
    with open(path, "w", newline="") as f:
        f.write("window_s\\hop," + ",".join(str(h) for h in sweep.grid.hop_lengths))
        f.write("\n")
        for wi, window in enumerate(sweep.grid.window_lengths_s):
            cells = [
                "ERR" if not np.isfinite(v) else f"{v:.6f}"
                for v in sweep.accuracy[wi]
            ]
            f.write(f"{window}," + ",".join(cells) + "\n")
    return path


def parse_heatmap(path: str | Path) -> tuple[list[int], list[int], np.ndarray]:
    """Read back an emitted heatmap; ERR cells come back as NaN."""
    with open(path) as f:
        lines = [line.strip() for line in f if line.strip()]
    hops = [int(h) for h in lines[0].split(",")[1:]]
    windows = []
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        windows.append(int(parts[0]))
        rows.append([np.nan if v == "ERR" else float(v) for v in parts[1:]])
    return windows, hops, np.asarray(rows)


def write_summary(
    sweep: SweepResult,
    path: str | Path,
) -> Path:
    """Per-sweep report JSON: provenance, best cell, and its per-subject map."""
    best_acc, best_window, best_hop = sweep.best()
    payload = {
        "model": sweep.grid.model_kind.value,
        "scheme": sweep.grid.scheme.value,
        "paradigm": sweep.grid.paradigm.value,
        "seed": sweep.master_seed,
        "best": {"acc": best_acc, "window": best_window, "hop": best_hop},
        "per_subject": {
            str(k): v for k, v in sweep.per_cell[(best_window, best_hop)].items()
        },
        "errors": {f"{w}x{h}": msg for (w, h), msg in sorted(sweep.errors.items())},
    }
    path = Path(path)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path
