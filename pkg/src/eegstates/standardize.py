"""Feature standardization, in both regimes, plus a leakage auditor.

Two schemes are implemented side by side:

* ``per-record`` -- every record is standardized with its own feature-wise
  mean and deviation, computed before (and regardless of) any split. This is
  the historical baseline. It reads held-out frames while fitting, so it is
  retained strictly as a clearly labeled *leaky baseline*.
* ``global-train`` -- statistics are fitted feature-wise on exactly the
  training frames of a split and applied unchanged to train, validation, and
  test. Held-out frames are never read during fitting.

Validation frames are treated like test frames under both schemes.
Deviations are population (1/N) standard deviations; features whose
deviation falls below 1e-12 get sigma = 1.0 so constant columns standardize
to zero instead of blowing up.

The auditor flags a run as LEAKY if any fitted scope includes frames outside
the split's train set, or if perturbing every held-out frame by a fixed
delta and refitting changes any parameter bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    EmptyTrainError,
    IncompleteMetadataError,
    LengthMismatchError,
    MixedRecordsError,
    TooFewFramesError,
)
from .features import N_FEATURES, FeatureSet
from .splits import DatasetSplit

SIGMA_FLOOR = 1e-12
PROBE_DELTA = 1.0


class Scheme(Enum):
    PER_RECORD = "per-record"
    GLOBAL_TRAIN = "global-train"


@dataclass(frozen=True)
class FitScope:
    """Which frames a standardizer was fitted on.

    kind "record" scopes to one (subject, record); kind "split" scopes to the
    train indices of a split. The auditor resolves scopes back to frame
    indices against the run's feature set.
    """

    kind: str
    subject_id: int | None = None
    record_index: int | None = None
    split: dict | None = None

    def to_dict(self) -> dict:
        if self.kind == "record":
            return {
                "kind": "record",
                "subject": self.subject_id,
                "record": self.record_index,
            }
        return {"kind": "split", "split": self.split}

    @classmethod
    def from_dict(cls, d: dict) -> "FitScope":
        if d.get("kind") == "record":
            return cls("record", subject_id=d["subject"], record_index=d["record"])
        if d.get("kind") == "split":
            return cls("split", split=d.get("split"))
        raise IncompleteMetadataError(f"unrecognized fit scope {d!r}")


@dataclass
class StandardizerParams:
    """Feature-wise mean/deviation with fit provenance."""

    mu: np.ndarray
    sigma: np.ndarray
    scheme: Scheme
    fit_scope: FitScope | None

    def __post_init__(self) -> None:
        self.mu = np.asarray(self.mu, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.mu.shape != (N_FEATURES,) or self.sigma.shape != (N_FEATURES,):
            raise LengthMismatchError(
                f"mu/sigma must have length {N_FEATURES}, got"
                f" {self.mu.shape} / {self.sigma.shape}"
            )
        if np.any(self.sigma <= 0):
            raise LengthMismatchError("sigma entries must be positive")

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "fit_scope": self.fit_scope.to_dict() if self.fit_scope else None,
            "mu": [float(v) for v in self.mu],
            "sigma": [float(v) for v in self.sigma],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizerParams":
        scope = d.get("fit_scope")
        return cls(
            mu=np.asarray(d["mu"], dtype=float),
            sigma=np.asarray(d["sigma"], dtype=float),
            scheme=Scheme(d["scheme"]),
            fit_scope=FitScope.from_dict(scope) if scope else None,
        )


def save_params(params_list: list[StandardizerParams], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w") as f:
        json.dump([p.to_dict() for p in params_list], f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def load_params(path: str | Path) -> list[StandardizerParams]:
    with open(path) as f:
        payload = json.load(f)
    return [StandardizerParams.from_dict(d) for d in payload]


def _fit_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = x.mean(axis=0)
    sigma = x.std(axis=0)  # population (1/N) deviation
    sigma = np.where(sigma < SIGMA_FLOOR, 1.0, sigma)
    return mu, sigma


def fit_per_record(record_frames: FeatureSet) -> StandardizerParams:
    """Fit mean/deviation over the frames of exactly one record."""
    pairs = record_frames.records()
    if len(pairs) != 1:
        raise MixedRecordsError(f"frames span multiple records: {pairs}")
    if len(record_frames) < 2:
        raise TooFewFramesError("need at least 2 frames to fit a standardizer")
    mu, sigma = _fit_stats(record_frames.features)
    subject, record = pairs[0]
    return StandardizerParams(
        mu,
        sigma,
        Scheme.PER_RECORD,
        FitScope("record", subject_id=subject, record_index=record),
    )


def fit_global_train(features: FeatureSet, split: DatasetSplit) -> StandardizerParams:
    """Fit mean/deviation over exactly the split's training frames.

    Validation and test rows are never read: the computation touches only
    the gathered train submatrix.
    """
    if len(split.train) == 0:
        raise EmptyTrainError("split has no training frames")
    mu, sigma = _fit_stats(features.features[split.train])
    return StandardizerParams(
        mu, sigma, Scheme.GLOBAL_TRAIN, FitScope("split", split=split.describe())
    )


def apply(params: StandardizerParams, x: np.ndarray) -> np.ndarray:
    """Standardize a 252-vector or an (n, 252) matrix: (x - mu) / sigma."""
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != N_FEATURES:
        raise LengthMismatchError(
            f"last dimension must be {N_FEATURES}, got {arr.shape}"
        )
    return (arr - params.mu) / params.sigma


@dataclass
class StandardizationRun:
    """A completed standardization over a split: what the auditor inspects."""

    features: FeatureSet
    split: DatasetSplit
    scheme: Scheme
    params: list[StandardizerParams]


@dataclass
class StandardizedSplit:
    """Standardized feature matrices and labels for the three index sets."""

    train_x: np.ndarray
    train_y: np.ndarray
    validation_x: np.ndarray
    validation_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    run: StandardizationRun


def _fit_all(features: FeatureSet, split: DatasetSplit, scheme: Scheme) -> list[StandardizerParams]:
    if scheme is Scheme.GLOBAL_TRAIN:
        return [fit_global_train(features, split)]
    return [
        fit_per_record(features.select(features.indices_of_record(s, r)))
        for s, r in features.records()
    ]


def _standardize_all(
    features: FeatureSet, params: list[StandardizerParams], scheme: Scheme
) -> np.ndarray:
    if scheme is Scheme.GLOBAL_TRAIN:
        return apply(params[0], features.features)
    out = np.empty_like(features.features)
    by_record = {
        (p.fit_scope.subject_id, p.fit_scope.record_index): p for p in params
    }
    for s, r in features.records():
        idx = features.indices_of_record(s, r)
        out[idx] = apply(by_record[(s, r)], features.features[idx])
    return out


def standardize_split(
    features: FeatureSet, split: DatasetSplit, scheme: Scheme
) -> StandardizedSplit:
    """Fit per the scheme and return standardized train/validation/test sets."""
    params = _fit_all(features, split, scheme)
    standardized = _standardize_all(features, params, scheme)
    run = StandardizationRun(features, split, scheme, params)
    return StandardizedSplit(
        train_x=standardized[split.train],
        train_y=features.labels[split.train],
        validation_x=standardized[split.validation],
        validation_y=features.labels[split.validation],
        test_x=standardized[split.test],
        test_y=features.labels[split.test],
        run=run,
    )


CLEAN = "CLEAN"
LEAKY = "LEAKY"


@dataclass
class LeakageReport:
    verdict: str
    scheme: Scheme
    findings: list[str] = field(default_factory=list)

    @property
    def leaky(self) -> bool:
        return self.verdict == LEAKY

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "scheme": self.scheme.value,
            "findings": list(self.findings),
        }


def _scope_indices(scope: FitScope, run: StandardizationRun) -> np.ndarray:
    if scope.kind == "record":
        return run.features.indices_of_record(scope.subject_id, scope.record_index)
    return run.split.train


def audit_leakage(run: StandardizationRun) -> LeakageReport:
    """Check a standardization run for held-out-data leakage.

    Two independent checks: (a) every fitted scope must lie inside the
    split's train set; (b) perturbing all validation/test feature values by
    a fixed delta and refitting must leave every parameter bit unchanged.
    """
    if run.split is None or not run.params:
        raise IncompleteMetadataError("run lacks a split or fitted parameters")
    if any(p.fit_scope is None for p in run.params):
        raise IncompleteMetadataError("fitted parameters lack fit-scope metadata")

    findings: list[str] = []
    train_set = set(int(i) for i in run.split.train)
    held_out = np.concatenate([run.split.validation, run.split.test])
    test_set = set(int(i) for i in run.split.test)
    val_set = set(int(i) for i in run.split.validation)

    for p in run.params:
        idx = _scope_indices(p.fit_scope, run)
        scope_ids = set(int(i) for i in idx)
        outside_test = scope_ids & test_set
        outside_val = scope_ids & val_set
        if not (outside_test or outside_val):
            continue
        where = "test" if outside_test else "validation"
        if scope_ids & train_set:
            findings.append(
                f"train transform used {where} statistics:"
                f" scope {p.fit_scope.to_dict()} spans train and {where} frames"
            )
        else:
            findings.append(
                f"fit scope contains {where} frames: {p.fit_scope.to_dict()}"
            )

    if len(held_out):
        probed = FeatureSet(
            run.features.features.copy(),
            run.features.t_center_s,
            run.features.labels,
            run.features.subject_ids,
            run.features.record_indices,
            run.features.config,
        )
        probed.features[held_out] += PROBE_DELTA
        refit = _fit_all(probed, run.split, run.scheme)
        for old, new in zip(run.params, refit):
            if (
                old.mu.tobytes() != new.mu.tobytes()
                or old.sigma.tobytes() != new.sigma.tobytes()
            ):
                findings.append(
                    "mutation probe changed fitted parameters:"
                    f" scope {old.fit_scope.to_dict()}"
                )

    verdict = LEAKY if findings else CLEAN
    return LeakageReport(verdict, run.scheme, findings)
