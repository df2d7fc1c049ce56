"""Dataset partitioning: habituation drop, 40-minute cap, and the three
train/validation/test paradigms.

Splits operate on frame indices into a FeatureSet; they never copy or touch
feature values. Under the leave-one-out paradigm the test subject's frames
form the test set, the highest-index retained record of every other subject
forms the validation set, and everything else trains.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .data import CAP_SAMPLES, DatasetManifest, RawRecord
from .errors import (
    BadArgsError,
    BadFractionError,
    EmptyAfterDropError,
    TooFewSubjectsError,
    UnknownSubjectError,
)
from .features import FeatureSet

HABITUATION_RECORDS = (1, 2)
VALIDATION_CARVE_FRACTION = 0.10


class Paradigm(Enum):
    COMMON_SUBJECT = "common-subject"
    SUBJECT_SPECIFIC = "subject-specific"
    LEAVE_ONE_OUT = "leave-one-out"


@dataclass
class DatasetSplit:
    """Disjoint train/validation/test frame-index sets under one paradigm."""

    paradigm: Paradigm
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    test_subject: int | None = None
    rng_seed: int | None = None
    subject: int | None = None  # subject-specific paradigm only

    def __post_init__(self) -> None:
        self.train = np.sort(np.asarray(self.train, dtype=np.int64))
        self.validation = np.sort(np.asarray(self.validation, dtype=np.int64))
        self.test = np.sort(np.asarray(self.test, dtype=np.int64))
        total = len(self.train) + len(self.validation) + len(self.test)
        union = np.union1d(np.union1d(self.train, self.validation), self.test)
        if len(union) != total:
            raise BadArgsError("train/validation/test sets overlap")

    def all_indices(self) -> np.ndarray:
        return np.union1d(np.union1d(self.train, self.validation), self.test)

    def describe(self) -> dict:
        return {
            "paradigm": self.paradigm.value,
            "test_subject": self.test_subject,
            "subject": self.subject,
            "seed": self.rng_seed,
            "n_train": int(len(self.train)),
            "n_validation": int(len(self.validation)),
            "n_test": int(len(self.test)),
        }

    def to_json(self, path: str | Path) -> Path:
        path = Path(path)
        payload = {
            "paradigm": self.paradigm.value,
            "test_subject": self.test_subject,
            "subject": self.subject,
            "seed": self.rng_seed,
            "train": [int(i) for i in self.train],
            "validation": [int(i) for i in self.validation],
            "test": [int(i) for i in self.test],
        }
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        return path

    @classmethod
    def from_json(cls, path: str | Path) -> "DatasetSplit":
        with open(path) as f:
            payload = json.load(f)
        return cls(
            paradigm=Paradigm(payload["paradigm"]),
            train=np.asarray(payload["train"], dtype=np.int64),
            validation=np.asarray(payload["validation"], dtype=np.int64),
            test=np.asarray(payload["test"], dtype=np.int64),
            test_subject=payload.get("test_subject"),
            rng_seed=payload.get("seed"),
            subject=payload.get("subject"),
        )


def drop_habituation(manifest: DatasetManifest) -> DatasetManifest:
    """Remove each subject's habituation sessions (record indices 1 and 2)."""
    kept = [e for e in manifest.entries if e.record_index not in HABITUATION_RECORDS]
    kept_subjects = {e.subject_id for e in kept}
    emptied = sorted(set(manifest.subjects()) - kept_subjects)
    if emptied:
        raise EmptyAfterDropError(
            f"subjects {emptied} have no records left after the habituation drop"
        )
    return DatasetManifest(kept, base_dir=manifest.base_dir)


def cap_40min(record: RawRecord) -> RawRecord:
    """Truncate a record to the 40-minute horizon (307200 samples)."""
    if record.n_samples <= CAP_SAMPLES:
        return record
    return RawRecord(
        record.subject_id,
        record.record_index,
        record.samples[:, :CAP_SAMPLES],
        record.sample_rate_hz,
    )


def split_leave_one_out(features: FeatureSet, test_subject: int) -> DatasetSplit:
    """Hold out one subject; validate on the last retained record of each
    remaining subject; train on their other records."""
    subjects = features.subjects()
    if test_subject not in subjects:
        raise UnknownSubjectError(f"subject {test_subject} not in dataset {subjects}")
    others = [s for s in subjects if s != test_subject]
    if not others:
        raise TooFewSubjectsError("leave-one-out needs at least one training subject")

    test = features.indices_of_subject(test_subject)
    validation_mask = np.zeros(len(features), dtype=bool)
    for s in others:
        subject_records = features.record_indices[features.subject_ids == s]
        last = int(subject_records.max())
        validation_mask |= (features.subject_ids == s) & (
            features.record_indices == last
        )
    validation = np.flatnonzero(validation_mask)
    train_mask = np.ones(len(features), dtype=bool)
    train_mask[test] = False
    train_mask[validation] = False
    return DatasetSplit(
        Paradigm.LEAVE_ONE_OUT,
        np.flatnonzero(train_mask),
        validation,
        test,
        test_subject=test_subject,
    )


def _shuffled_split(
    n: int,
    eligible: np.ndarray,
    train_fraction: float,
    seed: int,
    with_validation: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not 0.0 < train_fraction < 1.0:
        raise BadFractionError(
            f"train_fraction must be in (0, 1), got {train_fraction}"
        )
    rng = np.random.default_rng(seed)
    perm = eligible[rng.permutation(len(eligible))]
    n_train = int(len(eligible) * train_fraction)
    train_block, test = perm[:n_train], perm[n_train:]
    if with_validation:
        n_val = int(len(train_block) * VALIDATION_CARVE_FRACTION)
        return train_block[: len(train_block) - n_val], train_block[len(train_block) - n_val:], test
    return train_block, np.empty(0, dtype=np.int64), test


def split_common_subject(
    features: FeatureSet,
    train_fraction: float = 0.8,
    seed: int = 0,
    with_validation: bool = False,
) -> DatasetSplit:
    """Shuffle all frames subject-independently; train_fraction goes to train,
    the rest to test. With `with_validation`, 10% of the train block is carved
    off as a validation set for scheduler-driven training."""
    train, validation, test = _shuffled_split(
        len(features), np.arange(len(features), dtype=np.int64),
        train_fraction, seed, with_validation,
    )
    return DatasetSplit(
        Paradigm.COMMON_SUBJECT, train, validation, test, rng_seed=seed
    )


def split_subject_specific(
    features: FeatureSet,
    subject: int,
    train_fraction: float = 0.8,
    seed: int = 0,
    with_validation: bool = False,
) -> DatasetSplit:
    """Restrict to one subject's frames, then split as in the common-subject
    paradigm. The eligible universe is that subject's frames only."""
    if subject not in features.subjects():
        raise UnknownSubjectError(f"subject {subject} not in dataset")
    eligible = features.indices_of_subject(subject)
    train, validation, test = _shuffled_split(
        len(features), eligible, train_fraction, seed, with_validation
    )
    return DatasetSplit(
        Paradigm.SUBJECT_SPECIFIC,
        train,
        validation,
        test,
        rng_seed=seed,
        subject=subject,
    )
