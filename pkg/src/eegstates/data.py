"""Raw EEG session records: loading, validation, labeling, and synthesis.

A session record is a 7-channel time series sampled at 128 Hz. Sessions follow
a fixed protocol on a 40-minute horizon: the first ten minutes are focused
activity, the next ten unfocused watching, and the remainder drowsy rest.
The canonical on-disk format is a CSV with a sample-rate comment line, a
channel header, and one row of microvolt values per sample.

The synthetic generator produces protocol-shaped records whose three phases
carry band-limited noise in distinct dominant bands, so the downstream
pipeline can be exercised without any externally acquired data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    BadArgsError,
    BadSampleRateError,
    ManifestError,
    MissingChannelError,
    OutOfHorizonError,
    RaggedChannelsError,
    RecordFormatError,
)

CHANNEL_NAMES = ("F3", "F4", "Fz", "C3", "C4", "Cz", "Pz")
N_CHANNELS = len(CHANNEL_NAMES)
SAMPLE_RATE_HZ = 128

HORIZON_S = 2400.0
CAP_SAMPLES = int(HORIZON_S) * SAMPLE_RATE_HZ  # 307200
FOCUSED_END_S = 600.0
UNFOCUSED_END_S = 1200.0

# Dominant band (Hz) of the synthetic signal in each protocol phase.
SYNTH_BANDS = {
    0: (13.0, 30.0),  # focused: beta-dominant
    1: (8.0, 12.0),   # unfocused: alpha-dominant
    2: (1.0, 7.0),    # drowsed: delta/theta-dominant
}


class MentalState(IntEnum):
    """The three protocol phases, with a stable 0/1/2 encoding."""

    FOCUSED = 0
    UNFOCUSED = 1
    DROWSED = 2


def label_at(t_seconds: float) -> MentalState:
    """Map a session time (seconds) to its protocol state.

    Boundaries are half-open: [0, 600) focused, [600, 1200) unfocused,
    [1200, 2400) drowsed. Times outside [0, 2400) raise OutOfHorizonError.
    """
    if t_seconds < 0.0 or t_seconds >= HORIZON_S:
        raise OutOfHorizonError(
            f"t={t_seconds} s is outside the [0, {HORIZON_S:.0f}) s horizon"
        )
    if t_seconds < FOCUSED_END_S:
        return MentalState.FOCUSED
    if t_seconds < UNFOCUSED_END_S:
        return MentalState.UNFOCUSED
    return MentalState.DROWSED


def labels_at(t_seconds: np.ndarray) -> np.ndarray:
    """Vectorized :func:`label_at`; returns int codes."""
    return labels_for_protocol(t_seconds, HORIZON_S)


def labels_for_protocol(t_seconds: np.ndarray, protocol_s: float) -> np.ndarray:
    """Phase labels for a protocol compressed to `protocol_s` seconds.

    Phases keep the 1/4 focused, 1/4 unfocused, 1/2 drowsed layout, so at the
    full 2400 s horizon this is exactly :func:`label_at`. Desk-scale records
    (notably synthetic ones) are treated as complete protocol sessions with
    proportionally scaled phases; without this rule their frames would all
    fall inside the first real-protocol phase.
    """
    t = np.asarray(t_seconds, dtype=float)
    if t.size and (t.min() < 0.0 or t.max() >= protocol_s):
        raise OutOfHorizonError(
            f"time points outside the [0, {protocol_s}) s protocol"
        )
    out = np.full(t.shape, int(MentalState.DROWSED), dtype=np.int64)
    out[t < protocol_s / 2.0] = int(MentalState.UNFOCUSED)
    out[t < protocol_s / 4.0] = int(MentalState.FOCUSED)
    return out


@dataclass(frozen=True, eq=False)
class RawRecord:
    """One session's 7-channel EEG time series at 128 Hz.

    `samples` has shape (7, n_samples) with rows in CHANNEL_NAMES order.
    Records are immutable once constructed and safe to share across workers.
    """

    subject_id: int
    record_index: int
    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ

    def __post_init__(self) -> None:
        if self.subject_id < 1 or self.record_index < 1:
            raise BadArgsError("subject_id and record_index must be >= 1")
        if self.sample_rate_hz != SAMPLE_RATE_HZ:
            raise BadSampleRateError(
                f"sample rate must be {SAMPLE_RATE_HZ} Hz, got {self.sample_rate_hz}"
            )
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != N_CHANNELS:
            raise RecordFormatError(
                f"samples must have shape (7, n_samples), got {arr.shape}"
            )
        object.__setattr__(self, "samples", arr)
        arr.setflags(write=False)

    @classmethod
    def from_channels(
        cls,
        subject_id: int,
        record_index: int,
        channels: Mapping[str, np.ndarray],
    ) -> "RawRecord":
        """Build a record from a name->series map, enforcing the fixed order."""
        missing = [name for name in CHANNEL_NAMES if name not in channels]
        if missing:
            raise MissingChannelError(f"missing channels: {', '.join(missing)}")
        extra = [name for name in channels if name not in CHANNEL_NAMES]
        if extra:
            raise RecordFormatError(f"unexpected channels: {', '.join(extra)}")
        series = [np.asarray(channels[name], dtype=float) for name in CHANNEL_NAMES]
        lengths = {len(s) for s in series}
        if len(lengths) != 1:
            raise RaggedChannelsError(f"unequal channel lengths: {sorted(lengths)}")
        return cls(subject_id, record_index, np.stack(series))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    @property
    def channels(self) -> dict[str, np.ndarray]:
        """Ordered channel-name -> series view of the sample matrix."""
        return dict(zip(CHANNEL_NAMES, self.samples))

    def channel(self, name: str) -> np.ndarray:
        if name not in CHANNEL_NAMES:
            raise MissingChannelError(f"unknown channel {name!r}")
        return self.samples[CHANNEL_NAMES.index(name)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RawRecord):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.record_index == other.record_index
            and self.sample_rate_hz == other.sample_rate_hz
            and self.samples.shape == other.samples.shape
            and self.samples.tobytes() == other.samples.tobytes()
        )


def write_record(record: RawRecord, path: str | Path) -> Path:
    """Write a record in the canonical CSV format.

    Values are written with shortest round-trip float formatting, so
    load_record(write_record(r)) reproduces `r` bit for bit.
    """
    path = Path(path)
    with open(path, "w", newline="") as f:
        f.write(f"# sample_rate_hz={record.sample_rate_hz}\n")
        f.write(",".join(CHANNEL_NAMES) + "\n")
        for row in record.samples.T:
            f.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


def load_record(path: str | Path, subject_id: int, record_index: int) -> RawRecord:
    """Load a canonical record CSV.

    Raises BadSampleRateError, MissingChannelError, or RaggedChannelsError
    when the file violates the format; sample counts are preserved exactly.
    """
    path = Path(path)
    with open(path, "r", newline="") as f:
        meta = f.readline().strip()
        if not meta.startswith("# sample_rate_hz="):
            raise RecordFormatError(f"{path}: first line must declare sample_rate_hz")
        try:
            rate = int(meta.split("=", 1)[1])
        except ValueError as exc:
            raise RecordFormatError(f"{path}: unparseable sample rate") from exc
        if rate != SAMPLE_RATE_HZ:
            raise BadSampleRateError(
                f"{path}: declared rate {rate} Hz, expected {SAMPLE_RATE_HZ}"
            )
        header = tuple(f.readline().strip().split(","))
        missing = [name for name in CHANNEL_NAMES if name not in header]
        if missing:
            raise MissingChannelError(f"{path}: missing channels {', '.join(missing)}")
        if header != CHANNEL_NAMES:
            raise RecordFormatError(
                f"{path}: header must be {','.join(CHANNEL_NAMES)}"
            )
        try:
            table = np.loadtxt(f, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise RaggedChannelsError(f"{path}: {exc}") from exc
    if table.size == 0:
        raise RecordFormatError(f"{path}: no sample rows")
    if table.shape[1] != N_CHANNELS:
        raise RaggedChannelsError(
            f"{path}: rows have {table.shape[1]} values, expected {N_CHANNELS}"
        )
    return RawRecord(subject_id, record_index, np.ascontiguousarray(table.T))


@dataclass(frozen=True)
class ManifestEntry:
    subject_id: int
    record_index: int
    path: str


@dataclass
class DatasetManifest:
    """Index of record files, with per-subject record counts.

    Paths may be relative; they are resolved against `base_dir` (the
    directory the manifest was loaded from) when records are read.
    """

    entries: list[ManifestEntry] = field(default_factory=list)
    base_dir: Path | None = None

    def __post_init__(self) -> None:
        keys = [(e.subject_id, e.record_index) for e in self.entries]
        if len(set(keys)) != len(keys):
            raise ManifestError("duplicate (subject, record) pairs in manifest")

    def __len__(self) -> int:
        return len(self.entries)

    def subjects(self) -> list[int]:
        return sorted({e.subject_id for e in self.entries})

    def record_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for e in self.entries:
            counts[e.subject_id] = counts.get(e.subject_id, 0) + 1
        return counts

    def records_of(self, subject_id: int) -> list[ManifestEntry]:
        return sorted(
            (e for e in self.entries if e.subject_id == subject_id),
            key=lambda e: e.record_index,
        )

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p

    def load_records(self) -> list[RawRecord]:
        return [
            load_record(self.resolve(e), e.subject_id, e.record_index)
            for e in self.entries
        ]

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        payload = [
            {"subject": e.subject_id, "record": e.record_index, "path": e.path}
            for e in self.entries
        ]
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        path = Path(path)
        try:
            with open(path) as f:
                payload = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
        if not isinstance(payload, list):
            raise ManifestError(f"{path}: manifest must be a JSON array")
        entries = []
        for item in payload:
            try:
                entries.append(
                    ManifestEntry(int(item["subject"]), int(item["record"]), item["path"])
                )
            except (KeyError, TypeError) as exc:
                raise ManifestError(f"{path}: bad manifest entry {item!r}") from exc
        return cls(entries, base_dir=path.parent)


def record_filename(subject_id: int, record_index: int) -> str:
    return f"s{subject_id:02d}_r{record_index:02d}.csv"


def _band_noise(rng: np.random.Generator, n: int, lo_hz: float, hi_hz: float) -> np.ndarray:
    """Unit-RMS noise band-limited to [lo_hz, hi_hz] via spectral masking."""
    x = rng.standard_normal(n)
    spectrum = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, d=1.0 / SAMPLE_RATE_HZ)
    spectrum[(freqs < lo_hz) | (freqs > hi_hz)] = 0.0
    y = np.fft.irfft(spectrum, n)
    rms = np.sqrt(np.mean(y * y))
    if rms == 0.0:
        return y
    return y / rms


def _synth_record(
    subject_id: int,
    record_index: int,
    n_samples: int,
    subject_gain: float,
    rng: np.random.Generator,
) -> RawRecord:
    # Phase layout scaled to the record: 1/4 focused, 1/4 unfocused, 1/2 drowsed.
    quarter = n_samples // 4
    bounds = [(0, quarter), (quarter, 2 * quarter), (2 * quarter, n_samples)]

    samples = np.empty((N_CHANNELS, n_samples))
    for ch in range(N_CHANNELS):
        jitter = rng.uniform(0.9, 1.1)
        for state, (a, b) in enumerate(bounds):
            lo, hi = SYNTH_BANDS[state]
            seg = _band_noise(rng, b - a, lo, hi)
            seg = seg + 0.3 * rng.standard_normal(b - a)
            samples[ch, a:b] = seg * jitter
    samples *= 20.0 * subject_gain  # microvolt-ish scale
    return RawRecord(subject_id, record_index, samples)


def generate_synthetic(
    n_subjects: int,
    records_per_subject: int,
    duration_s: int,
    seed: int,
) -> tuple[list[RawRecord], DatasetManifest]:
    """Generate a protocol-shaped synthetic dataset.

    Each record follows the phase protocol scaled to `duration_s`: the first
    quarter is focused (13-30 Hz dominant), the next quarter unfocused
    (8-12 Hz dominant), and the second half drowsed (1-7 Hz dominant), each
    mixed with broadband noise and scaled by a per-subject gain factor.
    Output is a pure function of the arguments: identical calls produce
    bit-identical records. The returned manifest uses the conventional
    relative file names (see :func:`write_dataset`).
    """
    if n_subjects < 2:
        raise BadArgsError("need >= 2 subjects")
    if records_per_subject < 1:
        raise BadArgsError("need >= 1 record per subject")
    if duration_s < 60:
        raise BadArgsError("duration_s must be >= 60")
    seed_u64 = int(seed) & 0xFFFFFFFFFFFFFFFF
    n_samples = int(duration_s) * SAMPLE_RATE_HZ

    records: list[RawRecord] = []
    entries: list[ManifestEntry] = []
    for subject in range(1, n_subjects + 1):
        gain_rng = np.random.default_rng([seed_u64, subject])
        subject_gain = gain_rng.uniform(0.8, 1.25)
        for record_index in range(1, records_per_subject + 1):
            rng = np.random.default_rng([seed_u64, subject, record_index])
            records.append(
                _synth_record(subject, record_index, n_samples, subject_gain, rng)
            )
            entries.append(
                ManifestEntry(subject, record_index, record_filename(subject, record_index))
            )
    return records, DatasetManifest(entries)


def write_dataset(
    records: Iterable[RawRecord],
    manifest: DatasetManifest,
    out_dir: str | Path,
) -> DatasetManifest:
    """Write record CSVs plus manifest.json under `out_dir`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_key = {(e.subject_id, e.record_index): e for e in manifest.entries}
    for record in records:
        entry = by_key[(record.subject_id, record.record_index)]
        write_record(record, out_dir / entry.path)
    written = DatasetManifest(list(manifest.entries), base_dir=out_dir)
    written.save(out_dir / "manifest.json")
    return written
