"""eegstates: a desk-scale workbench for leakage-free EEG mental-state
classification experiments.

Pipeline: raw 7-channel records -> windowed spectral features -> three-way
splits -> standardization (corrected global-train scheme or the leaky
per-record baseline, with an auditor that tells them apart) -> scheduled
classifier training -> leave-one-subject-out evaluation and (window x hop)
accuracy sweeps.
"""

__version__ = "0.1.0"

from .data import (
    CHANNEL_NAMES,
    MentalState,
    RawRecord,
    DatasetManifest,
    generate_synthetic,
    label_at,
    load_record,
    write_record,
)
from .features import FeatureSet, SpectrogramConfig, extract_features
from .splits import (
    DatasetSplit,
    Paradigm,
    cap_40min,
    drop_habituation,
    split_common_subject,
    split_leave_one_out,
    split_subject_specific,
)
from .standardize import (
    Scheme,
    StandardizerParams,
    apply,
    audit_leakage,
    fit_global_train,
    fit_per_record,
    standardize_split,
)
from .models import ClassifierSpec, ModelKind, TrainedModel, accuracy, fit, predict
from .training import TrainConfig, train_loop
from .experiment import SweepGrid, SweepResult, run_loso, run_sweep

__all__ = [
    "__version__",
    "CHANNEL_NAMES",
    "MentalState",
    "RawRecord",
    "DatasetManifest",
    "generate_synthetic",
    "label_at",
    "load_record",
    "write_record",
    "FeatureSet",
    "SpectrogramConfig",
    "extract_features",
    "DatasetSplit",
    "Paradigm",
    "cap_40min",
    "drop_habituation",
    "split_common_subject",
    "split_leave_one_out",
    "split_subject_specific",
    "Scheme",
    "StandardizerParams",
    "apply",
    "audit_leakage",
    "fit_global_train",
    "fit_per_record",
    "standardize_split",
    "ClassifierSpec",
    "ModelKind",
    "TrainedModel",
    "accuracy",
    "fit",
    "predict",
    "TrainConfig",
    "train_loop",
    "SweepGrid",
    "SweepResult",
    "run_loso",
    "run_sweep",
]
