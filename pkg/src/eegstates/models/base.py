"""Uniform classifier interface over the MLPs, forest, SVM, and boosting.

A ClassifierSpec names the model kind, a complete hyperparameter set (kind
defaults merged with overrides; unknown keys rejected) and a seed. Fitting
returns a TrainedModel carrying the fitted state plus the training history,
and every fit is a pure function of (spec, data, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import (
    BadArgsError,
    EmptyError,
    EmptyTrainError,
    LengthMismatchError,
    MissingValidationError,
    NotFittedError,
)
from ..features import N_FEATURES
from .mlp import N_CLASSES, MlpModel, init_mlp, mlp_forward
from .svm import LinearSvmModel, fit_linear_svm
from .trees import GradientBoostModel, RandomForestModel, Tree, fit_random_forest, fit_gradient_boost

from enum import Enum


class ModelKind(Enum):
    DNN4_SMALL = "dnn4-small"
    DNN4_LARGE = "dnn4"
    DNN6 = "dnn6"
    RANDOM_FOREST = "rf"
    SVM = "svm"
    GRAD_BOOST = "xgb"


MLP_KINDS = (ModelKind.DNN4_SMALL, ModelKind.DNN4_LARGE, ModelKind.DNN6)

MLP_HIDDEN_SIZES = {
    ModelKind.DNN4_SMALL: (64, 128, 64),
    ModelKind.DNN4_LARGE: (512, 1024, 512),
    ModelKind.DNN6: (512, 512, 1024, 2048, 1024),
}
DNN6_DROPOUT_RATE = 0.5
DNN6_DROPOUT_HIDDEN = 3  # the 2048-unit layer

_MLP_DEFAULTS = {
    "initial_lr": 1e-3,
    "momentum": 0.9,
    "batch_size": 64,
    "max_epochs": 200,
    "lr_halving_patience": 3,
    "early_stop_patience": 10,
    "min_improvement_delta": 0.0,
    "activation": "relu",
}

DEFAULT_HYPERPARAMETERS: dict[ModelKind, dict[str, Any]] = {
    ModelKind.DNN4_SMALL: dict(_MLP_DEFAULTS),
    ModelKind.DNN4_LARGE: dict(_MLP_DEFAULTS),
    ModelKind.DNN6: dict(_MLP_DEFAULTS),
    ModelKind.RANDOM_FOREST: {
        "n_trees": 100,
        "max_depth": None,
        "max_features": 15,  # floor(sqrt(252))
        "bootstrap": True,
    },
    ModelKind.SVM: {"c": 1.0, "epochs": 300, "learning_rate": 0.1},
    ModelKind.GRAD_BOOST: {"n_rounds": 100, "max_depth": 3, "learning_rate": 0.1},
}


@dataclass(frozen=True)
class ClassifierSpec:
    """Model kind + complete hyperparameters + seed.

    Pass only the hyperparameters you want to override; the kind's defaults
    fill in the rest. Unknown keys are rejected.
    """

    kind: ModelKind
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        defaults = DEFAULT_HYPERPARAMETERS[self.kind]
        unknown = set(self.hyperparameters) - set(defaults)
        if unknown:
            raise BadArgsError(
                f"unknown hyperparameters for {self.kind.value}: {sorted(unknown)};"
                f" valid keys: {sorted(defaults)}"
            )
        merged = dict(defaults)
        merged.update(self.hyperparameters)
        object.__setattr__(self, "hyperparameters", merged)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "hyperparameters": self.hyperparameters,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierSpec":
        return cls(ModelKind(d["kind"]), dict(d.get("hyperparameters", {})), d.get("seed", 0))


@dataclass
class TrainedModel:
    """A fitted classifier plus its training history."""

    spec: ClassifierSpec
    model: Any
    history: list
    best_epoch: int

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return _predict_proba(self, x)


def accuracy(predictions: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of exact label matches."""
    pred = np.asarray(predictions)
    true = np.asarray(truth)
    if pred.shape != true.shape:
        raise LengthMismatchError(
            f"predictions {pred.shape} vs truth {true.shape}"
        )
    if pred.size == 0:
        raise EmptyError("cannot score an empty prediction set")
    return float(np.mean(pred == true))


def _log_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    p = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(p + 1e-12)))


def _predict_proba(trained: TrainedModel, x: np.ndarray) -> np.ndarray:
    model = trained.model
    if model is None:
        raise NotFittedError("model has not been fitted")
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    batch = arr[None, :] if single else arr
    if isinstance(model, MlpModel):
        probs = mlp_forward(model, batch)
    else:
        probs = model.predict_proba(batch)
    return probs[0] if single else probs


def predict(trained: TrainedModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(labels, class probabilities); argmax ties break toward lower class."""
    probs = _predict_proba(trained, x)
    if probs.ndim == 1:
        return np.argmax(probs), probs
    return np.argmax(probs, axis=1), probs


def _single_pass_history(
    trained_probs_train: np.ndarray,
    train_y: np.ndarray,
    trained_probs_val: np.ndarray | None,
    val_y: np.ndarray | None,
):
    from ..training import EpochRecord

    val_loss = val_acc = None
    if trained_probs_val is not None and len(val_y):
        val_loss = _log_loss(trained_probs_val, val_y)
        val_acc = accuracy(np.argmax(trained_probs_val, axis=1), val_y)
    return [
        EpochRecord(
            epoch=1,
            train_loss=_log_loss(trained_probs_train, train_y),
            train_accuracy=accuracy(np.argmax(trained_probs_train, axis=1), train_y),
            validation_loss=val_loss,
            validation_accuracy=val_acc,
            learning_rate=0.0,
            events=(),
        )
    ]


def fit(
    spec: ClassifierSpec,
    train_x: np.ndarray,
    train_y: np.ndarray,
    validation_x: np.ndarray | None = None,
    validation_y: np.ndarray | None = None,
    train_config=None,
) -> TrainedModel:
    """Fit a classifier on standardized features.

    MLP kinds run the scheduled mini-batch training loop and require a
    validation set; forest/SVM/boosting fit in one pass, using validation
    only for reporting.
    """
    train_x = np.asarray(train_x, dtype=float)
    train_y = np.asarray(train_y, dtype=np.int64)
    if len(train_x) == 0:
        raise EmptyTrainError("empty training set")
    has_val = validation_x is not None and len(validation_x) > 0
    if has_val:
        validation_x = np.asarray(validation_x, dtype=float)
        validation_y = np.asarray(validation_y, dtype=np.int64)

    hp = spec.hyperparameters
    if spec.kind in MLP_KINDS:
        if not has_val:
            raise MissingValidationError(
                f"{spec.kind.value} training requires a validation set"
            )
        from ..training import TrainConfig, train_loop

        if train_config is None:
            train_config = TrainConfig(
                initial_lr=hp["initial_lr"],
                lr_halving_patience=hp["lr_halving_patience"],
                early_stop_patience=hp["early_stop_patience"],
                max_epochs=hp["max_epochs"],
                min_improvement_delta=hp["min_improvement_delta"],
            )
        hidden = MLP_HIDDEN_SIZES[spec.kind]
        sizes = [train_x.shape[1], *hidden, N_CLASSES]
        dropout_rate = DNN6_DROPOUT_RATE if spec.kind is ModelKind.DNN6 else 0.0
        dropout_hidden = DNN6_DROPOUT_HIDDEN if spec.kind is ModelKind.DNN6 else None
        model = init_mlp(sizes, spec.seed, hp["activation"], dropout_rate, dropout_hidden)
        history, best_epoch = train_loop(
            model,
            train_x,
            train_y,
            validation_x,
            validation_y,
            train_config,
            seed=spec.seed,
            momentum=hp["momentum"],
            batch_size=hp["batch_size"],
        )
        return TrainedModel(spec, model, history, best_epoch)

    if spec.kind is ModelKind.RANDOM_FOREST:
        model = fit_random_forest(
            train_x,
            train_y,
            N_CLASSES,
            n_trees=hp["n_trees"],
            max_depth=hp["max_depth"],
            max_features=hp["max_features"],
            bootstrap=hp["bootstrap"],
            seed=spec.seed,
        )
    elif spec.kind is ModelKind.SVM:
        model = fit_linear_svm(
            train_x,
            train_y,
            N_CLASSES,
            c=hp["c"],
            epochs=hp["epochs"],
            learning_rate=hp["learning_rate"],
        )
    elif spec.kind is ModelKind.GRAD_BOOST:
        model = fit_gradient_boost(
            train_x,
            train_y,
            N_CLASSES,
            n_rounds=hp["n_rounds"],
            max_depth=hp["max_depth"],
            learning_rate=hp["learning_rate"],
            seed=spec.seed,
        )
    else:  # pragma: no cover
        raise BadArgsError(f"unhandled model kind {spec.kind}")

    trained = TrainedModel(spec, model, [], 1)
    probs_train = _predict_proba(trained, train_x)
    probs_val = _predict_proba(trained, validation_x) if has_val else None
    trained.history = _single_pass_history(
        probs_train, train_y, probs_val, validation_y if has_val else None
    )
    return trained


# -- serialization ------------------------------------------------------------

_BUNDLE_VERSION = 1


def _tree_arrays(prefix: str, tree: Tree, arrays: dict) -> dict:
    arrays[f"{prefix}_feature"] = tree.feature
    arrays[f"{prefix}_threshold"] = tree.threshold
    arrays[f"{prefix}_left"] = tree.left
    arrays[f"{prefix}_right"] = tree.right
    arrays[f"{prefix}_value"] = tree.value
    return arrays


def _tree_from_arrays(prefix: str, arrays) -> Tree:
    return Tree(
        arrays[f"{prefix}_feature"],
        arrays[f"{prefix}_threshold"],
        arrays[f"{prefix}_left"],
        arrays[f"{prefix}_right"],
        arrays[f"{prefix}_value"],
    )


def save_model(trained: TrainedModel, path: str | Path) -> Path:
    """Write a versioned bundle (.npz with an embedded JSON manifest)."""
    from ..training import record_to_dict

    path = Path(path)
    arrays: dict[str, np.ndarray] = {}
    model = trained.model
    meta: dict[str, Any] = {
        "format_version": _BUNDLE_VERSION,
        "spec": trained.spec.to_dict(),
        "best_epoch": trained.best_epoch,
        "history": [record_to_dict(r) for r in trained.history],
    }
    if isinstance(model, MlpModel):
        meta["model_type"] = "mlp"
        meta["n_layers"] = len(model.weights)
        meta["activation"] = model.activation
        meta["dropout_rate"] = model.dropout_rate
        meta["dropout_hidden"] = model.dropout_hidden
        for i, (w, b) in enumerate(zip(model.weights, model.biases)):
            arrays[f"w{i}"] = w
            arrays[f"b{i}"] = b
    elif isinstance(model, RandomForestModel):
        meta["model_type"] = "random_forest"
        meta["n_trees"] = len(model.trees)
        meta["n_classes"] = model.n_classes
        for i, tree in enumerate(model.trees):
            _tree_arrays(f"t{i}", tree, arrays)
    elif isinstance(model, GradientBoostModel):
        meta["model_type"] = "gradient_boost"
        meta["n_rounds"] = len(model.trees)
        meta["n_classes"] = model.n_classes
        meta["learning_rate"] = model.learning_rate
        for i, round_trees in enumerate(model.trees):
            for c, tree in enumerate(round_trees):
                _tree_arrays(f"r{i}c{c}", tree, arrays)
    elif isinstance(model, LinearSvmModel):
        meta["model_type"] = "linear_svm"
        arrays["weights"] = model.weights
        arrays["biases"] = model.biases
    else:
        raise BadArgsError(f"cannot serialize model of type {type(model).__name__}")
    np.savez(path, manifest=json.dumps(meta, sort_keys=True), **arrays)
    return path


def load_model(path: str | Path) -> TrainedModel:
    from ..training import record_from_dict

    with np.load(path, allow_pickle=False) as bundle:
        meta = json.loads(str(bundle["manifest"]))
        if meta.get("format_version") != _BUNDLE_VERSION:
            raise BadArgsError(
                f"unsupported bundle version {meta.get('format_version')}"
            )
        model_type = meta["model_type"]
        if model_type == "mlp":
            weights = [bundle[f"w{i}"] for i in range(meta["n_layers"])]
            biases = [bundle[f"b{i}"] for i in range(meta["n_layers"])]
            model: Any = MlpModel(
                weights,
                biases,
                meta["activation"],
                meta["dropout_rate"],
                meta["dropout_hidden"],
            )
        elif model_type == "random_forest":
            trees = [_tree_from_arrays(f"t{i}", bundle) for i in range(meta["n_trees"])]
            model = RandomForestModel(trees, meta["n_classes"])
        elif model_type == "gradient_boost":
            trees = [
                [_tree_from_arrays(f"r{i}c{c}", bundle) for c in range(meta["n_classes"])]
                for i in range(meta["n_rounds"])
            ]
            model = GradientBoostModel(trees, meta["learning_rate"], meta["n_classes"])
        elif model_type == "linear_svm":
            model = LinearSvmModel(bundle["weights"], bundle["biases"])
        else:
            raise BadArgsError(f"unknown model type {model_type!r}")
    return TrainedModel(
        ClassifierSpec.from_dict(meta["spec"]),
        model,
        [record_from_dict(d) for d in meta["history"]],
        meta["best_epoch"],
    )
