"""Epoch loop with plateau learning-rate halving and early stopping.

Both mechanisms watch validation accuracy. Improvement is strict
(new > best + delta, delta defaulting to 0): ties count as stagnation.
The scheduler halves the learning rate after `lr_halving_patience`
consecutive stagnant epochs and then resets its own counter; the early
stopper ends training after `early_stop_patience` stagnant epochs. The two
counters are independent: a halving does not placate the stopper. On exit
(stop or max_epochs) the model is restored to its best-validation-accuracy
snapshot.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import BadArgsError
from .models.mlp import MlpModel, evaluate, loss_and_grads

IMPROVEMENT_METRIC = "validation_accuracy"


@dataclass(frozen=True)
class TrainConfig:
    initial_lr: float = 1e-3
    lr_halving_patience: int = 3
    early_stop_patience: int = 10
    max_epochs: int = 200
    min_improvement_delta: float = 0.0

    def __post_init__(self) -> None:
        if self.initial_lr <= 0:
            raise BadArgsError("initial_lr must be > 0")
        if self.lr_halving_patience < 1 or self.early_stop_patience < 1:
            raise BadArgsError("patience values must be >= 1")
        if self.max_epochs < 1:
            raise BadArgsError("max_epochs must be >= 1")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    validation_loss: float | None
    validation_accuracy: float | None
    learning_rate: float  # in effect during this epoch's updates
    events: tuple[str, ...]  # subset of {"improved", "halved", "stopped"}


def record_to_dict(r: EpochRecord) -> dict:
    return {
        "epoch": r.epoch,
        "train_loss": r.train_loss,
        "train_accuracy": r.train_accuracy,
        "validation_loss": r.validation_loss,
        "validation_accuracy": r.validation_accuracy,
        "learning_rate": r.learning_rate,
        "events": list(r.events),
    }


def record_from_dict(d: dict) -> EpochRecord:
    return EpochRecord(
        epoch=d["epoch"],
        train_loss=d["train_loss"],
        train_accuracy=d["train_accuracy"],
        validation_loss=d["validation_loss"],
        validation_accuracy=d["validation_accuracy"],
        learning_rate=d["learning_rate"],
        events=tuple(d["events"]),
    )


def history_to_csv(history: list[EpochRecord], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["epoch", "lr", "train_loss", "train_acc", "val_loss", "val_acc", "events"]
        )
        for r in history:
            writer.writerow(
                [
                    r.epoch,
                    repr(r.learning_rate),
                    repr(r.train_loss),
                    repr(r.train_accuracy),
                    "" if r.validation_loss is None else repr(r.validation_loss),
                    "" if r.validation_accuracy is None else repr(r.validation_accuracy),
                    "|".join(r.events),
                ]
            )
    return path


@dataclass(frozen=True)
class SchedulerState:
    """Plateau tracker: halve the lr after `patience` stagnant epochs."""

    lr: float
    best: float = -np.inf
    stagnant: int = 0
    halvings: int = 0


def scheduler_step(
    state: SchedulerState,
    validation_accuracy: float,
    patience: int = 3,
    delta: float = 0.0,
) -> tuple[SchedulerState, bool]:
    """Advance one epoch; returns (new state, whether the lr was halved)."""
    if validation_accuracy > state.best + delta:
        return replace(state, best=validation_accuracy, stagnant=0), False
    stagnant = state.stagnant + 1
    if stagnant >= patience:
        return (
            replace(state, lr=state.lr / 2.0, stagnant=0, halvings=state.halvings + 1),
            True,
        )
    return replace(state, stagnant=stagnant), False


@dataclass(frozen=True)
class EarlyStopState:
    """Stop tracker: remember the best epoch, give up after `patience`."""

    best: float = -np.inf
    best_epoch: int = 0
    epoch: int = 0
    stagnant: int = 0


def early_stop_check(
    state: EarlyStopState,
    validation_accuracy: float,
    patience: int = 10,
    delta: float = 0.0,
) -> tuple[EarlyStopState, bool]:
    """Advance one epoch; returns (new state, whether to stop now).

    When stopping, state.best_epoch identifies the snapshot to restore.
    """
    epoch = state.epoch + 1
    if validation_accuracy > state.best + delta:
        return (
            replace(
                state, best=validation_accuracy, best_epoch=epoch, epoch=epoch, stagnant=0
            ),
            False,
        )
    stagnant = state.stagnant + 1
    return replace(state, epoch=epoch, stagnant=stagnant), stagnant >= patience


def train_loop(
    model: MlpModel,
    train_x: np.ndarray,
    train_y: np.ndarray,
    validation_x: np.ndarray,
    validation_y: np.ndarray,
    config: TrainConfig,
    seed: int = 0,
    momentum: float = 0.9,
    batch_size: int = 64,
) -> tuple[list[EpochRecord], int]:
    """Momentum-SGD epochs under the scheduler/early-stopping regime.

    Mutates `model` in place, leaving it at the best-validation snapshot.
    Returns (history, best_epoch). Deterministic given the seed.
    """
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    n = len(train_x)
    velocity_w = [np.zeros_like(w) for w in model.weights]
    velocity_b = [np.zeros_like(b) for b in model.biases]

    sched = SchedulerState(lr=config.initial_lr)
    stopper = EarlyStopState()
    best_weights, best_biases = model.copy_params()
    best_epoch = 0
    history: list[EpochRecord] = []

    for epoch in range(1, config.max_epochs + 1):
        lr = sched.lr
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = perm[start:start + batch_size]
            _, grads_w, grads_b = loss_and_grads(
                model, train_x[batch], train_y[batch], rng
            )
            for i in range(len(model.weights)):
                velocity_w[i] = momentum * velocity_w[i] - lr * grads_w[i]
                velocity_b[i] = momentum * velocity_b[i] - lr * grads_b[i]
                model.weights[i] += velocity_w[i]
                model.biases[i] += velocity_b[i]

        train_loss, train_acc = evaluate(model, train_x, train_y)
        val_loss, val_acc = evaluate(model, validation_x, validation_y)

        events: list[str] = []
        improved = val_acc > stopper.best + config.min_improvement_delta
        if improved:
            events.append("improved")
            best_weights, best_biases = model.copy_params()
            best_epoch = epoch

        sched, halved = scheduler_step(
            sched, val_acc, config.lr_halving_patience, config.min_improvement_delta
        )
        if halved:
            events.append("halved")
        stopper, stop = early_stop_check(
            stopper, val_acc, config.early_stop_patience, config.min_improvement_delta
        )
        if stop:
            events.append("stopped")

        history.append(
            EpochRecord(
                epoch=epoch,
                train_loss=train_loss,
                train_accuracy=train_acc,
                validation_loss=val_loss,
                validation_accuracy=val_acc,
                learning_rate=lr,
                events=tuple(events),
            )
        )
        if stop:
            break

    model.set_params(best_weights, best_biases)
    return history, best_epoch
