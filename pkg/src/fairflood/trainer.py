"""Training loop for the fair and baseline variants.

Fixed-epoch training with per-epoch seeded shuffling, a single Adam over
all parameter groups, and a plateau scheduler monitoring the epoch-mean
task loss. The trainer only ever sees the training split; standardization
is fit on it if not already present.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import fit_standardization
from .errors import DataError, NumericError
from .fairness import fairness_report, performance_metrics
from .model import (VARIANT_BASELINE, VARIANT_FAIR, ModelConfig, init_model,
                    predict, set_output_level, training_step)
from .nn import Adam, PlateauScheduler, RngStreams

__all__ = ["TrainConfig", "EpochStats", "TrainingLog", "train", "evaluate",
           "EvalResult"]

LOG_CSV_COLUMNS = ("epoch", "task_loss", "adv_loss", "total_loss", "lr",
                   "adv_accuracy", "seconds")


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 1e-5
    lam: float = 1.0
    scheduler_factor: float = 0.5
    scheduler_patience: int = 10
    min_lr: float = 0.0
    seed: int = 0
    variant: str = VARIANT_FAIR
    encoder_widths: tuple = (128, 128, 64)
    task_hidden: int = 128
    adversary_hidden: int = 128
    dropout: float = 0.3

    def validate(self):
        if self.epochs < 1 or self.batch_size < 2:
            raise DataError("epochs must be >= 1 and batch_size >= 2")
        if self.lr <= 0.0 or self.weight_decay < 0.0:
            raise DataError("lr must be positive and weight_decay non-negative")
        if self.lam < 0.0:
            raise DataError("lambda must be non-negative")
        if self.variant not in (VARIANT_FAIR, VARIANT_BASELINE):
            raise DataError(f"unknown variant {self.variant!r}")

    def model_config(self, n_districts):
        return ModelConfig(
            n_districts=n_districts,
            encoder_widths=tuple(self.encoder_widths),
            task_hidden=self.task_hidden,
            adversary_hidden=self.adversary_hidden,
            dropout=self.dropout,
            lam=self.lam,
        )

    def to_dict(self):
        return {
            "epochs": self.epochs, "batch_size": self.batch_size,
            "lr": self.lr, "weight_decay": self.weight_decay, "lam": self.lam,
            "scheduler_factor": self.scheduler_factor,
            "scheduler_patience": self.scheduler_patience,
            "min_lr": self.min_lr, "seed": self.seed, "variant": self.variant,
            "encoder_widths": list(self.encoder_widths),
            "task_hidden": self.task_hidden,
            "adversary_hidden": self.adversary_hidden,
            "dropout": self.dropout,
        }


@dataclass
class EpochStats:
    epoch: int
    task_loss: float
    adv_loss: float
    total_loss: float
    lr: float
    adv_accuracy: float
    seconds: float


@dataclass
class TrainingLog:
    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def column(self, name):
        return np.array([getattr(e, name) for e in self.entries])

    def signature(self):
        """Deterministic content: every logged number except wall-clock
        seconds, which necessarily varies between runs."""
        return [(e.epoch, e.task_loss, e.adv_loss, e.total_loss, e.lr,
                 e.adv_accuracy) for e in self.entries]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(LOG_CSV_COLUMNS)
            for e in self.entries:
                writer.writerow([e.epoch, repr(e.task_loss), repr(e.adv_loss),
                                 repr(e.total_loss), repr(e.lr),
                                 repr(e.adv_accuracy), repr(e.seconds)])

    def to_json(self, path):
        payload = [e.__dict__ for e in self.entries]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)


def _batches(perm, batch_size):
    """Contiguous index batches; a trailing singleton is merged into the
    previous batch because batchnorm needs at least 2 rows."""
    chunks = [perm[i:i + batch_size] for i in range(0, len(perm), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def train(dataset, config):
    """Train a model on the given (training) split and return it with the
    per-epoch log. Deterministic given (dataset, config)."""
    config.validate()
    n = len(dataset)
    if n < 2:
        raise DataError("training requires at least 2 rows")

    if dataset.standardization is None:
        dataset.standardization = fit_standardization(dataset)
    x = dataset.standardization.apply(dataset.feature_matrix())
    y = dataset.targets()
    s = dataset.district_indices()

    streams = RngStreams(config.seed)
    model = init_model(config.model_config(dataset.n_districts), streams,
                       variant=config.variant)
    model.standardization = dataset.standardization
    model.district_labels = list(dataset.district_labels)
    model.train_upazila_ids = dataset.upazila_ids()
    y_sd = float(y.std())
    model.output_scale = y_sd if y_sd > 0.0 else 1.0
    set_output_level(model, float(y.mean()) / model.output_scale)

    optimizer = Adam(model.parameters(), lr=config.lr,
                     weight_decay=config.weight_decay)
    scheduler = PlateauScheduler(config.lr, factor=config.scheduler_factor,
                                 patience=config.scheduler_patience,
                                 min_lr=config.min_lr)
    shuffle_rng = streams.stream("shuffle")

    log = TrainingLog()
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        perm = shuffle_rng.permutation(n)
        sums = np.zeros(3)  # task, adv, accuracy, row-weighted
        rows = 0
        for step_idx, batch in enumerate(_batches(perm, config.batch_size)):
            out = training_step(model, x[batch], y[batch], s[batch],
                                optimizer, lam=model.lam)
            if not (np.isfinite(out.task_loss) and np.isfinite(out.adv_loss)):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, step {step_idx + 1} "
                    f"(task={out.task_loss!r}, adv={out.adv_loss!r})")
            b = len(batch)
            sums += b * np.array([out.task_loss, out.adv_loss, out.adv_accuracy])
            rows += b
        task_mean, adv_mean, acc_mean = sums / rows
        lr_used = optimizer.lr
        optimizer.lr = scheduler.step(task_mean)
        log.entries.append(EpochStats(
            epoch=epoch, task_loss=float(task_mean), adv_loss=float(adv_mean),
            total_loss=float(task_mean - model.lam * adv_mean), lr=float(lr_used),
            adv_accuracy=float(acc_mean),
            seconds=time.perf_counter() - started))
    return model, log


@dataclass
class EvalResult:
    performance: object
    fairness: object
    predictions: np.ndarray
    leakage: bool | None

    def to_dict(self):
        return {
            "performance": self.performance.to_dict(),
            "fairness": self.fairness.to_dict(),
            "leakage_warning": self.leakage,
        }


def evaluate(model, dataset):
    """Predict once and compute performance plus fairness reports.

    ``leakage`` flags whether any evaluated row was part of the model's
    training split (None when the checkpoint predates training)."""
    missing = [d for d in set(dataset.districts())
               if d not in set(model.district_labels)]
    if missing:
        raise DataError(
            f"dataset districts not covered by the checkpoint: {sorted(missing)}")
    preds = predict(model, dataset)
    leakage = None
    if model.train_upazila_ids is not None:
        train_ids = set(model.train_upazila_ids)
        leakage = any(uid in train_ids for uid in dataset.upazila_ids())
    return EvalResult(
        performance=performance_metrics(dataset.targets(), preds),
        fairness=fairness_report(dataset.targets(), preds,
                                 dataset.districts(), dataset.haor_flags()),
        predictions=preds,
        leakage=leakage,
    )
