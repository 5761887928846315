"""Seeded, deterministic training loop."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..dataset.preprocess import PairSet
from .losses import bce_logits
from .model import ALL_MODALITIES, DEFAULT_LAMBDA, IMAGE_MODALITIES, Batch, ModelSpec, MvaeModel
from .optim import AdamState, adam_step


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    anneal_epochs: int = 50
    lambdas: dict = field(default_factory=lambda: dict(DEFAULT_LAMBDA))
    seed: int = 0
    latent_dim: int = 16
    hidden: tuple = (256, 128)
    mode: str = "final_step"
    k: int = 1
    conditioned: bool = False
    modalities: tuple = ALL_MODALITIES
    resolution: int = 16
    max_pairs: int | None = 8
    recon: str = "sum"
    crop: bool = False
    split_fraction: float = 0.8
    accel_scale: float = 10.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.anneal_epochs < 1:
            raise ValueError("anneal_epochs must be >= 1")
        if self.mode not in ("final_step", "fixed_step"):
            raise ValueError(f"unknown mode {self.mode!r}")
        self.hidden = tuple(int(h) for h in self.hidden)
        self.modalities = tuple(self.modalities)

    def model_spec(self, dims: dict, cond_dim: int = 0) -> ModelSpec:
        return ModelSpec(self.modalities, {m: dims[m] for m in self.modalities}, self.latent_dim,
                         self.hidden, cond_dim if self.conditioned else 0,
                         {m: float(self.lambdas[m]) for m in self.modalities}, self.recon)


def beta_schedule(epoch: int, anneal_epochs: int) -> float:
    if anneal_epochs < 1:
        raise ValueError("anneal_epochs must be >= 1")
    return min(1.0, max(0.0, epoch / anneal_epochs))


def input_dims(pairs: PairSet) -> dict:
    return {m: pairs.inputs[m].shape[1] for m in ALL_MODALITIES}


def reconstruction_bce(model: MvaeModel, pairs: PairSet) -> dict:
    """Mean BCE of mean-mode predictions from all available inputs, per image modality."""
    inputs = {m: pairs.inputs[m] for m in model.spec.modalities}
    avail = {m: pairs.available[m] for m in model.spec.modalities}
    pred = model.predict(inputs, pairs.condition, available=avail, allow_prior=True)
    return {m: bce_logits(pred[m + "_logits"], pairs.targets[m])
            for m in IMAGE_MODALITIES if m in model.spec.modalities}


def _mean_loss(model, pairs, beta, rng):
    eps = rng.standard_normal((len(pairs), model.latent_dim))
    return model.subset_loss(Batch.from_pairs(pairs), beta, eps).loss


@dataclass
class TrainResult:
    curve: list
    opt: AdamState
    seconds: float = 0.0


def train(model: MvaeModel, train_set: PairSet, cfg: TrainConfig, val_set: PairSet | None = None,
          opt: AdamState | None = None, start_epoch: int = 0, log=None) -> TrainResult:
    """Train for ``cfg.epochs`` epochs starting at ``start_epoch``.

    Each epoch draws its shuffle and noise from ``default_rng([seed, epoch])``
    so that resuming from a checkpoint replays exactly.  The curve holds one
    row per epoch (1-based ``epoch``).
    """
    if len(train_set) == 0:
        raise ValueError("empty training set")
    opt = AdamState() if opt is None else opt
    curve = []
    t0 = time.perf_counter()
    n = len(train_set)
    for epoch in range(start_epoch, start_epoch + cfg.epochs):
        beta = beta_schedule(epoch, cfg.anneal_epochs)
        rng = np.random.default_rng([cfg.seed, epoch])
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for b, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = order[lo:lo + cfg.batch_size]
            batch = Batch.from_pairs(train_set, idx)
            eps = rng.standard_normal((len(idx), model.latent_dim))
            out, grads = model.loss_and_grads(batch, beta, eps)
            if not np.isfinite(out.loss):
                raise TrainingError(f"non-finite loss at epoch {epoch + 1}, batch {b}")
            if not adam_step(model.params, grads, opt, cfg.lr):
                raise TrainingError(f"non-finite gradient at epoch {epoch + 1}, batch {b}")
            total += out.loss * len(idx)
            seen += len(idx)
        row = {"epoch": epoch + 1, "beta": beta, "train_loss": total / seen}
        if val_set is not None and len(val_set):
            vrng = np.random.default_rng([cfg.seed, epoch, 1])
            row["val_loss"] = _mean_loss(model, val_set, beta, vrng)
            for m, v in reconstruction_bce(model, val_set).items():
                row[f"val_bce_{m}"] = v
        curve.append(row)
        if log is not None:
            log(row)
    return TrainResult(curve, opt, time.perf_counter() - t0)
