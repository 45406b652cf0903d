"""Training loop with validation-based early stopping and checkpointing.

Optimisation is Adam on either the mean squared Euclidean distance (default,
smooth near zero) or the mean Euclidean distance. Early stopping tracks the
validation mean error in mm, the same quantity used for reporting, and the
returned model always carries the best-validation parameter snapshot.
"""

from __future__ import annotations

import json
import logging
import time
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import metrics
from .data import CsiDataset
from .errors import DataFormatError, DivergenceError, ManifestError, TruncationError, VersionError
from .network import (
    INIT_SCHEME,
    ModelConfig,
    PositioningNet,
    build,
    load_state_arrays,
    predict_positions,
    state_arrays,
)

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "csipos-checkpoint"
CHECKPOINT_VERSION = 1

LOSSES = ("squared-euclidean", "euclidean")


@dataclass
class TrainConfig:
    """Optimiser and stopping hyperparameters."""

    loss: str = "squared-euclidean"
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    target_val_error_mm: float | None = None
    num_threads: int | None = None

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class TrainHistory:
    """Per-epoch training record."""

    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_error_mm: list = field(default_factory=list)
    wall_time_s: list = field(default_factory=list)

    def __len__(self):
        return len(self.train_loss)

    def to_dict(self) -> dict:
        return {
            "train_loss": list(self.train_loss),
            "val_loss": list(self.val_loss),
            "val_error_mm": list(self.val_error_mm),
            "wall_time_s": list(self.wall_time_s),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainHistory":
        return cls(
            train_loss=list(d["train_loss"]),
            val_loss=list(d["val_loss"]),
            val_error_mm=list(d["val_error_mm"]),
            wall_time_s=list(d["wall_time_s"]),
        )


def batch_loss(pred: torch.Tensor, target: torch.Tensor, loss: str) -> torch.Tensor:
    diff = pred - target
    if loss == "squared-euclidean":
        return diff.pow(2).sum(dim=1).mean()
    return diff.pow(2).sum(dim=1).sqrt().mean()


def dataset_loss(model, dataset: CsiDataset, loss: str, batch_size: int = 256) -> float:
    """Loss over a dataset in inference mode (frozen batch-norm statistics)."""
    dtype = next(model.parameters()).dtype
    was_training = model.training
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(dataset), batch_size):
            X = torch.as_tensor(dataset.features[start : start + batch_size]).to(dtype)
            y = torch.as_tensor(dataset.labels[start : start + batch_size]).to(dtype)
            total += float(batch_loss(model(X), y, loss)) * len(y)
            count += len(y)
    if was_training:
        model.train()
    return total / count


def evaluate(model, dataset: CsiDataset) -> float:
    """Mean Euclidean error in mm over a dataset."""
    est = predict_positions(model, dataset.features)
    return metrics.mean_error(est, dataset.labels)


def train(model: PositioningNet, train_data: CsiDataset, val_data: CsiDataset, config: TrainConfig):
    """Train in place; returns (model at best-validation snapshot, history).

    Deterministic given data, config seed, and a fixed torch thread count.
    Raises DivergenceError (with the epoch index) if the loss leaves the
    finite range.
    """
    if len(train_data) == 0 or len(val_data) == 0:
        raise ValueError("train and validation splits must be non-empty")
    if config.num_threads:
        torch.set_num_threads(int(config.num_threads))

    history = TrainHistory()
    best_state = state_arrays(model)
    best_err = float("inf")
    stale = 0

    X = torch.as_tensor(train_data.features)
    y = torch.as_tensor(train_data.labels).to(torch.float32)
    order_rng = np.random.default_rng(config.seed)
    optimiser = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        model.train()
        perm = order_rng.permutation(len(train_data))
        epoch_loss, seen = 0.0, 0
        for start in range(0, len(perm), config.batch_size):
            idx = perm[start : start + config.batch_size]
            optimiser.zero_grad()
            loss = batch_loss(model(X[idx]), y[idx], config.loss)
            if not torch.isfinite(loss):
                raise DivergenceError(epoch)
            loss.backward()
            optimiser.step()
            epoch_loss += float(loss.detach()) * len(idx)
            seen += len(idx)

        val_loss = dataset_loss(model, val_data, config.loss)
        val_err = evaluate(model, val_data)
        if not (np.isfinite(val_loss) and np.isfinite(val_err)):
            raise DivergenceError(epoch)
        history.train_loss.append(epoch_loss / seen)
        history.val_loss.append(val_loss)
        history.val_error_mm.append(val_err)
        history.wall_time_s.append(time.perf_counter() - t0)
        logger.info(
            "epoch=%d train_loss=%.6g val_loss=%.6g val_mm=%.6g",
            epoch, history.train_loss[-1], val_loss, val_err,
        )

        if val_err < best_err:
            best_err = val_err
            best_state = state_arrays(model)
            stale = 0
        else:
            stale += 1
        if config.target_val_error_mm is not None and best_err < config.target_val_error_mm:
            break
        if stale >= config.patience:
            break

    load_state_arrays(model, best_state)
    return model, history


def save_checkpoint(model: PositioningNet, history: TrainHistory, path, extra: dict | None = None) -> None:
    """Write a checkpoint directory: manifest.json + weights.npz, bit-exact."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": model.config.to_dict(),
        "init_seed": int(getattr(model, "init_seed", 0)),
        "init_scheme": INIT_SCHEME,
        "history": history.to_dict(),
        "extra": extra or {},
    }
    arrays = state_arrays(model)
    np.savez(path / "weights.npz", **arrays)
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")


def read_checkpoint_manifest(path) -> dict:
    manifest_path = Path(path) / "manifest.json"
    if not manifest_path.is_file():
        raise ManifestError(f"no manifest.json under {path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestError(f"unreadable checkpoint manifest under {path}: {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("format") != CHECKPOINT_FORMAT:
        raise ManifestError(f"{manifest_path} is not a {CHECKPOINT_FORMAT} manifest")
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise VersionError(
            f"checkpoint version {manifest.get('version')!r}, this reader handles {CHECKPOINT_VERSION}"
        )
    return manifest


def load_checkpoint(path):
    """Read a checkpoint back: (model with stored weights, history)."""
    path = Path(path)
    manifest = read_checkpoint_manifest(path)
    try:
        config = ModelConfig.from_dict(manifest["model_config"])
        history = TrainHistory.from_dict(manifest["history"])
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"checkpoint manifest lacks required keys: {exc}") from exc
    weights_path = path / "weights.npz"
    if not weights_path.is_file():
        raise TruncationError(f"missing weights file {weights_path}")
    try:
        with np.load(weights_path) as archive:
            arrays = {k: archive[k] for k in archive.files}
    except (zipfile.BadZipFile, OSError, ValueError, EOFError) as exc:
        raise TruncationError(f"unreadable weights file {weights_path}: {exc}") from exc
    model = build(config, seed=manifest.get("init_seed", 0))
    try:
        load_state_arrays(model, arrays)
    except (RuntimeError, KeyError) as exc:
        raise DataFormatError(f"weights do not match the stored model config: {exc}") from exc
    return model, history
