"""
Mini-batch SGD training with validation-based early stopping.

- Loss: MSE on (normalized) targets
- Each epoch shuffles the training pairs with a generator seeded from cfg.seed
- Validation MSE is computed in eval mode after every epoch
- The weights of the best validation epoch are restored at the end
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from backend.src.core.errors import ModelError
from backend.src.utils.data_utils import write_tsv
from .model import CnnModel

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(0.01, gt=0)
    batch_size: int = Field(16, ge=1)
    max_epochs: int = Field(100, ge=1)
    # None disables early stopping (train for max_epochs, still restore the best epoch)
    patience: Optional[int] = Field(3, ge=1)
    seed: int = 0


class EarlyStopping:
    """Tracks the best validation loss and decides when patience has run out."""

    def __init__(self, patience: Optional[int]) -> None:
        self.patience = patience
        self.best_loss = np.inf
        self.best_epoch = 0
        self.best_state: Optional[List[np.ndarray]] = None
        self._stale = 0

    def update(self, epoch: int, val_loss: float, state_fn=None) -> bool:
        """Record one epoch; returns True when training should stop."""
        if val_loss < self.best_loss:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self.best_state = state_fn() if state_fn is not None else None
            self._stale = 0
        else:
            self._stale += 1
        return self.patience is not None and self._stale >= self.patience


@dataclass
class TrainingHistory:
    train_losses: List[float] = field(default_factory=list)
    val_losses: List[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    def rows(self):
        return [
            (epoch, tr, va)
            for epoch, (tr, va) in enumerate(zip(self.train_losses, self.val_losses), start=1)
        ]

    def write(self, path: Path | str) -> Path:
        return write_tsv(path, ("epoch", "train_mse", "val_mse"), self.rows(), float_format="{:.8f}")


def mse(model: CnnModel, images: np.ndarray, targets: np.ndarray, batch_size: int = 64) -> float:
    """Eval-mode mean squared error (targets already in model output units)."""
    total, count = 0.0, 0
    for start in range(0, images.shape[0], batch_size):
        out = model.forward(images[start : start + batch_size]).output.astype(np.float64)
        diff = out - targets[start : start + batch_size]
        total += float(np.sum(diff**2))
        count += diff.size
    return total / count


def _check_pairs(images: np.ndarray, targets: np.ndarray, what: str, dim: int) -> None:
    if images.shape[0] == 0:
        raise ModelError(f"{what} set is empty", code="invalid-input")
    if targets.ndim != 2 or targets.shape[0] != images.shape[0] or targets.shape[1] != dim:
        raise ModelError(
            f"{what} targets have shape {targets.shape}, expected ({images.shape[0]}, {dim})",
            code="invalid-input",
        )


def train(
    model: CnnModel,
    train_images: np.ndarray,
    train_targets: np.ndarray,
    val_images: np.ndarray,
    val_targets: np.ndarray,
    cfg: TrainConfig = TrainConfig(),
    log_path: Optional[Path | str] = None,
) -> TrainingHistory:
    """
    Train in place. Targets are given in feature units; the model's
    target normalizer (if any) is applied before computing the loss.
    """
    dim = model.architecture.output_dim
    train_targets = np.asarray(train_targets, dtype=np.float64)
    val_targets = np.asarray(val_targets, dtype=np.float64)
    _check_pairs(train_images, train_targets, "Training", dim)
    _check_pairs(val_images, val_targets, "Validation", dim)
    if model.target_normalizer is not None:
        train_targets = model.target_normalizer.apply(train_targets)
        val_targets = model.target_normalizer.apply(val_targets)

    rng = np.random.default_rng(cfg.seed)
    stopper = EarlyStopping(cfg.patience)
    history = TrainingHistory()
    n = train_images.shape[0]

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        weighted = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            result = model.forward(train_images[batch], train_mode=True, rng=rng)
            loss, grads = model.backward(result, train_targets[batch])
            if not np.isfinite(loss):
                raise ModelError(f"Training diverged at epoch {epoch} (loss={loss})", code="diverged")
            model.apply_gradients(grads, cfg.learning_rate)
            weighted += loss * batch.size

        train_loss = weighted / n
        val_loss = mse(model, val_images, val_targets)
        if not np.isfinite(val_loss):
            raise ModelError(f"Training diverged at epoch {epoch} (val_mse={val_loss})", code="diverged")
        history.train_losses.append(train_loss)
        history.val_losses.append(val_loss)
        logger.info("Epoch %d/%d: train_mse=%.6f val_mse=%.6f", epoch, cfg.max_epochs, train_loss, val_loss)

        history.stopped_epoch = epoch
        if stopper.update(epoch, val_loss, model.copy_parameters):
            logger.info("Early stopping at epoch %d (best epoch %d)", epoch, stopper.best_epoch)
            break

    history.best_epoch = stopper.best_epoch
    if stopper.best_state is not None:
        model.load_parameters(stopper.best_state)
    model.trained = True
    if log_path is not None:
        history.write(log_path)
    return history
