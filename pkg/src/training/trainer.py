"""
End-to-end training loop.

One Adam step per mini-batch, epoch learning rate from lr_at_epoch, and
best-model selection on validation loss (training loss when no validation
windows are given). Runs are deterministic for a given seed: initialization
uses model.seed and the shuffle order uses train.seed.
"""

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import structlog

import metrics
from config import ModelConfig, TrainConfig
from errors import DivergenceError, ShapeError, WindowError
from model.network import forward
from model.params import ModelParams, init_params
from posedata.windows import WindowSet
from tensorcore.tensor import Tape, Tensor
from training.losses import LOSSES, LossFn
from training.optimizer import AdamState, adam_step, lr_at_epoch

logger = structlog.get_logger()


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    seconds: float


@dataclass
class TrainReport:
    epochs: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    monotone_after_warmup: bool = True

    @property
    def train_losses(self) -> List[float]:
        return [e.train_loss for e in self.epochs]

    @property
    def final_train_loss(self) -> float:
        return self.epochs[-1].train_loss

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_loss", "lr", "seconds"])
        for e in self.epochs:
            writer.writerow([e.epoch, repr(e.train_loss), repr(e.val_loss), repr(e.lr), f"{e.seconds:.3f}"])
        return buffer.getvalue()

    def write_csv(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def _check_windows(model_cfg: ModelConfig, windows: WindowSet, label: str) -> None:
    expected = (model_cfg.joints, model_cfg.input_frames, model_cfg.output_frames)
    found = (windows.num_joints, windows.input_frames, windows.output_frames)
    if found != expected:
        raise ShapeError(f"{label} windows have V/T/K={found}, model expects {expected}")


def _batch_tensors(windows: WindowSet, index: np.ndarray, dtype: np.dtype) -> Tuple[Tensor, Tensor]:
    return (
        Tensor(windows.inputs[index].astype(dtype, copy=False)),
        Tensor(windows.targets[index].astype(dtype, copy=False)),
    )


def evaluate_loss(params: ModelParams, windows: WindowSet, loss_fn: LossFn, batch_size: int = 256) -> float:
    """Window-weighted mean loss in eval mode, no tape."""
    dtype = np.dtype(params.config.dtype)
    total = 0.0
    for index in windows.batches(batch_size):
        X, Y = _batch_tensors(windows, index, dtype)
        total += loss_fn(forward(params, X, train_mode=False), Y).item() * len(index)
    return total / len(windows)


def _is_monotone(losses: List[float]) -> bool:
    return all(b <= a for a, b in zip(losses, losses[1:]))


def train(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    windows: WindowSet,
    val_windows: Optional[WindowSet] = None,
) -> Tuple[ModelParams, TrainReport]:
    if len(windows) == 0:
        raise WindowError("cannot train on an empty window set")
    _check_windows(model_cfg, windows, "training")
    if val_windows is not None and len(val_windows) == 0:
        val_windows = None
    if val_windows is not None:
        _check_windows(model_cfg, val_windows, "validation")
    train_cfg.validate()

    params = init_params(model_cfg, model_cfg.seed)
    state = AdamState.for_params(params.tensors, train_cfg.beta1, train_cfg.beta2, train_cfg.adam_eps)
    loss_fn = LOSSES[train_cfg.loss]
    rng = np.random.default_rng(train_cfg.seed)
    dtype = np.dtype(model_cfg.dtype)

    report = TrainReport()
    best_value = math.inf
    best_snapshot = params.snapshot()

    logger.info(
        "training_started",
        variant=model_cfg.variant.value,
        windows=len(windows),
        val_windows=len(val_windows) if val_windows is not None else 0,
        epochs=train_cfg.epochs,
        batch_size=train_cfg.batch_size,
        parameters=params.num_parameters(),
    )

    for epoch in range(1, train_cfg.epochs + 1):
        lr = lr_at_epoch(train_cfg, epoch)
        metrics.LEARNING_RATE.set(lr)
        started = time.perf_counter()
        total = 0.0

        order_rng = rng if train_cfg.shuffle else None
        for batch, index in enumerate(windows.batches(train_cfg.batch_size, order_rng), start=1):
            X, Y = _batch_tensors(windows, index, dtype)
            params.zero_grad()
            with Tape() as tape:
                loss = loss_fn(forward(params, X, train_mode=True), Y)
            value = loss.item()
            if not math.isfinite(value):
                metrics.ERRORS.labels(component="training").inc()
                raise DivergenceError(epoch, batch, value)
            tape.backward(loss)
            adam_step(params.tensors, {name: t.grad for name, t in params.named_parameters()}, state, lr)
            total += value * len(index)
            metrics.BATCHES_PROCESSED.inc()
            logger.debug("batch_completed", epoch=epoch, batch=batch, loss=value)

        train_loss = total / len(windows)
        val_loss = evaluate_loss(params, val_windows, loss_fn, train_cfg.batch_size) if val_windows is not None else math.nan
        selection = val_loss if val_windows is not None else train_loss
        if selection < best_value:
            best_value = selection
            best_snapshot = params.snapshot()
            report.best_epoch = epoch

        seconds = time.perf_counter() - started
        report.epochs.append(EpochRecord(epoch, train_loss, val_loss, lr, seconds))
        metrics.EPOCHS_COMPLETED.inc()
        metrics.TRAIN_LOSS.set(train_loss)
        if val_windows is not None:
            metrics.VALIDATION_LOSS.set(val_loss)
        logger.info("epoch_completed", epoch=epoch, train_loss=train_loss, val_loss=val_loss, lr=lr, seconds=round(seconds, 3))

    after_warmup = report.train_losses[train_cfg.warmup_epochs:]
    report.monotone_after_warmup = _is_monotone(after_warmup)
    if not report.monotone_after_warmup:
        logger.warning("train_loss_not_monotone", warmup_epochs=train_cfg.warmup_epochs, losses=after_warmup)

    params.restore(best_snapshot)
    logger.info("training_completed", best_epoch=report.best_epoch, best_loss=best_value)
    return params, report
