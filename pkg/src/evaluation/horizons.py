"""
Per-horizon error metrics and the zero-velocity baseline.

Horizons are 1-based frame indices into the K predicted frames; every error
is taken at that frame alone, not accumulated over earlier frames. Inputs are
arrays (or Tensors) in the model layout [B, 3, V, K].
"""

from typing import List, Optional, Sequence

import numpy as np

from errors import HorizonError, ShapeError
from evaluation.rotations import expmap_to_euler


def _array(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), dtype=np.float64)


def _check(pred: np.ndarray, target: np.ndarray, horizons: Sequence[int]) -> None:
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ")
    if pred.ndim != 4 or pred.shape[1] != 3:
        raise ShapeError(f"expected [B, 3, V, K], got {pred.shape}", axis="C")
    K = pred.shape[3]
    bad = [h for h in horizons if not 1 <= h <= K]
    if bad:
        raise HorizonError(f"horizons {bad} outside [1, {K}]")


def horizon_milliseconds(horizons: Sequence[int], fps: int) -> List[float]:
    if fps <= 0:
        raise HorizonError(f"fps must be positive, got {fps}")
    return [h * 1000.0 / fps for h in horizons]


def mpjpe_at_horizons(pred, target, horizons: Sequence[int], fps: int = 25) -> List[float]:
    """Mean joint Euclidean error at each horizon frame. `fps` only validates the frame rate."""
    pred, target = _array(pred), _array(target)
    _check(pred, target, horizons)
    horizon_milliseconds(horizons, fps)
    return [
        float(np.mean(np.linalg.norm(pred[..., h - 1] - target[..., h - 1], axis=1)))
        for h in horizons
    ]


def mae_at_horizons(
    pred,
    target,
    horizons: Sequence[int],
    degrees: bool = False,
    joints: Optional[Sequence[int]] = None,
) -> List[float]:
    """
    Mean absolute Euler-angle difference at each horizon frame, over batch,
    joints and the 3 angle components. Both operands are rotation vectors;
    `joints` restricts the mean to a subset of the joint axis.
    """
    pred, target = _array(pred), _array(target)
    _check(pred, target, horizons)
    if joints is not None:
        pred, target = pred[:, :, list(joints)], target[:, :, list(joints)]
    values = []
    for h in horizons:
        # [B, 3, V] -> [B, V, 3]
        a = expmap_to_euler(np.moveaxis(pred[..., h - 1], 1, -1))
        b = expmap_to_euler(np.moveaxis(target[..., h - 1], 1, -1))
        err = float(np.mean(np.abs(a - b)))
        values.append(float(np.degrees(err)) if degrees else err)
    return values


def zero_velocity_baseline(X_in, K: int) -> np.ndarray:
    """Repeat the last observed frame K times: [B, 3, V, T] -> [B, 3, V, K]."""
    X = _array(X_in)
    if X.ndim != 4 or X.shape[3] < 1:
        raise ShapeError(f"expected [B, 3, V, T] with T >= 1, got {X.shape}", axis="T")
    if K < 1:
        raise HorizonError(f"K must be >= 1, got {K}")
    return np.repeat(X[..., -1:], K, axis=-1)
