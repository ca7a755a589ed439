"""
Training losses over the K predicted frames, normalized by V*K and averaged
over the batch.

  mpjpe   mean Euclidean distance per joint and frame (coords3d)
  mae     per joint and frame, the sum of the 3 absolute angle differences (expmap)
"""

from typing import Callable, Dict

from errors import ShapeError
from tensorcore.ops import absolute, joint_norm, mean_all, scale, sub, sum_all
from tensorcore.tensor import Tensor

LossFn = Callable[[Tensor, Tensor], Tensor]


def _check(pred: Tensor, target: Tensor) -> None:
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ")
    if pred.ndim != 4 or pred.shape[1] != 3:
        raise ShapeError(f"losses expect [B, 3, V, K], got {pred.shape}", axis="C")


def loss_mpjpe(pred: Tensor, target: Tensor) -> Tensor:
    _check(pred, target)
    return mean_all(joint_norm(sub(pred, target), axis=1))


def loss_mae(pred: Tensor, target: Tensor) -> Tensor:
    _check(pred, target)
    B, _, V, K = pred.shape
    return scale(sum_all(absolute(sub(pred, target))), 1.0 / (B * V * K))


LOSSES: Dict[str, LossFn] = {
    "mpjpe": loss_mpjpe,
    "mae": loss_mae,
}
