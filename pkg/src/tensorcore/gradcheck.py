"""
Finite-difference gradient checking.

Compares tape gradients against central differences. Run it in float64: the
central-difference error of a float32 model swamps a 1e-4 tolerance.
"""

from typing import Callable, Optional, Sequence

import numpy as np
import structlog

from errors import GradCheckError
from tensorcore.tensor import Tape, Tensor, zero_grad

logger = structlog.get_logger()

ModelFn = Callable[[], Tensor]


def _evaluate(model_fn: ModelFn) -> float:
    value = model_fn().item()
    if not np.isfinite(value):
        raise GradCheckError(f"model_fn returned a non-finite loss ({value})")
    return value


def numerical_gradient(model_fn: ModelFn, tensor: Tensor, index: tuple, eps: float) -> float:
    """Central difference of model_fn with respect to one entry of `tensor`."""
    flat = tensor.data.reshape(-1)
    pos = int(np.ravel_multi_index(index, tensor.shape)) if tensor.ndim else 0
    original = flat[pos]
    try:
        flat[pos] = original + eps
        plus = _evaluate(model_fn)
        flat[pos] = original - eps
        minus = _evaluate(model_fn)
    finally:
        flat[pos] = original
    return (plus - minus) / (2.0 * eps)


def grad_check(
    model_fn: ModelFn,
    params: Sequence[Tensor],
    eps: float = 1e-6,
    samples_per_param: Optional[int] = 16,
    seed: int = 0,
) -> float:
    """
    Return max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over
    sampled entries of every tensor in `params`.

    `model_fn` takes no arguments and must be deterministic; it reads the
    parameter tensors it closes over. Entries are sampled without replacement
    (all entries when the tensor is small or `samples_per_param` is None).
    """
    if not eps > 0:
        raise GradCheckError(f"eps must be positive, got {eps}")

    zero_grad(params)
    with Tape() as tape:
        loss = model_fn()
    if not np.isfinite(loss.item()):
        raise GradCheckError(f"model_fn returned a non-finite loss ({loss.item()})")
    tape.backward(loss)
    analytic = [p.grad.copy() for p in params]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, grad in zip(params, analytic):
        flat_positions = np.arange(p.size)
        if samples_per_param is not None and p.size > samples_per_param:
            flat_positions = rng.choice(p.size, size=samples_per_param, replace=False)
        for pos in flat_positions:
            index = np.unravel_index(int(pos), p.shape) if p.ndim else ()
            a = float(grad[index])
            n = numerical_gradient(model_fn, p, index, eps)
            err = abs(a - n) / max(abs(a), abs(n), 1e-8)
            worst = max(worst, err)

    logger.info("grad_check_completed", tensors=len(params), max_relative_error=worst, eps=eps)
    return worst
