"""
Adam with bias-corrected moments, and the step learning-rate schedule.
"""

from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from config import TrainConfig
from errors import OptimizerError
from tensorcore.tensor import Tensor


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Mapping[str, Tensor], beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls(
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            m={name: np.zeros_like(t.data) for name, t in params.items()},
            v={name: np.zeros_like(t.data) for name, t in params.items()},
        )


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> None:
    """Update `params` and `state` in place. Nothing changes when a gradient is rejected."""
    if not lr > 0:
        raise OptimizerError(f"learning rate must be positive, got {lr}")
    for name, p in params.items():
        g = grads[name]
        if name not in state.m or state.m[name].shape != p.shape or g.shape != p.shape:
            raise OptimizerError(f"{name}: optimizer state, gradient and parameter shapes disagree")
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"{name}: non-finite gradient, step rejected")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.step
    bias2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads[name]
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """
    lr0 through epoch `decay_after`, then one decay step on entering the next
    epoch and another every `decay_every` epochs (defaults: 1-20 -> 0.01,
    21-25 -> 0.001, 26-30 -> 0.0001).
    """
    if epoch < 1:
        raise ValueError(f"epochs are numbered from 1, got {epoch}")
    steps = 0 if epoch <= cfg.decay_after else (epoch - cfg.decay_after - 1) // cfg.decay_every + 1
    return cfg.lr * cfg.decay_factor ** steps
