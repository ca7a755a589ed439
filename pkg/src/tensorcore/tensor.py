"""
Tensor and Tape.

A Tensor is a dense numpy array plus an optional gradient buffer. A Tape is an
ordered record of the differentiable operations executed while it is active;
`Tape.backward` replays that record in reverse.

Recording is opt-in: operations only record while a Tape is entered and at
least one operand requires gradients. Everything outside a tape is a plain
forward computation, which is what inference uses. The active tape lives in a
ContextVar so concurrent inference threads never see a training tape.

Backward policy: `backward` consumes the tape (a second call raises
TapeError) and *accumulates* into `.grad`, so gradients persist across tapes
until `zero_grad` is called.
"""

from contextvars import ContextVar, Token
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from errors import ShapeError, TapeError

logger = structlog.get_logger()

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_ACTIVE_TAPE: ContextVar[Optional["Tape"]] = ContextVar("active_tape", default=None)


class Tensor:
    """Dense real array with an attached gradient buffer when `requires_grad`."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_tape")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        for axis, extent in enumerate(arr.shape):
            if extent <= 0:
                raise ShapeError(f"tensor extents must be positive, got shape {arr.shape}", axis=str(axis))
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = np.zeros_like(arr) if requires_grad else None
        self.name = name
        self._tape: Optional[Tape] = None

    # -- introspection -----------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self) -> str:
        label = f"{self.name!r}, " if self.name else ""
        return f"Tensor({label}shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


@dataclass
class _Record:
    name: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Ordered record of executed differentiable operations."""

    def __init__(self):
        self._records: List[_Record] = []
        self._tokens: List[Token] = []

    def __enter__(self) -> "Tape":
        self._tokens.append(_ACTIVE_TAPE.set(self))
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _ACTIVE_TAPE.reset(self._tokens.pop())

    def __len__(self) -> int:
        return len(self._records)

    @property
    def operations(self) -> List[str]:
        """Operation names in execution order."""
        return [r.name for r in self._records]

    def record(self, name: str, inputs: Sequence[Tensor], output: Tensor, backward: BackwardFn) -> None:
        output._tape = self
        self._records.append(_Record(name, tuple(inputs), output, backward))

    def backward(self, loss: Tensor) -> None:
        """Populate `.grad` of every requires_grad tensor reachable from `loss`."""
        if loss.size != 1:
            raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not self._records:
            raise TapeError("backward called on an empty tape")
        if not any(r.output is loss for r in self._records):
            raise TapeError("loss was not produced by an operation recorded on this tape")

        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        seen: Dict[int, Tensor] = {id(loss): loss}

        for rec in reversed(self._records):
            g = grads.get(id(rec.output))
            if g is None:
                continue
            input_grads = rec.backward(g)
            for tensor, tg in zip(rec.inputs, input_grads):
                if tg is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                seen[key] = tensor
                grads[key] = tg if key not in grads else grads[key] + tg

        for key, tensor in seen.items():
            tensor.grad += grads[key]

        logger.debug("tape_backward", operations=len(self._records), tensors=len(seen))
        for rec in self._records:
            rec.output._tape = None
        self._records.clear()


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPE.get()


def backward(loss: Tensor) -> None:
    """Run backward on the tape that recorded `loss`."""
    if loss._tape is None:
        raise TapeError("backward called on an empty tape: loss was not recorded")
    loss._tape.backward(loss)


def zero_grad(tensors) -> None:
    for t in tensors:
        t.zero_grad()
