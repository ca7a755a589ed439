"""
Exception hierarchy.

Library code raises these; only main.py catches them and turns them into a
one-line `command_failed` log event plus a nonzero exit status.
"""

from typing import Iterable, Optional


class STSError(Exception):
    """Root of every error raised by this package."""


# ------------------------------------------------------------------
# tensor core
# ------------------------------------------------------------------

class ShapeError(STSError, ValueError):
    """Operand extents do not conform. `axis` names the offending axis."""

    def __init__(self, message: str, axis: Optional[str] = None):
        super().__init__(message if axis is None else f"{message} (axis {axis})")
        self.axis = axis


class TapeError(STSError, RuntimeError):
    pass


class GradCheckError(STSError, ValueError):
    pass


# ------------------------------------------------------------------
# pose data
# ------------------------------------------------------------------

class SequenceFormatError(STSError, ValueError):
    """A sequence file does not parse. `line` is 1-based."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")
        self.line = line
        self.path = path


class SequenceDataError(STSError, ValueError):
    pass


class SequenceIOError(STSError, OSError):
    pass


class RepresentationError(STSError, ValueError):
    pass


class WindowError(STSError, ValueError):
    pass


class SynthSpecError(STSError, ValueError):
    pass


# ------------------------------------------------------------------
# model / training / evaluation / cli
# ------------------------------------------------------------------

class ConfigError(STSError, ValueError):
    pass


class CheckpointError(STSError, ValueError):
    """Checkpoint does not match the configured model; `diff` lists each mismatch."""

    def __init__(self, message: str, diff: Iterable[str] = ()):
        self.diff = list(diff)
        if self.diff:
            message = f"{message}: " + "; ".join(self.diff)
        super().__init__(message)


class ExportError(STSError, ValueError):
    pass


class DivergenceError(STSError, ArithmeticError):
    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch} batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


class OptimizerError(STSError, ArithmeticError):
    pass


class HorizonError(STSError, ValueError):
    pass


class RotationError(STSError, ValueError):
    pass
