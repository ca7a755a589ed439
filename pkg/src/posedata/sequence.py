"""
PoseSequence value object and frame-level transforms.

Frames are stored as an immutable numpy array of shape (F, V, 3), joint-major
per frame: coordinates for coords3d, axis-angle vectors for expmap.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
import structlog

from errors import RepresentationError, SequenceDataError

logger = structlog.get_logger()


class Representation(str, Enum):
    COORDS3D = "coords3d"
    EXPMAP = "expmap"


@dataclass(frozen=True, eq=False)
class PoseSequence:
    """A motion clip: F frames of V joints with 3 values each."""

    frames: np.ndarray
    representation: Representation
    fps: int
    name: str = field(default="sequence")

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[2] != 3:
            raise SequenceDataError(f"{self.name}: frames must have shape (F, V, 3), got {frames.shape}")
        if frames.shape[0] < 1:
            raise SequenceDataError(f"{self.name}: a sequence needs at least one frame")
        if frames.shape[1] < 1:
            raise SequenceDataError(f"{self.name}: a sequence needs at least one joint")
        if not np.all(np.isfinite(frames)):
            bad = int(np.argwhere(~np.isfinite(frames))[0][0])
            raise SequenceDataError(f"{self.name}: non-finite value in frame {bad}")
        if int(self.fps) != self.fps or self.fps <= 0:
            raise SequenceDataError(f"{self.name}: fps must be a positive integer, got {self.fps}")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "representation", Representation(self.representation))
        object.__setattr__(self, "fps", int(self.fps))

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_joints(self) -> int:
        return self.frames.shape[1]

    def replace_frames(self, frames: np.ndarray, fps: Optional[int] = None) -> "PoseSequence":
        return PoseSequence(frames, self.representation, self.fps if fps is None else fps, self.name)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PoseSequence):
            return NotImplemented
        return (
            self.representation == other.representation
            and self.fps == other.fps
            and self.frames.shape == other.frames.shape
            and bool(np.array_equal(self.frames, other.frames))
        )

    def __repr__(self) -> str:
        return (f"PoseSequence(name={self.name!r}, rep={self.representation.value}, "
                f"fps={self.fps}, frames={self.num_frames}, joints={self.num_joints})")


def center_on_root(seq: PoseSequence, root_joint: int = 0) -> PoseSequence:
    """Translate every frame so `root_joint` sits at the origin."""
    if seq.representation is not Representation.COORDS3D:
        raise RepresentationError(f"{seq.name}: root centering needs coords3d, got {seq.representation.value}")
    if not 0 <= root_joint < seq.num_joints:
        raise SequenceDataError(f"{seq.name}: root joint {root_joint} out of range for V={seq.num_joints}")
    centered = seq.frames - seq.frames[:, root_joint:root_joint + 1, :]
    centered[:, root_joint, :] = 0.0
    return seq.replace_frames(centered)


def downsample(seq: PoseSequence, target_fps: int) -> PoseSequence:
    """Keep every (fps / target_fps)-th frame starting at frame 0; no filtering."""
    if target_fps <= 0 or seq.fps % target_fps != 0:
        raise SequenceDataError(f"{seq.name}: cannot downsample {seq.fps} fps to {target_fps} fps")
    step = seq.fps // target_fps
    if step == 1:
        return seq
    logger.debug("sequence_downsampled", sequence=seq.name, source_fps=seq.fps, target_fps=target_fps)
    return seq.replace_frames(seq.frames[::step], fps=target_fps)


def select_joints(seq: PoseSequence, keep: Sequence[int]) -> PoseSequence:
    """Restrict a sequence to the joints listed in `keep`, in that order."""
    keep = list(keep)
    if not keep:
        raise SequenceDataError(f"{seq.name}: joint keep-list is empty")
    out_of_range = [j for j in keep if not 0 <= j < seq.num_joints]
    if out_of_range:
        raise SequenceDataError(f"{seq.name}: joints {out_of_range} out of range for V={seq.num_joints}")
    return seq.replace_frames(seq.frames[:, keep, :])
