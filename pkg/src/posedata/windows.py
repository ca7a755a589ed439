"""
Windowing of sequences into (observed, future) training pairs.

Window blocks use the model layout: inputs [N, 3, V, T], targets [N, 3, V, K].
"""

from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence

import numpy as np
import structlog

from errors import WindowError
from posedata.sequence import PoseSequence, Representation

logger = structlog.get_logger()


@dataclass(frozen=True, eq=False)
class WindowSet:
    inputs: np.ndarray
    targets: np.ndarray
    sequence_ids: List[str] = field(default_factory=list)
    starts: List[int] = field(default_factory=list)
    representation: Representation = Representation.COORDS3D
    fps: int = 25

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_frames(self) -> int:
        return self.inputs.shape[3]

    @property
    def output_frames(self) -> int:
        return self.targets.shape[3]

    @property
    def num_joints(self) -> int:
        return self.inputs.shape[2]

    def subset(self, index: Sequence[int]) -> "WindowSet":
        index = np.asarray(index, dtype=np.int64)
        return WindowSet(
            self.inputs[index],
            self.targets[index],
            [self.sequence_ids[i] for i in index],
            [self.starts[i] for i in index],
            self.representation,
            self.fps,
        )

    def batches(self, batch_size: int, rng: Optional[np.random.Generator] = None) -> Iterator[np.ndarray]:
        """Yield index arrays of at most `batch_size`; shuffled when `rng` is given."""
        order = np.arange(len(self)) if rng is None else rng.permutation(len(self))
        for lo in range(0, len(self), batch_size):
            yield order[lo:lo + batch_size]

    @staticmethod
    def concat(sets: Sequence["WindowSet"]) -> "WindowSet":
        sets = [s for s in sets if len(s)]
        if not sets:
            raise WindowError("no windows to concatenate")
        first = sets[0]
        for s in sets[1:]:
            if s.inputs.shape[1:] != first.inputs.shape[1:] or s.targets.shape[1:] != first.targets.shape[1:]:
                raise WindowError(
                    f"window shapes differ: {s.inputs.shape[1:]}/{s.targets.shape[1:]} "
                    f"vs {first.inputs.shape[1:]}/{first.targets.shape[1:]}"
                )
            if s.representation != first.representation:
                raise WindowError("cannot mix representations in one window set")
        return WindowSet(
            np.concatenate([s.inputs for s in sets]),
            np.concatenate([s.targets for s in sets]),
            [sid for s in sets for sid in s.sequence_ids],
            [st for s in sets for st in s.starts],
            first.representation,
            first.fps,
        )


def make_windows(seq: PoseSequence, T: int, K: int, stride: int = 1) -> WindowSet:
    """Pair i covers frames [i*stride, i*stride + T) as input and the next K frames as target."""
    if T < 1 or K < 1:
        raise WindowError(f"T and K must be >= 1, got T={T} K={K}")
    if stride < 1:
        raise WindowError(f"stride must be >= 1, got {stride}")
    F = seq.num_frames
    if F < T + K:
        raise WindowError(f"{seq.name}: {F} frames cannot hold one window of T+K={T + K}")

    count = (F - T - K) // stride + 1
    starts = [i * stride for i in range(count)]
    # (F, V, 3) -> (3, V, F)
    channels_first = np.ascontiguousarray(np.transpose(seq.frames, (2, 1, 0)))
    inputs = np.stack([channels_first[:, :, s:s + T] for s in starts])
    targets = np.stack([channels_first[:, :, s + T:s + T + K] for s in starts])

    logger.debug("windows_built", sequence=seq.name, count=count, T=T, K=K, stride=stride)
    return WindowSet(inputs, targets, [seq.name] * count, starts, seq.representation, seq.fps)


def windows_to_frames(block: np.ndarray) -> np.ndarray:
    """[3, V, F] block back to (F, V, 3) frames."""
    return np.ascontiguousarray(np.transpose(block, (2, 1, 0)))
