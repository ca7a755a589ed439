"""
Synthetic motion generator.

Stands in for licensed motion-capture data. A random kinematic chain is posed
at rest and every joint oscillates as a sum of up to three sinusoids around it.
Periodic motion uses integer harmonics of `period`, so frame t equals frame
t + period exactly (before noise). Aperiodic motion jitters each joint's
frequencies so the clip never repeats.
"""

from dataclasses import dataclass

import numpy as np
import structlog

from errors import SynthSpecError
from posedata.sequence import PoseSequence, Representation

logger = structlog.get_logger()

MAX_HARMONICS = 3


@dataclass(frozen=True)
class SynthSpec:
    joints: int = 12
    frames: int = 535
    fps: int = 25
    period: float = 25.0
    amplitude: float = 60.0
    harmonics: int = 3
    noise_sigma: float = 0.0
    bone_length: float = 120.0
    representation: Representation = Representation.COORDS3D
    periodic: bool = True
    input_frames: int = 10
    output_frames: int = 25

    def __post_init__(self):
        object.__setattr__(self, "representation", Representation(self.representation))

    def validate(self) -> None:
        problems = []
        if self.joints < 2:
            problems.append(f"joints must be >= 2 (got {self.joints})")
        if self.input_frames < 1 or self.output_frames < 1:
            problems.append("input_frames and output_frames must be >= 1")
        if self.frames < self.input_frames + self.output_frames:
            problems.append(
                f"frames ({self.frames}) must be >= input_frames + output_frames "
                f"({self.input_frames + self.output_frames})"
            )
        if self.fps <= 0:
            problems.append(f"fps must be > 0 (got {self.fps})")
        if not self.period > 0:
            problems.append(f"period must be > 0 (got {self.period})")
        if not 1 <= self.harmonics <= MAX_HARMONICS:
            problems.append(f"harmonics must be in [1, {MAX_HARMONICS}] (got {self.harmonics})")
        if self.amplitude < 0 or self.noise_sigma < 0:
            problems.append("amplitude and noise_sigma must be >= 0")
        if not self.bone_length > 0:
            problems.append(f"bone_length must be > 0 (got {self.bone_length})")
        if problems:
            raise SynthSpecError("invalid synth spec: " + "; ".join(problems))


def _rest_pose(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.representation is Representation.EXPMAP:
        return rng.normal(0.0, 0.3, size=(spec.joints, 3))
    directions = rng.normal(size=(spec.joints - 1, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    rest = np.zeros((spec.joints, 3))
    rest[1:] = np.cumsum(spec.bone_length * directions, axis=0)
    return rest


def synth_generate(spec: SynthSpec, seed: int, name: str = "synthetic") -> PoseSequence:
    """Pure function of (spec, seed)."""
    spec.validate()
    rng = np.random.default_rng(seed)
    rest = _rest_pose(spec, rng)

    harmonics = np.arange(1, spec.harmonics + 1, dtype=np.float64)
    # expmap amplitudes are angles: amplitude / bone_length radians
    peak = spec.amplitude if spec.representation is Representation.COORDS3D else spec.amplitude / spec.bone_length
    amplitudes = rng.uniform(0.0, 1.0, size=(spec.joints, spec.harmonics, 3)) * peak
    amplitudes /= harmonics[None, :, None]
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(spec.joints, spec.harmonics, 3))
    frequencies = np.broadcast_to(harmonics / spec.period, (spec.joints, spec.harmonics)).copy()
    if not spec.periodic:
        frequencies *= rng.uniform(0.7, 1.3, size=frequencies.shape)

    t = np.arange(spec.frames, dtype=np.float64)
    angle = 2.0 * np.pi * frequencies[None, :, :, None] * t[:, None, None, None] + phases[None]
    offsets = np.sum(amplitudes[None] * np.sin(angle), axis=2)

    if spec.representation is Representation.COORDS3D:
        # children inherit their ancestors' motion along the chain
        offsets = np.cumsum(offsets, axis=1)
    frames = rest[None] + offsets

    if spec.noise_sigma > 0:
        frames = frames + rng.normal(0.0, spec.noise_sigma, size=frames.shape)

    logger.debug("synthetic_sequence_generated", name=name, seed=seed, frames=spec.frames,
                 joints=spec.joints, periodic=spec.periodic)
    return PoseSequence(frames, spec.representation, spec.fps, name=name)
