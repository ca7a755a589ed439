"""
Run configuration.

A single UTF-8 JSON file drives every command. Top-level sections:

    model   ModelConfig   shapes, widths, variant, init seed
    train   TrainConfig   optimizer, schedule, loss, shuffle seed
    data    DataConfig    sequence paths, foreign-CSV format, preprocessing
    synth   SynthConfig   synthetic dataset generation
    output  OutputConfig  run directory, optional metrics port
    eval    EvalConfig    horizons, MAE joint subset

Precedence is flag > file > default. Configuration is read once at command
start; nothing below this module reads the environment.
"""

import dataclasses
import glob
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import structlog

from errors import ConfigError
from model.variants import EncoderVariant
from posedata.io import FormatSpec
from posedata.sequence import Representation
from posedata.synth import SynthSpec

logger = structlog.get_logger()

LOSS_FOR_REPRESENTATION = {
    Representation.COORDS3D: "mpjpe",
    Representation.EXPMAP: "mae",
}

SPLITS = ("train", "val", "test")

# data splits each command reads
SPLITS_READ = {"train": ("train", "val"), "eval": ("test",)}


@dataclass(frozen=True)
class ModelConfig:
    variant: EncoderVariant = EncoderVariant.SEPARABLE
    joints: int = 22
    input_frames: int = 10
    output_frames: int = 25
    channels: Tuple[int, ...] = (3, 64, 32, 64, 3)
    decoder_layers: int = 4
    decoder_kernel: int = 3
    batch_norm: bool = True
    dtype: str = "float32"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", EncoderVariant(self.variant))
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))

    @property
    def num_layers(self) -> int:
        return len(self.channels) - 1

    def validate(self) -> None:
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"model.dtype must be float32 or float64, got {self.dtype!r}")
        if len(self.channels) < 2:
            raise ConfigError("model.channels needs at least an input and an output width")
        if any(c <= 0 for c in self.channels):
            raise ConfigError(f"model.channels must be positive, got {list(self.channels)}")
        if self.channels[0] != 3 or self.channels[-1] != 3:
            raise ConfigError(f"model.channels must start and end at 3, got {list(self.channels)}")
        for name in ("joints", "input_frames", "output_frames", "decoder_layers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name} must be >= 1, got {getattr(self, name)}")
        if self.decoder_kernel < 1 or self.decoder_kernel % 2 == 0:
            raise ConfigError(f"model.decoder_kernel must be odd, got {self.decoder_kernel}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 256
    lr: float = 0.01
    decay_factor: float = 0.1
    decay_every: int = 5
    decay_after: int = 20
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    loss: str = "mpjpe"
    seed: int = 0
    shuffle: bool = True
    warmup_epochs: int = 10

    def validate(self) -> None:
        if self.loss not in ("mpjpe", "mae"):
            raise ConfigError(f"train.loss must be mpjpe or mae, got {self.loss!r}")
        for name in ("epochs", "batch_size", "decay_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"train.{name} must be >= 1")
        if self.decay_after < 0:
            raise ConfigError("train.decay_after must be >= 0")
        for name in ("lr", "decay_factor", "adam_eps"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"train.{name} must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("train.beta1 and train.beta2 must lie in [0, 1)")


@dataclass(frozen=True)
class DataConfig:
    representation: Representation = Representation.COORDS3D
    fps: int = 25
    source_fps: Optional[int] = None
    train: Optional[Tuple[str, ...]] = None
    val: Optional[Tuple[str, ...]] = None
    test: Optional[Tuple[str, ...]] = None
    format: Optional[FormatSpec] = None
    center_root: bool = True
    root_joint: int = 0
    stride: int = 1
    test_stride: int = 1
    to_millimeters: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "representation", Representation(self.representation))
        for split in SPLITS:
            value = getattr(self, split)
            if isinstance(value, str):
                value = (value,)
            if value is not None:
                object.__setattr__(self, split, tuple(value))
        if isinstance(self.format, dict):
            object.__setattr__(self, "format", _build(FormatSpec, "data.format", self.format))


@dataclass(frozen=True)
class SynthConfig:
    spec: SynthSpec = field(default_factory=SynthSpec)
    train_sequences: int = 4
    val_sequences: int = 1
    test_sequences: int = 1
    seed: int = 0


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "runs/default"
    metrics_port: Optional[int] = None


@dataclass(frozen=True)
class EvalConfig:
    horizons: Tuple[int, ...] = (2, 4, 8, 10, 14, 18, 22, 25)
    mae_joints: Optional[Tuple[int, ...]] = None
    batch_size: int = 256

    def __post_init__(self):
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        if self.mae_joints is not None:
            object.__setattr__(self, "mae_joints", tuple(int(j) for j in self.mae_joints))


def _build(cls, section: str, raw: Dict[str, Any]):
    if not isinstance(raw, dict):
        raise ConfigError(f"section {section!r} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r}: {', '.join(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section!r} section: {exc}") from exc


def _build_synth(raw: Dict[str, Any]) -> SynthConfig:
    if not isinstance(raw, dict):
        raise ConfigError("section 'synth' must be an object")
    counts = {k: raw[k] for k in ("train_sequences", "val_sequences", "test_sequences", "seed") if k in raw}
    spec_keys = {k: v for k, v in raw.items() if k not in counts}
    return SynthConfig(spec=_build(SynthSpec, "synth", spec_keys), **counts)


def _jsonable(value):
    if dataclasses.is_dataclass(value):
        return {f.name: _jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (EncoderVariant, Representation)):
        return value.value
    return value


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "RunConfig":
        unknown = sorted(set(raw) - {"model", "train", "data", "synth", "output", "eval"})
        if unknown:
            raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
        synth_raw = dict(raw.get("synth", {}))
        model = _build(ModelConfig, "model", raw.get("model", {}))
        # synthetic clips always match the model's window shape
        synth_raw.setdefault("joints", model.joints)
        synth_raw.setdefault("input_frames", model.input_frames)
        synth_raw.setdefault("output_frames", model.output_frames)
        data = _build(DataConfig, "data", raw.get("data", {}))
        synth_raw.setdefault("representation", data.representation.value)
        synth_raw.setdefault("fps", data.source_fps or data.fps)
        return cls(
            model=model,
            train=_build(TrainConfig, "train", raw.get("train", {})),
            data=data,
            synth=_build_synth(synth_raw),
            output=_build(OutputConfig, "output", raw.get("output", {})),
            eval=_build(EvalConfig, "eval", raw.get("eval", {})),
        )

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        config = cls.from_dict(raw)
        logger.info("config_loaded", path=str(path), variant=config.model.variant.value)
        return config

    def with_overrides(
        self,
        seed: Optional[int] = None,
        variant: Optional[str] = None,
        epochs: Optional[int] = None,
        out: Optional[str] = None,
    ) -> "RunConfig":
        config = self
        if seed is not None:
            config = dataclasses.replace(
                config,
                model=dataclasses.replace(config.model, seed=seed),
                train=dataclasses.replace(config.train, seed=seed),
                synth=dataclasses.replace(config.synth, seed=seed),
            )
        if variant is not None:
            config = dataclasses.replace(config, model=dataclasses.replace(config.model, variant=variant))
        if epochs is not None:
            config = dataclasses.replace(config, train=dataclasses.replace(config.train, epochs=epochs))
        if out is not None:
            config = dataclasses.replace(config, output=dataclasses.replace(config.output, dir=out))
        return config

    def to_dict(self) -> Dict[str, Any]:
        raw = _jsonable(self)
        synth = raw.pop("synth")
        raw["synth"] = {**synth.pop("spec"), **synth}
        return raw

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    # -- paths -------------------------------------------------------------

    @property
    def run_dir(self) -> Path:
        return Path(self.output.dir)

    def synth_dir(self, split: str) -> Path:
        return self.run_dir / "synth" / split

    def data_files(self, split: str) -> List[Path]:
        """Resolve the split's glob patterns; defaults to the synthetic dataset."""
        patterns = getattr(self.data, split)
        if patterns is None:
            patterns = (str(self.synth_dir(split) / "*.txt"),)
        files: List[Path] = []
        for pattern in patterns:
            matches = sorted(glob.glob(pattern))
            files.extend(Path(m) for m in matches if Path(m).is_file())
        return files

    # -- validation --------------------------------------------------------

    def validate(self, command: Optional[str] = None) -> None:
        """
        Check every section and their cross-consistency. With a command, the
        data globs that command reads must each match at least one file;
        unset splits fall back to the synthetic dataset and are not checked.
        """
        self.model.validate()
        self.train.validate()
        self.synth.spec.validate()

        m, d, s = self.model, self.data, self.synth.spec
        mismatches = []
        if s.joints != m.joints:
            mismatches.append(f"synth.joints={s.joints} vs model.joints={m.joints}")
        if s.input_frames != m.input_frames or s.output_frames != m.output_frames:
            mismatches.append(
                f"synth T/K={s.input_frames}/{s.output_frames} vs model T/K={m.input_frames}/{m.output_frames}"
            )
        if s.representation is not d.representation:
            mismatches.append(f"synth.representation={s.representation.value} vs data.representation={d.representation.value}")
        if d.format is not None:
            if d.format.selected_joints != m.joints:
                mismatches.append(f"data.format selects {d.format.selected_joints} joints vs model.joints={m.joints}")
            if d.format.representation is not d.representation:
                mismatches.append("data.format.representation differs from data.representation")
        if LOSS_FOR_REPRESENTATION[d.representation] != self.train.loss:
            mismatches.append(f"train.loss={self.train.loss} does not fit {d.representation.value} data")
        if d.source_fps is not None and d.source_fps % d.fps != 0:
            mismatches.append(f"data.source_fps={d.source_fps} is not a multiple of data.fps={d.fps}")
        if d.center_root and not 0 <= d.root_joint < m.joints:
            mismatches.append(f"data.root_joint={d.root_joint} out of range")
        if d.stride < 1 or d.test_stride < 1:
            mismatches.append("data.stride and data.test_stride must be >= 1")
        bad_h = [h for h in self.eval.horizons if not 1 <= h <= m.output_frames]
        if bad_h:
            mismatches.append(f"eval.horizons {bad_h} outside [1, {m.output_frames}]")
        if self.eval.mae_joints is not None and any(not 0 <= j < m.joints for j in self.eval.mae_joints):
            mismatches.append("eval.mae_joints out of range")
        if mismatches:
            raise ConfigError("inconsistent config: " + "; ".join(mismatches))
        if command is not None:
            self._check_data_paths(command)

    def _check_data_paths(self, command: str) -> None:
        missing = []
        for split in SPLITS_READ.get(command, ()):
            for pattern in getattr(self.data, split) or ():
                if not any(Path(m).is_file() for m in glob.glob(pattern)):
                    missing.append(f"data.{split} pattern {pattern!r} matches no file")
        if missing:
            raise ConfigError("missing data: " + "; ".join(missing))
