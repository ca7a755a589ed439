"""
Checkpoint container.

Plain text, UTF-8:

    STSGCN-CHECKPOINT v1
    config {"batch_norm": true, "channels": [3, 64, 32, 64, 3], ...}
    param encoder.layer1.As 10x22x22
    <row-major values, space separated>
    buffer encoder.layer1.bn.running_mean 64
    <values>

Values are written with repr(float), which round-trips float32 and float64
exactly, so two runs with identical seeds give byte-identical files.
"""

import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import structlog

from config import ModelConfig
from errors import CheckpointError
from model.params import ModelParams, batchnorm_sites, parameter_layout
from tensorcore.ops import RunningStats
from tensorcore.tensor import Tensor

logger = structlog.get_logger()

MAGIC = "STSGCN-CHECKPOINT v1"


def _shape_text(shape: Tuple[int, ...]) -> str:
    return "x".join(str(n) for n in shape)


def _values_text(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in values.reshape(-1))


def _model_config_dict(config: ModelConfig) -> Dict[str, object]:
    return {
        "variant": config.variant.value,
        "joints": config.joints,
        "input_frames": config.input_frames,
        "output_frames": config.output_frames,
        "channels": list(config.channels),
        "decoder_layers": config.decoder_layers,
        "decoder_kernel": config.decoder_kernel,
        "batch_norm": config.batch_norm,
        "dtype": config.dtype,
        "seed": config.seed,
    }


def format_checkpoint(params: ModelParams) -> str:
    lines = [MAGIC, "config " + json.dumps(_model_config_dict(params.config), sort_keys=True)]
    for name, tensor in params.named_parameters():
        lines.append(f"param {name} {_shape_text(tensor.shape)}")
        lines.append(_values_text(tensor.data))
    for name, stats in params.stats.items():
        for suffix, values in (("running_mean", stats.mean), ("running_var", stats.var)):
            lines.append(f"buffer {name}.{suffix} {_shape_text(values.shape)}")
            lines.append(_values_text(values))
    return "\n".join(lines) + "\n"


def save_checkpoint(params: ModelParams, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_checkpoint(params), encoding="utf-8")
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc
    logger.info("checkpoint_saved", path=str(path), parameters=params.num_parameters())
    return path


def _parse(path: Path) -> Tuple[ModelConfig, Dict[str, np.ndarray]]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc

    if len(lines) < 2 or lines[0] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (missing {MAGIC!r} header)")
    if not lines[1].startswith("config "):
        raise CheckpointError(f"{path}: line 2 must carry the model config")
    try:
        recorded = ModelConfig(**json.loads(lines[1][len("config "):]))
    except (ValueError, TypeError) as exc:
        raise CheckpointError(f"{path}: unreadable model config: {exc}") from exc

    body = lines[2:]
    if len(body) % 2:
        raise CheckpointError(f"{path}: truncated, header without values at the end")
    values: Dict[str, np.ndarray] = {}
    for i in range(0, len(body), 2):
        header = body[i].split(" ")
        if len(header) != 3 or header[0] not in ("param", "buffer"):
            raise CheckpointError(f"{path}: bad entry header on line {i + 3}: {body[i]!r}")
        _, name, shape_text = header
        try:
            shape = tuple(int(n) for n in shape_text.split("x"))
            flat = np.array([float(v) for v in body[i + 1].split()], dtype=np.float64)
        except ValueError as exc:
            raise CheckpointError(f"{path}: bad values for {name} on line {i + 4}: {exc}") from exc
        if flat.size != int(np.prod(shape)):
            raise CheckpointError(f"{path}: {name} declares {shape_text} but holds {flat.size} values")
        values[name] = flat.reshape(shape)
    return recorded, values


def _expected_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    shapes = {slot.name: slot.shape for slot in parameter_layout(config)}
    for name, channels in batchnorm_sites(config):
        shapes[f"{name}.running_mean"] = (channels,)
        shapes[f"{name}.running_var"] = (channels,)
    return shapes


def shape_diff(expected: Dict[str, Tuple[int, ...]], found: Dict[str, Tuple[int, ...]]) -> List[str]:
    diff = []
    for name in expected:
        if name not in found:
            diff.append(f"missing {name}: expected {_shape_text(expected[name])}")
        elif found[name] != expected[name]:
            diff.append(f"{name}: expected {_shape_text(expected[name])}, found {_shape_text(found[name])}")
    for name in found:
        if name not in expected:
            diff.append(f"unexpected {name}: found {_shape_text(found[name])}")
    return diff


def load_checkpoint(
    path: Union[str, Path],
    config: Optional[ModelConfig] = None,
) -> Tuple[ModelParams, ModelConfig]:
    """
    Load parameters, shape-checked against `config` (or the recorded config
    when none is given). Returns the params and the config recorded in the file.
    """
    path = Path(path)
    recorded, values = _parse(path)
    config = config or recorded
    diff = shape_diff(_expected_shapes(config), {name: v.shape for name, v in values.items()})
    if diff:
        raise CheckpointError(f"{path} does not fit the configured model", diff=diff)

    dtype = np.dtype(config.dtype)
    tensors = {
        slot.name: Tensor(values[slot.name].astype(dtype), requires_grad=True, name=slot.name)
        for slot in parameter_layout(config)
    }
    stats = {
        name: RunningStats(values[f"{name}.running_mean"].astype(dtype), values[f"{name}.running_var"].astype(dtype))
        for name, _ in batchnorm_sites(config)
    }
    logger.info("checkpoint_loaded", path=str(path), variant=config.variant.value, tensors=len(tensors))
    return ModelParams(config, tensors, stats), recorded
