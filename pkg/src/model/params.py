"""
Model parameters.

Every trainable quantity is a named leaf Tensor held by ModelParams; batch
norm running statistics are non-trainable buffers next to them. Names are
dotted paths, e.g. `encoder.layer2.As`, `encoder.shared.At`,
`decoder.stage1.kernel`. Layers and stages are numbered from 1.

`parameter_layout` is the single source of truth for names and shapes: it
drives initialization, parameter counting and checkpoint shape checks.
"""

from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import structlog

from config import ModelConfig
from errors import ConfigError
from model.variants import EncoderVariant
from tensorcore.ops import RunningStats
from tensorcore.tensor import Tensor

logger = structlog.get_logger()

PRELU_INIT = 0.25

# init kinds
UNIFORM_LAST = "uniform_last"      # U(-1/sqrt(f), 1/sqrt(f)), f = last extent
UNIFORM_FAN_IN = "uniform_fan_in"  # decoder kernels/biases, f = Cin * kh * kw
ONES = "ones"
ZEROS = "zeros"
SLOPE = "slope"


@dataclass(frozen=True)
class ParamSlot:
    name: str
    shape: Tuple[int, ...]
    init: str
    group: str
    fan_in: int = 0

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


def _layer_prefix(layer: int) -> str:
    return f"encoder.layer{layer}"


def _stage_prefix(stage: int) -> str:
    return f"decoder.stage{stage}"


def encoder_layout(variant: EncoderVariant, config: ModelConfig) -> List[ParamSlot]:
    V, T = config.joints, config.input_frames
    widths = config.channels
    slots: List[ParamSlot] = []

    if variant is EncoderVariant.SEPARABLE_SHARED:
        slots.append(ParamSlot("encoder.shared.As", (T, V, V), UNIFORM_LAST, "encoder.adjacency_space"))
        slots.append(ParamSlot("encoder.shared.At", (V, T, T), UNIFORM_LAST, "encoder.adjacency_time"))

    for layer in range(1, len(widths)):
        c_in, c_out = widths[layer - 1], widths[layer]
        p = _layer_prefix(layer)
        if variant in (EncoderVariant.SEPARABLE, EncoderVariant.DISTINCT):
            slots.append(ParamSlot(f"{p}.As", (T, V, V), UNIFORM_LAST, "encoder.adjacency_space"))
            slots.append(ParamSlot(f"{p}.At", (V, T, T), UNIFORM_LAST, "encoder.adjacency_time"))
        elif variant is EncoderVariant.FULL:
            slots.append(ParamSlot(f"{p}.Ast", (V, T, V, T), UNIFORM_LAST, "encoder.adjacency_full"))

        if variant is EncoderVariant.DISTINCT:
            slots.append(ParamSlot(f"{p}.W_time", (c_in, c_out), UNIFORM_LAST, "encoder.projection"))
            if config.batch_norm:
                slots.append(ParamSlot(f"{p}.bn_time.scale", (c_out,), ONES, "encoder.batchnorm"))
                slots.append(ParamSlot(f"{p}.bn_time.shift", (c_out,), ZEROS, "encoder.batchnorm"))
            slots.append(ParamSlot(f"{p}.slope_time", (1,), SLOPE, "encoder.prelu"))
            slots.append(ParamSlot(f"{p}.W", (c_out, c_out), UNIFORM_LAST, "encoder.projection"))
        else:
            slots.append(ParamSlot(f"{p}.W", (c_in, c_out), UNIFORM_LAST, "encoder.projection"))

        if config.batch_norm:
            slots.append(ParamSlot(f"{p}.bn.scale", (c_out,), ONES, "encoder.batchnorm"))
            slots.append(ParamSlot(f"{p}.bn.shift", (c_out,), ZEROS, "encoder.batchnorm"))
        slots.append(ParamSlot(f"{p}.slope", (1,), SLOPE, "encoder.prelu"))
        slots.append(ParamSlot(f"{p}.R", (c_in, c_out), UNIFORM_LAST, "encoder.residual"))
    return slots


def decoder_layout(config: ModelConfig) -> List[ParamSlot]:
    T, K, k = config.input_frames, config.output_frames, config.decoder_kernel
    slots: List[ParamSlot] = []
    for stage in range(1, config.decoder_layers + 1):
        c_in = T if stage == 1 else K
        p = _stage_prefix(stage)
        fan_in = c_in * k * k
        slots.append(ParamSlot(f"{p}.kernel", (K, c_in, k, k), UNIFORM_FAN_IN, "decoder.kernel", fan_in))
        slots.append(ParamSlot(f"{p}.bias", (K,), UNIFORM_FAN_IN, "decoder.bias", fan_in))
        slots.append(ParamSlot(f"{p}.slope", (1,), SLOPE, "decoder.prelu"))
    return slots


def parameter_layout(config: ModelConfig, variant: Optional[EncoderVariant] = None) -> List[ParamSlot]:
    variant = config.variant if variant is None else EncoderVariant(variant)
    return encoder_layout(variant, config) + decoder_layout(config)


def batchnorm_sites(config: ModelConfig) -> List[Tuple[str, int]]:
    """(buffer name, channels) for every batch_norm call site."""
    if not config.batch_norm:
        return []
    sites = []
    for layer in range(1, config.num_layers + 1):
        c_out = config.channels[layer]
        if config.variant is EncoderVariant.DISTINCT:
            sites.append((f"{_layer_prefix(layer)}.bn_time", c_out))
        sites.append((f"{_layer_prefix(layer)}.bn", c_out))
    return sites


# ------------------------------------------------------------------
# Per-layer views
# ------------------------------------------------------------------

@dataclass
class BatchNormParams:
    scale: Tensor
    shift: Tensor
    stats: RunningStats


@dataclass
class EncoderLayerParams:
    """Everything one encoder layer reads. Unused fields stay None for a variant."""

    W: Tensor
    R: Tensor
    slope: Tensor
    norm: Optional[BatchNormParams] = None
    As: Optional[Tensor] = None
    At: Optional[Tensor] = None
    Ast: Optional[Tensor] = None
    W_time: Optional[Tensor] = None
    slope_time: Optional[Tensor] = None
    norm_time: Optional[BatchNormParams] = None


@dataclass
class DecoderStageParams:
    kernel: Tensor
    bias: Tensor
    slope: Tensor


class ModelParams:
    """Named trainable tensors plus batch-norm running-stat buffers."""

    def __init__(self, config: ModelConfig, tensors: Dict[str, Tensor], stats: Dict[str, RunningStats]):
        self.config = config
        self.variant = config.variant
        self.tensors = tensors
        self.stats = stats

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self.tensors.items())

    def parameters(self) -> List[Tensor]:
        return list(self.tensors.values())

    def num_parameters(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def _norm(self, prefix: str) -> Optional[BatchNormParams]:
        if f"{prefix}.scale" not in self.tensors:
            return None
        return BatchNormParams(self[f"{prefix}.scale"], self[f"{prefix}.shift"], self.stats[prefix])

    def encoder_layer(self, layer: int) -> EncoderLayerParams:
        if not 1 <= layer <= self.config.num_layers:
            raise ConfigError(f"encoder layer {layer} out of range [1, {self.config.num_layers}]")
        p = _layer_prefix(layer)
        get = self.tensors.get
        if self.variant is EncoderVariant.SEPARABLE_SHARED:
            As, At = get("encoder.shared.As"), get("encoder.shared.At")
        else:
            As, At = get(f"{p}.As"), get(f"{p}.At")
        return EncoderLayerParams(
            W=self[f"{p}.W"],
            R=self[f"{p}.R"],
            slope=self[f"{p}.slope"],
            norm=self._norm(f"{p}.bn"),
            As=As,
            At=At,
            Ast=get(f"{p}.Ast"),
            W_time=get(f"{p}.W_time"),
            slope_time=get(f"{p}.slope_time"),
            norm_time=self._norm(f"{p}.bn_time"),
        )

    def decoder_stage(self, stage: int) -> DecoderStageParams:
        p = _stage_prefix(stage)
        return DecoderStageParams(self[f"{p}.kernel"], self[f"{p}.bias"], self[f"{p}.slope"])

    # -- snapshots ---------------------------------------------------------

    def snapshot(self) -> Dict[str, np.ndarray]:
        """Copy of every tensor and buffer value, for best-model selection."""
        values = {name: t.data.copy() for name, t in self.tensors.items()}
        for name, st in self.stats.items():
            values[f"{name}.running_mean"] = st.mean.copy()
            values[f"{name}.running_var"] = st.var.copy()
        return values

    def restore(self, values: Dict[str, np.ndarray]) -> None:
        for name, t in self.tensors.items():
            t.data[...] = values[name]
        for name, st in self.stats.items():
            st.mean[...] = values[f"{name}.running_mean"]
            st.var[...] = values[f"{name}.running_var"]


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Deterministic initialization; see parameter_layout for names and shapes."""
    config.validate()
    dtype = np.dtype(config.dtype)
    rng = np.random.default_rng(seed)
    tensors: Dict[str, Tensor] = {}
    for slot in parameter_layout(config):
        if slot.init == UNIFORM_LAST:
            bound = 1.0 / np.sqrt(slot.shape[-1])
            values = rng.uniform(-bound, bound, size=slot.shape)
        elif slot.init == UNIFORM_FAN_IN:
            bound = 1.0 / np.sqrt(slot.fan_in)
            values = rng.uniform(-bound, bound, size=slot.shape)
        elif slot.init == ONES:
            values = np.ones(slot.shape)
        elif slot.init == ZEROS:
            values = np.zeros(slot.shape)
        else:
            values = np.full(slot.shape, PRELU_INIT)
        tensors[slot.name] = Tensor(values.astype(dtype), requires_grad=True, name=slot.name)

    stats = {name: RunningStats.fresh(channels, dtype) for name, channels in batchnorm_sites(config)}
    params = ModelParams(config, tensors, stats)
    logger.info("params_initialized", variant=config.variant.value, seed=seed,
                tensors=len(tensors), parameters=params.num_parameters())
    return params
