"""
Convolutional decoder.

Time becomes the channel axis: the encoder output [B, 3, V, T] is permuted to
[B, T, 3, V] and convolved over the (coordinate, joint) plane. Stage 1 maps T
channels to K, each later stage refines K -> K with a residual add. The last
stage has no extra output activation, so predictions stay unconstrained.
"""

from typing import List

import structlog

from config import ModelConfig
from errors import ConfigError, ShapeError
from model.params import DecoderStageParams, ModelParams
from tensorcore.ops import add, conv2d, permute, prelu
from tensorcore.tensor import Tensor

logger = structlog.get_logger()


def decoder_stages(params: ModelParams) -> List[DecoderStageParams]:
    return [params.decoder_stage(s) for s in range(1, params.config.decoder_layers + 1)]


def decoder_forward(params: ModelParams, Henc: Tensor) -> Tensor:
    """[B, 3, V, T] -> [B, 3, V, K]"""
    cfg = params.config
    expected = (cfg.channels[-1], cfg.joints, cfg.input_frames)
    if Henc.ndim != 4 or Henc.shape[1:] != expected:
        raise ShapeError(f"decoder input must be [B, {expected[0]}, {expected[1]}, {expected[2]}], got {Henc.shape}")

    x = permute(Henc, (0, 3, 1, 2))
    for index, stage in enumerate(decoder_stages(params)):
        y = prelu(conv2d(x, stage.kernel, stage.bias), stage.slope)
        x = y if index == 0 else add(y, x)
    return permute(x, (0, 2, 3, 1))


def decoder_param_count(config: ModelConfig) -> int:
    """T*K*k^2 + K + (n_dec - 1)*(K*K*k^2 + K) + n_dec PReLU slopes."""
    n_dec = config.decoder_layers
    if n_dec < 1:
        raise ConfigError(f"decoder needs at least one stage, got {n_dec}")
    T, K, k2 = config.input_frames, config.output_frames, config.decoder_kernel ** 2
    return T * K * k2 + K + (n_dec - 1) * (K * K * k2 + K) + n_dec
