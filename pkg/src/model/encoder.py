"""
Graph encoder.

One layer, in every variant, is: graph contraction -> channel projection ->
batch norm -> PReLU -> + residual projection of the layer input.

  separable / shared   Z = (As (At H)) W
  full                 Z = (Ast H) W
  distinct             time GCN (At, W_time, own norm and PReLU), then a space
                       GCN (As, W) on its output

Adjacency matrices are used exactly as stored: signed, directed, never
symmetrized or normalized.
"""

import numpy as np
import structlog

from errors import ConfigError, ShapeError
from model.params import BatchNormParams, EncoderLayerParams, ModelParams
from model.variants import EncoderVariant
from tensorcore.ops import (
    add,
    batch_norm,
    contract_full,
    contract_space,
    contract_time,
    linear_channels,
    prelu,
)
from tensorcore.tensor import Tensor

logger = structlog.get_logger()


def _activate(Z: Tensor, norm: BatchNormParams, slope: Tensor, train_mode: bool) -> Tensor:
    if norm is not None:
        Z = batch_norm(Z, norm.scale, norm.shift, norm.stats, train_mode)
    return prelu(Z, slope)


def _require(variant: EncoderVariant, layer: EncoderLayerParams, *fields: str) -> None:
    missing = [f for f in fields if getattr(layer, f) is None]
    if missing:
        raise ConfigError(f"{variant.value} layer is missing parameters: {', '.join(missing)}")


def encoder_layer_forward(
    variant: EncoderVariant,
    layer: EncoderLayerParams,
    H: Tensor,
    train_mode: bool,
) -> Tensor:
    """[B, C_l, V, T] -> [B, C_{l+1}, V, T]"""
    variant = EncoderVariant(variant)
    if H.ndim != 4:
        raise ShapeError(f"encoder layer input must be [B, C, V, T], got {H.shape}")
    if H.shape[1] != layer.R.shape[0]:
        raise ShapeError(f"layer expects {layer.R.shape[0]} input channels, got {H.shape[1]}", axis="C")

    if variant is EncoderVariant.FULL:
        _require(variant, layer, "Ast")
        Z = linear_channels(contract_full(layer.Ast, H), layer.W)
        out = _activate(Z, layer.norm, layer.slope, train_mode)
    elif variant is EncoderVariant.DISTINCT:
        _require(variant, layer, "As", "At", "W_time", "slope_time")
        H1 = _activate(linear_channels(contract_time(layer.At, H), layer.W_time),
                       layer.norm_time, layer.slope_time, train_mode)
        out = _activate(linear_channels(contract_space(layer.As, H1), layer.W),
                        layer.norm, layer.slope, train_mode)
    else:
        _require(variant, layer, "As", "At")
        Z = linear_channels(contract_space(layer.As, contract_time(layer.At, H)), layer.W)
        out = _activate(Z, layer.norm, layer.slope, train_mode)

    return add(out, linear_channels(H, layer.R))


def encoder_forward(variant: EncoderVariant, params: ModelParams, X_in: Tensor, train_mode: bool) -> Tensor:
    """[B, 3, V, T] -> [B, 3, V, T] through every configured layer."""
    variant = EncoderVariant(variant)
    if variant is not params.variant:
        raise ConfigError(f"params were built for {params.variant.value}, not {variant.value}")
    cfg = params.config
    expected = (cfg.channels[0], cfg.joints, cfg.input_frames)
    if X_in.ndim != 4 or X_in.shape[1:] != expected:
        raise ShapeError(f"encoder input must be [B, {expected[0]}, {expected[1]}, {expected[2]}], got {X_in.shape}")

    H = X_in
    for layer in range(1, cfg.num_layers + 1):
        H = encoder_layer_forward(variant, params.encoder_layer(layer), H, train_mode)
    return H


def full_from_separable(As: np.ndarray, At: np.ndarray) -> np.ndarray:
    """Ast[w,k,v,m] = As[k,w,v] * At[v,k,m]: the dense matrix a separable pair factors."""
    return np.einsum("kwv,vkm->wkvm", As, At)
