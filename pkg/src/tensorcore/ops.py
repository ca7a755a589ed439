"""
Differentiable operations.

Exactly the operations the encoder, decoder and losses need. Every function
takes and returns Tensors; each one computes its forward value with numpy and,
when recording, registers a closure producing the input gradients.

Layout conventions:
  H    [B, C, V, T]   batch, channels, joints, frames
  At   [V, T, T]      At[v, k, m] weights frame m into frame k for joint v
  As   [T, V, V]      As[k, w, v] weights joint v into joint w at frame k
  Ast  [V, T, V, T]   Ast[w, k, v, m]
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from errors import ShapeError
from tensorcore.tensor import Tensor, active_tape

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.1


def _result(name: str, data: np.ndarray, inputs: Sequence[Tensor], backward) -> Tensor:
    tape = active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=track)
    if track:
        tape.record(name, inputs, out, backward)
    return out


def _require_ndim(op: str, operand: str, t: Tensor, ndim: int) -> None:
    if t.ndim != ndim:
        raise ShapeError(f"{op}: {operand} must be {ndim}-d, got shape {t.shape}")


def _require_extent(op: str, axis: str, *extents: int) -> None:
    if len(set(extents)) != 1:
        raise ShapeError(f"{op}: extents disagree {extents}", axis=axis)


# ------------------------------------------------------------------
# Graph contractions
# ------------------------------------------------------------------

def contract_time(At: Tensor, H: Tensor) -> Tensor:
    """out[b,c,v,k] = sum_m At[v,k,m] * H[b,c,v,m]"""
    _require_ndim("contract_time", "At", At, 3)
    _require_ndim("contract_time", "H", H, 4)
    _require_extent("contract_time", "V", At.shape[0], H.shape[2])
    _require_extent("contract_time", "T", At.shape[1], At.shape[2], H.shape[3])

    a, h = At.data, H.data
    out = np.einsum("vkm,bcvm->bcvk", a, h)

    def _backward(g):
        return np.einsum("bcvk,bcvm->vkm", g, h), np.einsum("vkm,bcvk->bcvm", a, g)

    return _result("contract_time", out, (At, H), _backward)


def contract_space(As: Tensor, Ht: Tensor) -> Tensor:
    """out[b,c,w,k] = sum_v As[k,w,v] * Ht[b,c,v,k]"""
    _require_ndim("contract_space", "As", As, 3)
    _require_ndim("contract_space", "Ht", Ht, 4)
    _require_extent("contract_space", "T", As.shape[0], Ht.shape[3])
    _require_extent("contract_space", "V", As.shape[1], As.shape[2], Ht.shape[2])

    a, h = As.data, Ht.data
    out = np.einsum("kwv,bcvk->bcwk", a, h)

    def _backward(g):
        return np.einsum("bcwk,bcvk->kwv", g, h), np.einsum("kwv,bcwk->bcvk", a, g)

    return _result("contract_space", out, (As, Ht), _backward)


def contract_full(Ast: Tensor, H: Tensor) -> Tensor:
    """out[b,c,w,k] = sum_{v,m} Ast[w,k,v,m] * H[b,c,v,m]"""
    _require_ndim("contract_full", "Ast", Ast, 4)
    _require_ndim("contract_full", "H", H, 4)
    _require_extent("contract_full", "V", Ast.shape[0], Ast.shape[2], H.shape[2])
    _require_extent("contract_full", "T", Ast.shape[1], Ast.shape[3], H.shape[3])

    a, h = Ast.data, H.data
    out = np.einsum("wkvm,bcvm->bcwk", a, h, optimize=True)

    def _backward(g):
        return (
            np.einsum("bcwk,bcvm->wkvm", g, h, optimize=True),
            np.einsum("wkvm,bcwk->bcvm", a, g, optimize=True),
        )

    return _result("contract_full", out, (Ast, H), _backward)


def linear_channels(H: Tensor, W: Tensor) -> Tensor:
    """out[b,c',v,t] = sum_c H[b,c,v,t] * W[c,c']"""
    _require_ndim("linear_channels", "H", H, 4)
    _require_ndim("linear_channels", "W", W, 2)
    _require_extent("linear_channels", "C", H.shape[1], W.shape[0])

    h, w = H.data, W.data
    out = np.ascontiguousarray(np.moveaxis(np.tensordot(h, w, axes=([1], [0])), -1, 1))

    def _backward(g):
        gw = np.tensordot(h, g, axes=([0, 2, 3], [0, 2, 3]))
        gh = np.ascontiguousarray(np.moveaxis(np.tensordot(g, w, axes=([1], [1])), -1, 1))
        return gh, gw

    return _result("linear_channels", out, (H, W), _backward)


# ------------------------------------------------------------------
# Activation, normalization, convolution
# ------------------------------------------------------------------

def prelu(H: Tensor, slope: Tensor) -> Tensor:
    """x for x >= 0, slope * x otherwise; one scalar slope per call site."""
    if slope.size != 1:
        raise ShapeError(f"prelu: slope must hold a single value, got shape {slope.shape}")

    x = H.data
    a = slope.data.reshape(-1)[0]
    positive = x >= 0
    out = np.where(positive, x, a * x)

    def _backward(g):
        gx = np.where(positive, g, a * g)
        gs = np.sum(np.where(positive, 0.0, g * x))
        return gx, np.full(slope.shape, gs, dtype=slope.dtype)

    return _result("prelu", out, (H, slope), _backward)


@dataclass
class RunningStats:
    """Per-channel running mean/variance used by batch_norm in eval mode."""

    mean: np.ndarray
    var: np.ndarray

    @classmethod
    def fresh(cls, channels: int, dtype=np.float64) -> "RunningStats":
        return cls(np.zeros(channels, dtype=dtype), np.ones(channels, dtype=dtype))


def batch_norm(
    H: Tensor,
    scale: Tensor,
    shift: Tensor,
    running_stats: RunningStats,
    train_mode: bool,
    eps: float = BN_EPSILON,
    momentum: float = BN_MOMENTUM,
) -> Tensor:
    """
    Normalize each channel (axis 1) over every other axis.

    Train mode uses batch statistics and updates `running_stats` in place
    (variance tracked unbiased); eval mode uses the running statistics and is a
    fixed affine map of its input.
    """
    if H.ndim < 2:
        raise ShapeError(f"batch_norm: input must have a channel axis, got shape {H.shape}")
    if H.shape[0] == 0:
        raise ShapeError("batch_norm: empty batch", axis="B")
    channels = H.shape[1]
    _require_extent("batch_norm", "C", channels, scale.size, shift.size, running_stats.mean.size)

    x = H.data
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, channels) + (1,) * (x.ndim - 2)
    gamma = scale.data.reshape(bshape)
    beta = shift.data.reshape(bshape)

    if train_mode:
        n = x.size // channels
        mean = x.mean(axis=axes, keepdims=True)
        centered = x - mean
        var = (centered * centered).mean(axis=axes, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat = centered * inv_std

        unbiased = var.reshape(-1) * (n / (n - 1) if n > 1 else 1.0)
        running_stats.mean *= 1.0 - momentum
        running_stats.mean += momentum * mean.reshape(-1)
        running_stats.var *= 1.0 - momentum
        running_stats.var += momentum * unbiased

        def _backward(g):
            g_hat = g * gamma
            gx = (inv_std / n) * (
                n * g_hat
                - g_hat.sum(axis=axes, keepdims=True)
                - x_hat * (g_hat * x_hat).sum(axis=axes, keepdims=True)
            )
            return gx, (g * x_hat).sum(axis=axes).reshape(scale.shape), g.sum(axis=axes).reshape(shift.shape)
    else:
        inv_std = 1.0 / np.sqrt(running_stats.var.reshape(bshape) + eps)
        x_hat = (x - running_stats.mean.reshape(bshape)) * inv_std

        def _backward(g):
            return (
                g * gamma * inv_std,
                (g * x_hat).sum(axis=axes).reshape(scale.shape),
                g.sum(axis=axes).reshape(shift.shape),
            )

    out = gamma * x_hat + beta
    return _result("batch_norm", out, (H, scale, shift), _backward)


def conv2d(H: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """
    2-d cross-correlation with "same" zero padding (unit padding for 3x3).

    H [B, Cin, P, Q], kernel [Cout, Cin, kh, kw] with odd kh/kw, bias [Cout].
    """
    _require_ndim("conv2d", "H", H, 4)
    _require_ndim("conv2d", "kernel", kernel, 4)
    _require_extent("conv2d", "Cin", H.shape[1], kernel.shape[1])
    _require_extent("conv2d", "Cout", kernel.shape[0], bias.size)
    kh, kw = kernel.shape[2], kernel.shape[3]
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d: kernel extents must be odd, got {kh}x{kw}", axis="kernel")

    x, k = H.data, kernel.data
    _, _, p, q = x.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    patches = sliding_window_view(padded, (kh, kw), axis=(2, 3))
    out = np.einsum("bcpqij,ocij->bopq", patches, k, optimize=True)
    out += bias.data.reshape(1, -1, 1, 1)

    def _backward(g):
        gk = np.einsum("bopq,bcpqij->ocij", g, patches, optimize=True)
        gb = g.sum(axis=(0, 2, 3)).reshape(bias.shape)
        gpad = np.zeros_like(padded)
        for i in range(kh):
            for j in range(kw):
                gpad[:, :, i:i + p, j:j + q] += np.einsum("bopq,oc->bcpq", g, k[:, :, i, j], optimize=True)
        return gpad[:, :, ph:ph + p, pw:pw + q], gk, gb

    return _result("conv2d", out, (H, kernel, bias), _backward)


# ------------------------------------------------------------------
# Elementwise and reductions
# ------------------------------------------------------------------

def add(H1: Tensor, H2: Tensor) -> Tensor:
    if H1.shape != H2.shape:
        raise ShapeError(f"add: shapes differ {H1.shape} vs {H2.shape}")

    def _backward(g):
        return g, g

    return _result("add", H1.data + H2.data, (H1, H2), _backward)


def sub(H1: Tensor, H2: Tensor) -> Tensor:
    if H1.shape != H2.shape:
        raise ShapeError(f"sub: shapes differ {H1.shape} vs {H2.shape}")

    def _backward(g):
        return g, -g

    return _result("sub", H1.data - H2.data, (H1, H2), _backward)


def scale(H: Tensor, factor: float) -> Tensor:
    def _backward(g):
        return (g * factor,)

    return _result("scale", H.data * factor, (H,), _backward)


def absolute(H: Tensor) -> Tensor:
    x = H.data

    def _backward(g):
        return (g * np.sign(x),)

    return _result("abs", np.abs(x), (H,), _backward)


def joint_norm(H: Tensor, axis: int) -> Tensor:
    """Euclidean norm over `axis` (removed). Subgradient 0 where the norm is 0."""
    if not -H.ndim <= axis < H.ndim:
        raise ShapeError(f"joint_norm: axis {axis} out of range for shape {H.shape}")
    x = H.data
    norm = np.sqrt(np.sum(x * x, axis=axis))

    def _backward(g):
        expanded_norm = np.expand_dims(norm, axis)
        ratio = np.divide(x, expanded_norm, out=np.zeros_like(x), where=expanded_norm > 0)
        return (np.expand_dims(g, axis) * ratio,)

    return _result("joint_norm", norm, (H,), _backward)


def permute(H: Tensor, axes: Tuple[int, ...]) -> Tensor:
    if sorted(axes) != list(range(H.ndim)):
        raise ShapeError(f"permute: {axes} is not a permutation of {H.ndim} axes")
    inverse = tuple(int(i) for i in np.argsort(axes))

    def _backward(g):
        return (np.ascontiguousarray(np.transpose(g, inverse)),)

    return _result("permute", np.ascontiguousarray(np.transpose(H.data, axes)), (H,), _backward)


def sum_all(H: Tensor) -> Tensor:
    x = H.data

    def _backward(g):
        return (np.full_like(x, g.reshape(-1)[0]),)

    return _result("sum", np.asarray(x.sum(), dtype=x.dtype), (H,), _backward)


def mean_all(H: Tensor) -> Tensor:
    x = H.data
    n = x.size

    def _backward(g):
        return (np.full_like(x, g.reshape(-1)[0] / n),)

    return _result("mean", np.asarray(x.mean(), dtype=x.dtype), (H,), _backward)


def constant(data, dtype=None) -> Tensor:
    """Wrap an array as a non-differentiable Tensor."""
    return Tensor(data, requires_grad=False, dtype=dtype)


def parameter(data, name: Optional[str] = None, dtype=None) -> Tensor:
    """Wrap an array as a trainable leaf Tensor (copied)."""
    return Tensor(np.array(data, dtype=dtype), requires_grad=True, name=name)
