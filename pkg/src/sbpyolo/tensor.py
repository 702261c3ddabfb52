"""Forward-only dense tensor primitives on (n, c, h, w) float64 arrays.

Tensors are plain ``numpy.ndarray`` objects; every op validates its inputs
with :func:`sbpyolo.validation.check_tensor` and returns a new array.
Convolutions are cross-correlations with zero padding.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import ConfigError, ShapeError
from .validation import check_positive_int, check_tensor

__all__ = [
    "ConvSpec",
    "conv2d",
    "conv_output_size",
    "depthwise_conv2d",
    "channel_shuffle",
    "shuffle_permutation",
    "concat_channels",
    "split_channels",
    "add",
    "upsample2x_nearest",
    "silu",
    "sigmoid",
    "maxpool2d",
]


@dataclass(frozen=True)
class ConvSpec:
    """Static description of one convolution layer."""

    c1: int
    c2: int
    k: int = 1
    stride: int = 1
    padding: int = None
    groups: int = 1
    bias: bool = False

    def __post_init__(self):
        for name in ("c1", "c2", "k", "stride", "groups"):
            check_positive_int(getattr(self, name), name)
        if self.padding is None:
            object.__setattr__(self, "padding", self.k // 2)
        check_positive_int(self.padding, "padding", minimum=0)
        if self.c1 % self.groups or self.c2 % self.groups:
            raise ConfigError(
                f"channels ({self.c1} -> {self.c2}) not divisible by groups={self.groups}"
            )

    @property
    def weight_shape(self):
        return (self.c2, self.c1 // self.groups, self.k, self.k)

    def output_hw(self, h, w):
        return (
            conv_output_size(h, self.k, self.stride, self.padding),
            conv_output_size(w, self.k, self.stride, self.padding),
        )


def conv_output_size(size, k, stride=1, padding=0):
    return (size + 2 * padding - k) // stride + 1


def _check_weight(x, weight, bias, groups):
    weight = np.asarray(weight, dtype=np.float64)
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ShapeError(
            f"weight must be (c2, c1/groups, k, k), got {weight.shape}", dim="weight"
        )
    c2, c1g = weight.shape[:2]
    c1 = x.shape[1]
    check_positive_int(groups, "groups")
    if c1 % groups or c2 % groups:
        raise ConfigError(f"channels ({c1} -> {c2}) not divisible by groups={groups}")
    if c1g * groups != c1:
        raise ShapeError(
            f"input has {c1} channels but weight expects {c1g * groups} "
            f"({c1g} per group x {groups} groups)",
            dim="channels",
        )
    if bias is not None:
        bias = np.asarray(bias, dtype=np.float64)
        if bias.shape != (c2,):
            raise ShapeError(f"bias must have shape ({c2},), got {bias.shape}", dim="bias")
    return weight, bias


def conv2d(x, weight, bias=None, *, stride=1, padding=None, groups=1):
    """2D cross-correlation.

    ``weight`` has shape (c2, c1 / groups, k, k); ``padding`` defaults to
    ``k // 2``.
    """
    x = check_tensor(x)
    weight, bias = _check_weight(x, weight, bias, groups)
    stride = check_positive_int(stride, "stride")
    c2, c1g, k, _ = weight.shape
    pad = k // 2 if padding is None else check_positive_int(padding, "padding", 0)
    n, c1, h, w = x.shape
    ho, wo = conv_output_size(h, k, stride, pad), conv_output_size(w, k, stride, pad)
    if ho < 1 or wo < 1:
        raise ShapeError(
            f"kernel {k} with padding {pad} does not fit input {h}x{w}", dim="height"
        )
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x

    if c1g == 1 and c2 == groups:
        out = _depthwise(xp, weight, stride, ho, wo)
    else:
        # (n, c1, ho, wo, k, k) view; no copy until the contraction
        win = sliding_window_view(xp, (k, k), axis=(2, 3))
        win = win[:, :, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]
        if groups == 1:
            out = np.tensordot(win, weight, axes=([1, 4, 5], [1, 2, 3]))
            out = out.transpose(0, 3, 1, 2)
        else:
            win = win.reshape(n, groups, c1g, ho, wo, k, k)
            wg = weight.reshape(groups, c2 // groups, c1g, k, k)
            out = np.einsum("ngchwij,gocij->ngohw", win, wg, optimize=True)
            out = out.reshape(n, c2, ho, wo)
    out = np.ascontiguousarray(out)
    if bias is not None:
        out += bias[None, :, None, None]
    return out


def _depthwise(xp, weight, stride, ho, wo):
    k = weight.shape[-1]
    out = np.zeros((xp.shape[0], weight.shape[0], ho, wo))
    for i in range(k):
        for j in range(k):
            tap = xp[:, :, i : i + (ho - 1) * stride + 1 : stride, j : j + (wo - 1) * stride + 1 : stride]
            out += tap * weight[None, :, 0, i, j, None, None]
    return out


def depthwise_conv2d(x, weight, bias=None, *, stride=1, padding=None):
    """One k x k filter per channel; ``weight`` is (c, 1, k, k)."""
    x = check_tensor(x)
    weight = np.asarray(weight, dtype=np.float64)
    if weight.ndim != 4 or weight.shape[0] != x.shape[1] or weight.shape[1] != 1:
        raise ShapeError(
            f"depthwise weight must be ({x.shape[1]}, 1, k, k), got {weight.shape}",
            dim="weight",
        )
    return conv2d(x, weight, bias, stride=stride, padding=padding, groups=x.shape[1])


def shuffle_permutation(channels, groups):
    """Source channel index for each output channel of a channel shuffle."""
    channels = check_positive_int(channels, "channels")
    groups = check_positive_int(groups, "groups")
    if channels % groups:
        raise ConfigError(f"{channels} channels not divisible by groups={groups}")
    per_group = channels // groups
    j = np.arange(channels)
    return (j % groups) * per_group + j // groups


def channel_shuffle(x, groups):
    """Interleave channel groups: output j takes input (j % g) * (c / g) + j // g."""
    x = check_tensor(x)
    return x[:, shuffle_permutation(x.shape[1], groups)]


def concat_channels(xs):
    xs = [check_tensor(x, name=f"xs[{i}]") for i, x in enumerate(xs)]
    if not xs:
        raise ShapeError("concat_channels needs at least one tensor", dim="count")
    n, _, h, w = xs[0].shape
    for i, x in enumerate(xs[1:], 1):
        for axis, a, b in (("batch", n, x.shape[0]), ("height", h, x.shape[2]), ("width", w, x.shape[3])):
            if a != b:
                raise ShapeError(f"xs[{i}] {axis} is {b}, xs[0] has {a}", dim=axis)
    return np.concatenate(xs, axis=1)


def split_channels(x, sizes):
    """Inverse of :func:`concat_channels` for the given channel counts."""
    x = check_tensor(x)
    if sum(sizes) != x.shape[1]:
        raise ShapeError(f"split sizes {sizes} do not sum to {x.shape[1]}", dim="channels")
    return np.split(x, np.cumsum(sizes)[:-1], axis=1)


def add(x, y):
    x, y = check_tensor(x), check_tensor(y, name="y")
    if x.shape != y.shape:
        dim = next(a for a, p, q in zip(("batch", "channels", "height", "width"), x.shape, y.shape) if p != q)
        raise ShapeError(f"cannot add shapes {x.shape} and {y.shape}", dim=dim)
    return x + y


def upsample2x_nearest(x):
    x = check_tensor(x)
    return x.repeat(2, axis=2).repeat(2, axis=3)


def sigmoid(v):
    v = np.asarray(v, dtype=np.float64)
    # split by sign so neither branch overflows
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def silu(v):
    v = np.asarray(v, dtype=np.float64)
    return v * sigmoid(v)


def maxpool2d(x, k, stride=None, padding=0):
    """Max pooling; padded cells are -inf so they never win."""
    x = check_tensor(x)
    k = check_positive_int(k, "k")
    stride = k if stride is None else check_positive_int(stride, "stride")
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)), constant_values=-np.inf)
    h, w = x.shape[2:]
    if h < k or w < k:
        raise ShapeError(f"pool window {k} larger than padded input {h}x{w}", dim="height")
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    return np.ascontiguousarray(win.max(axis=(4, 5)))
