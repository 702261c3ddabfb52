"""Composite blocks as pure functions of (input, parameter dict).

Every block has two halves:

* ``<block>_layers(c1, h, w, ...)`` lists the convolutions it owns as
  :class:`ConvLayer` records (name, spec, activation, input size). Weight
  allocation and the cost model both read this list.
* ``<block>(x, params, ...)`` runs the forward pass. ``params`` maps
  ``"<layer>.weight"`` / ``"<layer>.bias"`` to arrays; nested blocks use
  dotted prefixes (``"gsb.gs1.sc.weight"``).

A "conv block" is convolution + bias + SiLU. Batch norm is assumed folded
into the bias.
"""

from math import isqrt
from typing import NamedTuple

import numpy as np

from ..exceptions import ConfigError, ShapeError
from ..tensor import (
    ConvSpec,
    add,
    channel_shuffle,
    concat_channels,
    conv2d,
    maxpool2d,
    silu,
    split_channels,
    upsample2x_nearest,
)
from ..validation import check_even, check_odd_kernel, check_positive_int, check_tensor

GROUP_DIVISOR = 16


class ConvLayer(NamedTuple):
    name: str
    spec: ConvSpec
    act: bool
    in_hw: tuple

    @property
    def out_hw(self):
        return self.spec.output_hw(*self.in_hw)


def _prefixed(prefix, layers):
    return [l._replace(name=f"{prefix}.{l.name}") for l in layers]


def subparams(params, prefix):
    """Strip ``prefix.`` from the keys that carry it."""
    p = prefix + "."
    return {k[len(p):]: v for k, v in params.items() if k.startswith(p)}


def param_shapes(layers):
    """Ordered ``name -> shape`` for every weight and bias in ``layers``."""
    shapes = {}
    for layer in layers:
        shapes[layer.name + ".weight"] = layer.spec.weight_shape
        if layer.spec.bias:
            shapes[layer.name + ".bias"] = (layer.spec.c2,)
    return shapes


def init_params(layers, random_state):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases."""
    params = {}
    for layer in layers:
        s = layer.spec
        bound = 1.0 / np.sqrt((s.c1 // s.groups) * s.k * s.k)
        params[layer.name + ".weight"] = random_state.uniform(-bound, bound, s.weight_shape)
        if s.bias:
            params[layer.name + ".bias"] = random_state.uniform(-bound, bound, s.c2)
    return params


def count_allocated(params):
    return int(sum(np.asarray(v).size for v in params.values()))


def conv_block(x, params, name, *, stride=1, groups=1, act=True):
    """Convolution named ``name``, optionally followed by SiLU."""
    try:
        weight = params[name + ".weight"]
    except KeyError:
        raise ShapeError(f"missing parameter {name}.weight", dim=name) from None
    y = conv2d(x, weight, params.get(name + ".bias"), stride=stride, groups=groups)
    return silu(y) if act else y


# -- plain conv ---------------------------------------------------------------

def conv_layers(c1, h, w, c2, k=1, s=1, g=1, bias=True, act=True):
    return [ConvLayer("conv", ConvSpec(c1, c2, k, s, groups=g, bias=bias), act, (h, w))]


def conv(x, params, s=1, g=1, act=True, **_):
    return conv_block(x, params, "conv", stride=s, groups=g, act=act)


# -- GhostConv ----------------------------------------------------------------

def ghost_conv_layers(c1, h, w, c2, k_m=3, k_c=5, s=1, bias=True):
    c2 = check_even(c2, "c2")
    check_odd_kernel(k_m, "k_m")
    check_odd_kernel(k_c, "k_c")
    half = c2 // 2
    primary = ConvLayer("primary", ConvSpec(c1, half, k_m, s, bias=bias), True, (h, w))
    cheap = ConvLayer("cheap", ConvSpec(half, half, k_c, groups=half, bias=bias), True, primary.out_hw)
    return [primary, cheap]


def ghost_conv(x, params, s=1, **_):
    """Dense primary conv to c2/2, depthwise ghost conv on it, concatenated."""
    primary = conv_block(x, params, "primary", stride=s)
    cheap = conv_block(primary, params, "cheap", groups=primary.shape[1])
    return concat_channels([primary, cheap])


# -- GSConv / GSBottleneck / VoVGSCSPC ---------------------------------------

def gs_conv_layers(c1, h, w, c2, k=3, dw_k=3, s=1, bias=True):
    c2 = check_even(c2, "c2")
    half = c2 // 2
    sc = ConvLayer("sc", ConvSpec(c1, half, k, s, bias=bias), True, (h, w))
    dw = ConvLayer("dw", ConvSpec(half, half, dw_k, groups=half, bias=bias), True, sc.out_hw)
    return [sc, dw]


def gs_conv(x, params, s=1, **_):
    y1 = conv_block(x, params, "sc", stride=s)
    y2 = conv_block(y1, params, "dw", groups=y1.shape[1])
    return channel_shuffle(concat_channels([y1, y2]), 2)


def gs_bottleneck_layers(c1, h, w, bias=True):
    half = check_even(c1, "C1") // 2
    if half % 2:
        raise ConfigError(f"C1={c1}: the inner GSConv width C1/2 must be even")
    return [
        ConvLayer("cv1", ConvSpec(c1, half, 1, bias=bias), True, (h, w)),
        *_prefixed("gs1", gs_conv_layers(half, h, w, half, bias=bias)),
        *_prefixed("gs2", gs_conv_layers(half, h, w, half, bias=bias)),
        ConvLayer("shortcut", ConvSpec(c1, half, 1, bias=bias), True, (h, w)),
    ]


def gs_bottleneck(x, params, **_):
    """Two GSConvs after a 1x1 projection to C1/2, plus a projected shortcut."""
    x = check_tensor(x)
    check_even(x.shape[1], "C1")
    main = conv_block(x, params, "cv1")
    main = gs_conv(main, subparams(params, "gs1"))
    main = gs_conv(main, subparams(params, "gs2"))
    return add(main, conv_block(x, params, "shortcut"))


def vov_gscspc_layers(c1, h, w, c2, bias=True):
    half = check_even(c1, "C1") // 2
    return [
        *_prefixed("gsb", gs_bottleneck_layers(c1, h, w, bias=bias)),
        ConvLayer("cv2", ConvSpec(c1, half, 1, bias=bias), True, (h, w)),
        ConvLayer("cv3", ConvSpec(c1, c2, 1, bias=bias), True, (h, w)),
    ]


def vov_gscspc(x, params, **_):
    x = check_tensor(x)
    check_even(x.shape[1], "C1")
    a = gs_bottleneck(x, subparams(params, "gsb"))
    b = conv_block(x, params, "cv2")
    return conv_block(concat_channels([a, b]), params, "cv3")


# -- YOLOv11n baseline stand-ins ---------------------------------------------

def _bottleneck_layers(c1, c2, h, w, e, bias):
    hidden = int(c2 * e)
    return [
        ConvLayer("cv1", ConvSpec(c1, hidden, 3, bias=bias), True, (h, w)),
        ConvLayer("cv2", ConvSpec(hidden, c2, 3, bias=bias), True, (h, w)),
    ]


def _bottleneck(x, params, shortcut):
    y = conv_block(conv_block(x, params, "cv1"), params, "cv2")
    return x + y if shortcut and y.shape == x.shape else y


def _c3k_layers(c, h, w, bias):
    hidden = int(c * 0.5)
    layers = [
        ConvLayer("cv1", ConvSpec(c, hidden, 1, bias=bias), True, (h, w)),
        ConvLayer("cv2", ConvSpec(c, hidden, 1, bias=bias), True, (h, w)),
        ConvLayer("cv3", ConvSpec(2 * hidden, c, 1, bias=bias), True, (h, w)),
    ]
    for j in range(2):
        layers += _prefixed(f"m{j}", _bottleneck_layers(hidden, hidden, h, w, 1.0, bias))
    return layers


def _c3k(x, params, shortcut):
    y = conv_block(x, params, "cv1")
    for j in range(2):
        y = _bottleneck(y, subparams(params, f"m{j}"), shortcut)
    return conv_block(concat_channels([y, conv_block(x, params, "cv2")]), params, "cv3")


def c3k2_layers(c1, h, w, c2, n=1, c3k=False, e=0.5, shortcut=True, bias=True):
    c = int(c2 * e)
    if c < 1:
        raise ConfigError(f"c3k2 hidden width int({c2} * {e}) must be >= 1")
    n = check_positive_int(n, "n")
    layers = [
        ConvLayer("cv1", ConvSpec(c1, 2 * c, 1, bias=bias), True, (h, w)),
        ConvLayer("cv2", ConvSpec((2 + n) * c, c2, 1, bias=bias), True, (h, w)),
    ]
    for i in range(n):
        inner = _c3k_layers(c, h, w, bias) if c3k else _bottleneck_layers(c, c, h, w, 0.5, bias)
        layers += _prefixed(f"m{i}", inner)
    return layers


def c3k2(x, params, n=1, c3k=False, shortcut=True, **_):
    """CSP block with ``n`` bottlenecks (or C3k sub-blocks) on a split path."""
    y0 = conv_block(x, params, "cv1")
    ys = split_channels(y0, [y0.shape[1] // 2] * 2)
    for i in range(n):
        sub = subparams(params, f"m{i}")
        ys.append(_c3k(ys[-1], sub, shortcut) if c3k else _bottleneck(ys[-1], sub, shortcut))
    return conv_block(concat_channels(ys), params, "cv2")


def sppf_layers(c1, h, w, c2, k=5, bias=True):
    hidden = c1 // 2
    return [
        ConvLayer("cv1", ConvSpec(c1, hidden, 1, bias=bias), True, (h, w)),
        ConvLayer("cv2", ConvSpec(4 * hidden, c2, 1, bias=bias), True, (h, w)),
    ]


def sppf(x, params, k=5, **_):
    ys = [conv_block(x, params, "cv1")]
    for _ in range(3):
        ys.append(maxpool2d(ys[-1], k, stride=1, padding=k // 2))
    return conv_block(concat_channels(ys), params, "cv2")


def _attention_dims(c):
    heads = max(1, c // 64)
    head_dim = c // heads
    key_dim = int(head_dim * 0.5)
    return heads, head_dim, key_dim


def c2psa_layers(c1, h, w, c2=None, n=1, e=0.5, bias=True):
    c2 = c1 if c2 is None else c2
    if c2 != c1:
        raise ConfigError(f"c2psa_proxy keeps width: c2={c2} must equal c1={c1}")
    c = int(c1 * e)
    heads, head_dim, key_dim = _attention_dims(c)
    qkv_width = c + 2 * key_dim * heads
    layers = [
        ConvLayer("cv1", ConvSpec(c1, 2 * c, 1, bias=bias), True, (h, w)),
        ConvLayer("cv2", ConvSpec(2 * c, c1, 1, bias=bias), True, (h, w)),
    ]
    for i in range(check_positive_int(n, "n")):
        layers += [
            ConvLayer(f"m{i}.qkv", ConvSpec(c, qkv_width, 1, bias=bias), False, (h, w)),
            ConvLayer(f"m{i}.proj", ConvSpec(c, c, 1, bias=bias), False, (h, w)),
            ConvLayer(f"m{i}.pe", ConvSpec(c, c, 3, groups=c, bias=bias), False, (h, w)),
            ConvLayer(f"m{i}.ffn1", ConvSpec(c, 2 * c, 1, bias=bias), True, (h, w)),
            ConvLayer(f"m{i}.ffn2", ConvSpec(2 * c, c, 1, bias=bias), False, (h, w)),
        ]
    return layers


def _attention(x, params):
    b, c, h, w = x.shape
    heads, head_dim, key_dim = _attention_dims(c)
    qkv = conv_block(x, params, "qkv", act=False).reshape(b, heads, 2 * key_dim + head_dim, h * w)
    q, k, v = np.split(qkv, [key_dim, 2 * key_dim], axis=2)
    logits = np.swapaxes(q, 2, 3) @ k * key_dim**-0.5
    logits -= logits.max(axis=-1, keepdims=True)
    attn = np.exp(logits)
    attn /= attn.sum(axis=-1, keepdims=True)
    v_map = v.reshape(b, c, h, w)
    y = (v @ np.swapaxes(attn, 2, 3)).reshape(b, c, h, w)
    y = y + conv_block(v_map, params, "pe", groups=c, act=False)
    return conv_block(y, params, "proj", act=False)


def c2psa(x, params, n=1, **_):
    """Position-sensitive attention block; attention matmuls carry no weights."""
    y = conv_block(x, params, "cv1")
    a, b = split_channels(y, [y.shape[1] // 2] * 2)
    for i in range(n):
        sub = subparams(params, f"m{i}")
        b = b + _attention(b, sub)
        b = b + conv_block(conv_block(b, sub, "ffn1"), sub, "ffn2", act=False)
    return conv_block(concat_channels([a, b]), params, "cv2")


def upsample(x, params=None, **_):
    return upsample2x_nearest(x)


# -- detection heads ----------------------------------------------------------

def ledh_groups(channels, divisor=GROUP_DIVISOR):
    """Group count ``channels / divisor``, rounded down to a divisor of ``channels``.

    Returns ``(groups, adjusted)``.
    """
    channels = check_positive_int(channels, "c_i")
    if channels < divisor:
        raise ConfigError(f"LEDH input has {channels} channels, needs >= {divisor}")
    target = channels // divisor
    if channels % divisor == 0:
        return target, False
    best = 1
    for d in range(1, isqrt(channels) + 1):
        if channels % d == 0:
            for cand in (d, channels // d):
                if cand <= target:
                    best = max(best, cand)
    return best, True


def ledh_head_layers(levels, nc, r=16, d=GROUP_DIVISOR, bias=True):
    """``levels`` is a list of (c_i, h_i, w_i) per pyramid level."""
    nc = check_positive_int(nc, "nc")
    r = check_positive_int(r, "r")
    layers = []
    for i, (c, h, w) in enumerate(levels):
        g, _ = ledh_groups(c, d)
        layers += [
            ConvLayer(f"l{i}.g1", ConvSpec(c, c, 3, groups=g, bias=bias), True, (h, w)),
            ConvLayer(f"l{i}.g2", ConvSpec(c, c, 3, groups=g, bias=bias), True, (h, w)),
            ConvLayer(f"l{i}.reg", ConvSpec(c, 4 * r, 1, bias=True), False, (h, w)),
            ConvLayer(f"l{i}.cls", ConvSpec(c, nc, 1, bias=True), False, (h, w)),
        ]
    return layers


def ledh_head(features, params, d=GROUP_DIVISOR, **_):
    """Shared two-layer grouped-conv stack per level, then 1x1 box and class branches.

    Returns one (n, 4r + nc, h, w) map per level.
    """
    if len(features) != 4:
        raise ConfigError(f"LEDH expects 4 pyramid levels (P2-P5), got {len(features)}")
    _check_halving(features)
    outputs = []
    for i, x in enumerate(features):
        sub = subparams(params, f"l{i}")
        g, _ = ledh_groups(x.shape[1], d)
        shared = conv_block(conv_block(x, sub, "g1", groups=g), sub, "g2", groups=g)
        reg = conv_block(shared, sub, "reg", act=False)
        cls = conv_block(shared, sub, "cls", act=False)
        outputs.append(concat_channels([reg, cls]))
    return outputs


def plain_head_widths(first_channels, nc, r=16, reg_ch=None, cls_ch=None):
    """Default branch widths of the YOLOv8/11 decoupled head."""
    if reg_ch is None:
        reg_ch = max(16, first_channels // 4, 4 * r)
    if cls_ch is None:
        cls_ch = max(first_channels, min(nc, 100))
    return reg_ch, cls_ch


def plain_head_layers(levels, nc, r=16, reg_ch=None, cls_ch=None, cls_dw=True, bias=True):
    """Baseline decoupled head: separate box and class conv stacks per level.

    With ``cls_dw`` the class branch uses the YOLOv11 depthwise + pointwise
    pairs; otherwise both branches are two dense 3x3 convs.
    """
    nc = check_positive_int(nc, "nc")
    r = check_positive_int(r, "r")
    reg_ch, cls_ch = plain_head_widths(levels[0][0], nc, r, reg_ch, cls_ch)
    layers = []
    for i, (c, h, w) in enumerate(levels):
        hw = (h, w)
        layers += [
            ConvLayer(f"l{i}.reg1", ConvSpec(c, reg_ch, 3, bias=bias), True, hw),
            ConvLayer(f"l{i}.reg2", ConvSpec(reg_ch, reg_ch, 3, bias=bias), True, hw),
            ConvLayer(f"l{i}.reg", ConvSpec(reg_ch, 4 * r, 1, bias=True), False, hw),
        ]
        if cls_dw:
            layers += [
                ConvLayer(f"l{i}.cls1dw", ConvSpec(c, c, 3, groups=c, bias=bias), True, hw),
                ConvLayer(f"l{i}.cls1", ConvSpec(c, cls_ch, 1, bias=bias), True, hw),
                ConvLayer(f"l{i}.cls2dw", ConvSpec(cls_ch, cls_ch, 3, groups=cls_ch, bias=bias), True, hw),
                ConvLayer(f"l{i}.cls2", ConvSpec(cls_ch, cls_ch, 1, bias=bias), True, hw),
            ]
        else:
            layers += [
                ConvLayer(f"l{i}.cls1", ConvSpec(c, cls_ch, 3, bias=bias), True, hw),
                ConvLayer(f"l{i}.cls2", ConvSpec(cls_ch, cls_ch, 3, bias=bias), True, hw),
            ]
        layers.append(ConvLayer(f"l{i}.cls", ConvSpec(cls_ch, nc, 1, bias=True), False, hw))
    return layers


def plain_head(features, params, cls_dw=True, **_):
    if not features:
        raise ConfigError("plain_head needs at least one level")
    _check_halving(features)
    outputs = []
    for i, x in enumerate(features):
        sub = subparams(params, f"l{i}")
        reg = conv_block(conv_block(conv_block(x, sub, "reg1"), sub, "reg2"), sub, "reg", act=False)
        if cls_dw:
            cls = conv_block(x, sub, "cls1dw", groups=x.shape[1])
            cls = conv_block(cls, sub, "cls1")
            cls = conv_block(cls, sub, "cls2dw", groups=cls.shape[1])
            cls = conv_block(cls, sub, "cls2")
        else:
            cls = conv_block(conv_block(x, sub, "cls1"), sub, "cls2")
        outputs.append(concat_channels([reg, conv_block(cls, sub, "cls", act=False)]))
    return outputs


def _check_halving(features):
    for i in range(1, len(features)):
        (h0, w0), (h1, w1) = np.shape(features[i - 1])[2:], np.shape(features[i])[2:]
        if h0 != 2 * h1 or w0 != 2 * w1:
            raise ShapeError(
                f"level {i} is {h1}x{w1}; expected half of level {i - 1} ({h0}x{w0})",
                dim="height",
            )
