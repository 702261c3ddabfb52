"""Layer kinds understood by the config parser.

Each kind declares its argument schema, how many inputs it takes, its
static output shape rule, its convolution list and its forward function.
"""

from dataclasses import dataclass, field
from typing import Callable

from ..blocks import functional as F
from ..exceptions import ConfigError
from ..tensor import conv_output_size

REQUIRED = object()


@dataclass(frozen=True)
class Kind:
    name: str
    schema: dict
    layers: Callable = None
    forward: Callable = None
    multi_input: bool = False
    head: bool = False
    # maps config argument names onto keyword names of the functional API
    rename: dict = field(default_factory=dict)

    def call_args(self, args):
        return {self.rename.get(k, k): v for k, v in args.items()}


def _conv_shape(c, h, w, args, kernel_key="k"):
    k, s = args[kernel_key], args.get("s", 1)
    return (args["c2"], conv_output_size(h, k, s, k // 2), conv_output_size(w, k, s, k // 2))


def output_shape(kind, in_shapes, args):
    """Static output shape; heads return a tuple of per-level shapes."""
    c, h, w = in_shapes[0]
    name = kind.name
    if name in ("conv", "ghost_conv", "gs_conv"):
        return _conv_shape(c, h, w, args)
    if name == "gs_bottleneck":
        return (c // 2, h, w)
    if name in ("vov_gscspc", "c3k2_proxy", "sppf_proxy"):
        return (args["c2"], h, w)
    if name == "c2psa_proxy":
        return (c, h, w)
    if name == "upsample":
        return (c, 2 * h, 2 * w)
    if name == "concat":
        return (sum(s[0] for s in in_shapes), h, w)
    if name in ("ledh_head", "plain_head"):
        width = 4 * args["r"] + args["nc"]
        return tuple((width, lh, lw) for _, lh, lw in in_shapes)
    raise ConfigError(f"no shape rule for kind {name}")


def _single(fn):
    def layers(in_shapes, **kw):
        return fn(*in_shapes[0], **kw)

    return layers


def _no_layers(in_shapes, **kw):
    return []


def _concat_forward(inputs, params, **kw):
    from ..tensor import concat_channels

    return concat_channels(inputs)


def _unary(fn):
    def forward(inputs, params, **kw):
        return fn(inputs[0], params, **kw)

    return forward


def _head(fn):
    def forward(inputs, params, **kw):
        return fn(list(inputs), params, **kw)

    return forward


def _head_layers(fn):
    def layers(in_shapes, **kw):
        return fn(list(in_shapes), **kw)

    return layers


BIAS = {"bias": True}

KINDS = {
    k.name: k
    for k in [
        Kind(
            "conv",
            {"c2": REQUIRED, "k": 1, "s": 1, "g": 1, **BIAS, "act": True},
            _single(F.conv_layers),
            _unary(F.conv),
        ),
        Kind(
            "ghost_conv",
            {"c2": REQUIRED, "k": 3, "kc": 5, "s": 1, **BIAS},
            _single(F.ghost_conv_layers),
            _unary(F.ghost_conv),
            rename={"k": "k_m", "kc": "k_c"},
        ),
        Kind(
            "gs_conv",
            {"c2": REQUIRED, "k": 3, "dwk": 3, "s": 1, **BIAS},
            _single(F.gs_conv_layers),
            _unary(F.gs_conv),
            rename={"dwk": "dw_k"},
        ),
        Kind("gs_bottleneck", {**BIAS}, _single(F.gs_bottleneck_layers), _unary(F.gs_bottleneck)),
        Kind("vov_gscspc", {"c2": REQUIRED, **BIAS}, _single(F.vov_gscspc_layers), _unary(F.vov_gscspc)),
        Kind(
            "c3k2_proxy",
            {"c2": REQUIRED, "n": 1, "c3k": False, "e": 0.5, "shortcut": True, **BIAS},
            _single(F.c3k2_layers),
            _unary(F.c3k2),
        ),
        Kind("sppf_proxy", {"c2": REQUIRED, "k": 5, **BIAS}, _single(F.sppf_layers), _unary(F.sppf)),
        Kind("c2psa_proxy", {"n": 1, "e": 0.5, **BIAS}, _single(F.c2psa_layers), _unary(F.c2psa)),
        Kind("upsample", {"scale": 2}, _no_layers, _unary(F.upsample)),
        Kind("concat", {}, _no_layers, _concat_forward, multi_input=True),
        Kind(
            "ledh_head",
            {"nc": REQUIRED, "r": 16, "d": F.GROUP_DIVISOR},
            _head_layers(F.ledh_head_layers),
            _head(F.ledh_head),
            multi_input=True,
            head=True,
        ),
        Kind(
            "plain_head",
            {"nc": REQUIRED, "r": 16, "reg_ch": None, "cls_ch": None, "cls_dw": True},
            _head_layers(F.plain_head_layers),
            _head(F.plain_head),
            multi_input=True,
            head=True,
        ),
    ]
}

# argument types, used for parse-time validation
ARG_TYPES = {
    "c2": int, "k": int, "s": int, "g": int, "kc": int, "dwk": int, "n": int, "scale": int,
    "nc": int, "r": int, "d": int, "reg_ch": int, "cls_ch": int,
    "e": float,
    "bias": bool, "act": bool, "c3k": bool, "shortcut": bool, "cls_dw": bool,
}
