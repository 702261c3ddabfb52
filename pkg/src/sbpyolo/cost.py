"""Static parameter / FLOP accounting for convolution graphs.

Headline FLOPs count one multiply-accumulate as 2 FLOPs. Only convolutions
cost anything: activations, pooling, upsampling, concatenation, residual
adds and the attention matmuls of the C2PSA stand-in are bookkeeping.
Bias adds are kept out of the headline and reported separately.
"""

from dataclasses import dataclass, field

from .blocks import functional as F
from .exceptions import GraphShapeError
from .graph.weights import graph_layers
from .validation import check_even, check_odd_kernel, check_positive_int


@dataclass(frozen=True)
class GhostSpec:
    c1: int
    c2: int
    k_m: int = 3
    k_c: int = 5
    stride: int = 1

    def __post_init__(self):
        check_positive_int(self.c1, "c1")
        check_even(self.c2, "c2")
        check_odd_kernel(self.k_m, "k_m")
        check_odd_kernel(self.k_c, "k_c")
        check_positive_int(self.stride, "stride")


def count_conv(spec, h, w, include_bias_flops=True):
    """``(params, flops)`` of ``spec`` producing an ``h`` x ``w`` map."""
    macs_per_pixel = (spec.c1 // spec.groups) * spec.c2 * spec.k * spec.k
    params = macs_per_pixel + (spec.c2 if spec.bias else 0)
    flops = 2 * macs_per_pixel * h * w
    if spec.bias and include_bias_flops:
        flops += spec.c2 * h * w
    return params, flops


def count_ghost(spec, h, w):
    """Ghost-conv cost at output size ``h`` x ``w`` (bias-free).

    Params ``c1 * c2/2 * k_m^2 + c2/2 * k_c^2``; FLOPs are twice the
    corresponding multiply-accumulates.
    """
    half = spec.c2 // 2
    params = spec.c1 * half * spec.k_m**2 + half * spec.k_c**2
    flops = 2 * spec.c1 * half * h * w * spec.k_m**2 + 2 * half * h * w * spec.k_c**2
    return params, flops


@dataclass(frozen=True)
class LayerCost:
    id: int
    kind: str
    params: int
    flops: int

    @property
    def macs(self):
        return self.flops // 2


@dataclass
class CostReport:
    per_layer: list
    input_shape: tuple
    bias_flops: int = 0
    notes: list = field(default_factory=list)

    @property
    def params(self):
        return sum(l.params for l in self.per_layer)

    @property
    def flops(self):
        """Total FLOPs, 1 MAC = 2 FLOPs."""
        return sum(l.flops for l in self.per_layer)

    @property
    def macs(self):
        """Total multiply-accumulates (the 1 MAC = 1 FLOP convention)."""
        return sum(l.macs for l in self.per_layer)

    @property
    def totals(self):
        return self.params, self.flops

    def gflops(self, convention="2mac"):
        return (self.flops if convention == "2mac" else self.macs) / 1e9


def analyze(graph):
    """Walk a shaped graph and cost every node."""
    if not graph.shaped:
        raise GraphShapeError("analyze needs a shaped graph; run infer_shapes first")
    per_layer, notes, bias_flops = [], [], 0
    layers = graph_layers(graph)
    for node in graph.nodes:
        params = flops = 0
        for layer in layers[node.id]:
            h, w = layer.out_hw
            p, f = count_conv(layer.spec, h, w, include_bias_flops=False)
            params += p
            flops += f
            if layer.spec.bias:
                bias_flops += layer.spec.c2 * h * w
        per_layer.append(LayerCost(node.id, node.kind, params, flops))
        if node.kind == "ledh_head":
            for i, ref in enumerate(node.inputs):
                c = graph.shape_of(ref)[0]
                g, adjusted = F.ledh_groups(c, node.args["d"])
                if adjusted:
                    notes.append(
                        f"node {node.id} level {i}: {c} channels not divisible by {node.args['d']}, using {g} groups"
                    )
        if node.kind == "c2psa_proxy":
            notes.append(f"node {node.id}: attention matmuls not counted (weight-free)")
    notes.append(f"bias adds excluded from headline FLOPs: {bias_flops}")
    return CostReport(per_layer, tuple(graph.input_shape), bias_flops, notes)


def format_report(report):
    """Machine-readable report: header, ``id kind params flops`` lines, totals."""
    c, h, w = report.input_shape
    lines = [
        f"# input {c}x{h}x{w} flops: 1 MAC = 2 FLOPs (bias adds excluded)",
        "# id kind params flops",
    ]
    lines += [f"{l.id} {l.kind} {l.params} {l.flops}" for l in report.per_layer]
    lines += [
        f"total params {report.params}",
        f"total flops {report.flops}",
        f"total flops_1mac {report.macs}",
        f"total bias_flops {report.bias_flops}",
    ]
    lines += [f"# note {n}" for n in report.notes]
    return "\n".join(lines) + "\n"


def format_table(report):
    c, h, w = report.input_shape
    rows = [f"{'id':>4}  {'kind':<14} {'params':>12} {'GFLOPs':>10}"]
    rows += [f"{l.id:>4}  {l.kind:<14} {l.params:>12,} {l.flops / 1e9:>10.4f}" for l in report.per_layer]
    rows += [
        "",
        f"input {c}x{h}x{w}",
        f"params        {report.params:,} ({report.params / 1e6:.3f} M)",
        f"GFLOPs (2/MAC) {report.gflops('2mac'):.3f}",
        f"GFLOPs (1/MAC) {report.gflops('1mac'):.3f}",
    ]
    return "\n".join(rows) + "\n"
