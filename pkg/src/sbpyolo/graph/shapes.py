"""Static shape inference over an :class:`ArchGraph`."""

from dataclasses import replace

from ..exceptions import ConfigError, GraphShapeError, ShapeError
from .config import INPUT, ArchGraph
from .kinds import KINDS, output_shape


def _producer(ref):
    return "input" if ref == INPUT else f"node {ref}"


def node_layers(kind, in_shapes, args):
    return kind.layers(in_shapes, **kind.call_args(args))


def infer_shapes(graph):
    """Return a copy of ``graph`` with ``out_shape`` set on every node.

    Head nodes get a tuple of per-level (c, h, w) shapes. Validates channel
    divisibility for every block by building its convolution list.
    """
    shaped = []
    shapes = {INPUT: tuple(graph.input_shape)}
    for node in graph.nodes:
        kind = KINDS[node.kind]
        in_shapes = [shapes[ref] for ref in node.inputs]
        for ref, shp in zip(node.inputs, in_shapes):
            if isinstance(shp[0], tuple):
                raise GraphShapeError(
                    f"node {node.id} reads the multi-level output of head node {ref}", node.id, node.line
                )
        if node.kind == "concat":
            first_ref, (_, h0, w0) = node.inputs[0], in_shapes[0]
            for ref, (_, h, w) in zip(node.inputs[1:], in_shapes[1:]):
                if (h, w) != (h0, w0):
                    raise GraphShapeError(
                        f"node {node.id}: concat of {_producer(first_ref)} ({h0}x{w0}) and "
                        f"{_producer(ref)} ({h}x{w}) has mismatched spatial size",
                        node.id, node.line, dim="height" if h != h0 else "width",
                    )
        if kind.head:
            for i in range(1, len(in_shapes)):
                (_, h0, w0), (_, h1, w1) = in_shapes[i - 1], in_shapes[i]
                if (h0, w0) != (2 * h1, 2 * w1):
                    raise GraphShapeError(
                        f"node {node.id}: head level {i} ({_producer(node.inputs[i])}, {h1}x{w1}) is not "
                        f"half of level {i - 1} ({_producer(node.inputs[i - 1])}, {h0}x{w0})",
                        node.id, node.line, dim="height",
                    )
        try:
            out = output_shape(kind, in_shapes, node.args)
            node_layers(kind, in_shapes, node.args)
        except (ConfigError, ShapeError) as exc:
            raise GraphShapeError(f"node {node.id} ({node.kind}): {exc}", node.id, node.line) from exc
        flat = out if kind.head else (out,)
        for c, h, w in flat:
            if min(c, h, w) < 1:
                raise GraphShapeError(
                    f"node {node.id} ({node.kind}) produces empty shape {(c, h, w)}", node.id, node.line
                )
        shapes[node.id] = out
        shaped.append(replace(node, out_shape=out))
    return ArchGraph(shaped, tuple(graph.input_shape), dict(graph.meta))
