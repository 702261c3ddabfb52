"""Execute a shaped :class:`ArchGraph` on an input batch."""

from ..exceptions import GraphShapeError
from ..validation import check_tensor
from .config import INPUT
from .kinds import KINDS
from .weights import graph_layers


def forward(graph, x, weights, *, return_all=False):
    """Run ``graph`` on ``x`` (n, c, h, w) with parameters from ``weights``.

    Returns the list of per-level head maps, or the last node's output for
    a headless graph. With ``return_all`` also returns ``{node_id: output}``.
    """
    if not graph.shaped:
        raise GraphShapeError("graph shapes not inferred; call infer_shapes first")
    x = check_tensor(x, channels=graph.input_shape[0])
    if x.shape[2:] != tuple(graph.input_shape[1:]):
        raise GraphShapeError(
            f"input is {x.shape[2]}x{x.shape[3]}, graph was built for "
            f"{graph.input_shape[1]}x{graph.input_shape[2]}",
            dim="height",
        )
    layers = graph_layers(graph)
    values = {INPUT: x}
    for node in graph.nodes:
        kind = KINDS[node.kind]
        params = weights.params_for(node.id, layers[node.id])
        inputs = [values[ref] for ref in node.inputs]
        values[node.id] = kind.forward(inputs, params, **kind.call_args(node.args))
    if graph.nodes:
        head = graph.head
        result = values[head.id] if head is not None else values[graph.nodes[-1].id]
    else:
        result = x
    if return_all:
        return result, {k: v for k, v in values.items() if k != INPUT}
    return result
