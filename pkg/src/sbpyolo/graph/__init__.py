from .config import ArchGraph, LayerNode, emit_config, load_config, parse_config
from .forward import forward
from .shapes import infer_shapes
from .weights import WeightStore, graph_layers

__all__ = [
    "ArchGraph",
    "LayerNode",
    "parse_config",
    "load_config",
    "emit_config",
    "infer_shapes",
    "forward",
    "WeightStore",
    "graph_layers",
]
