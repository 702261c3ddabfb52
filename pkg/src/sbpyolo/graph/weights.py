"""Flat float64 weight storage for a shaped :class:`ArchGraph`.

On disk a store is two files: a blob of little-endian float64 values and a
text manifest with one ``node_id offset length`` line per parameterized node
(offsets and lengths count float64 elements). Comment lines in the manifest
record the seed.
"""

import numpy as np
from sklearn.utils import check_random_state

from ..blocks import functional as F
from ..exceptions import MissingWeightsError, ShapeError
from .config import INPUT
from .kinds import KINDS
from .shapes import node_layers


def graph_layers(graph):
    """``{node_id: [ConvLayer, ...]}`` for every node of a shaped graph."""
    out = {}
    for node in graph.nodes:
        in_shapes = [graph.shape_of(ref) for ref in node.inputs]
        out[node.id] = node_layers(KINDS[node.kind], in_shapes, node.args)
    return out


class WeightStore:
    def __init__(self, arrays, seed=None):
        self.arrays = {int(k): np.ascontiguousarray(v, dtype=np.float64).ravel() for k, v in arrays.items()}
        self.seed = seed

    @classmethod
    def initialize(cls, graph, seed=0):
        """Seeded uniform fan-in weights for every parameterized node."""
        rng = check_random_state(seed)
        arrays = {}
        for node_id, layers in graph_layers(graph).items():
            if layers:
                params = F.init_params(layers, rng)
                arrays[node_id] = np.concatenate([p.ravel() for p in params.values()])
        return cls(arrays, seed)

    def __contains__(self, node_id):
        return node_id in self.arrays

    def __len__(self):
        return len(self.arrays)

    def __eq__(self, other):
        return (
            isinstance(other, WeightStore)
            and self.arrays.keys() == other.arrays.keys()
            and all(np.array_equal(self.arrays[k], other.arrays[k]) for k in self.arrays)
        )

    @property
    def size(self):
        return sum(a.size for a in self.arrays.values())

    def params_for(self, node_id, layers):
        """Unflatten node ``node_id``'s vector into a named parameter dict."""
        shapes = F.param_shapes(layers)
        if not shapes:
            return {}
        if node_id not in self.arrays:
            raise MissingWeightsError(node_id)
        flat = self.arrays[node_id]
        need = sum(int(np.prod(s)) for s in shapes.values())
        if flat.size != need:
            raise ShapeError(f"node {node_id} stores {flat.size} weights, layout needs {need}", dim=f"node {node_id}")
        params, offset = {}, 0
        for name, shape in shapes.items():
            size = int(np.prod(shape))
            params[name] = flat[offset : offset + size].reshape(shape)
            offset += size
        return params

    def save(self, blob_path, manifest_path):
        lines = [f"# seed {self.seed}", "# node_id offset length (float64 elements)"]
        offset = 0
        chunks = []
        for node_id in sorted(self.arrays):
            arr = self.arrays[node_id]
            lines.append(f"{node_id} {offset} {arr.size}")
            chunks.append(arr)
            offset += arr.size
        blob = np.concatenate(chunks) if chunks else np.zeros(0)
        blob.astype("<f8").tofile(blob_path)
        with open(manifest_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, blob_path, manifest_path):
        blob = np.fromfile(blob_path, dtype="<f8").astype(np.float64)
        arrays, seed = {}, None
        with open(manifest_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    parts = line[1:].split()
                    if len(parts) == 2 and parts[0] == "seed" and parts[1] != "None":
                        seed = int(parts[1])
                    continue
                try:
                    node_id, offset, length = (int(p) for p in line.split())
                except ValueError:
                    raise ValueError(f"{manifest_path}:{lineno}: expected 'node_id offset length'") from None
                if offset < 0 or offset + length > blob.size:
                    raise ValueError(f"{manifest_path}:{lineno}: range exceeds blob of {blob.size} values")
                arrays[node_id] = blob[offset : offset + length].copy()
        return cls(arrays, seed)
