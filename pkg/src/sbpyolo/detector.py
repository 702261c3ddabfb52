"""Whole-network estimator built from an architecture config."""

from dataclasses import replace

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .blocks.decode import decode_detections
from .exceptions import ConfigError
from .graph import WeightStore, forward, infer_shapes, load_config
from .resources import resolve_config
from .validation import check_tensor


def with_input_size(graph, size):
    """Copy of ``graph`` whose input is ``size`` x ``size`` (channels kept)."""
    c = graph.input_shape[0]
    return replace(graph, input_shape=(c, int(size), int(size)))


class Detector(BaseEstimator):
    """Randomly initialized detector for shape, cost and pipeline checks.

    ``fit`` parses the config, infers shapes for the input size of ``X``
    (or the config's own size when ``X`` is None) and draws seeded weights.
    No training happens. ``transform`` returns the per-level head maps and
    ``predict`` decodes them into :class:`~sbpyolo.boxes.Detection` records.

    Parameters
    ----------
    config : str, default="sbp-yolo"
        Config path or bundled config name.
    random_state : int, default=0
        Weight seed.
    score_threshold : float, default=0.25
    iou_threshold : float, default=0.7
        NMS overlap above which the lower-scored box is dropped.
    """

    def __init__(self, config="sbp-yolo", random_state=0, score_threshold=0.25, iou_threshold=0.7):
        self.config = config
        self.random_state = random_state
        self.score_threshold = score_threshold
        self.iou_threshold = iou_threshold

    def fit(self, X=None, y=None):
        graph = load_config(resolve_config(self.config))
        if X is not None:
            X = check_tensor(X, channels=graph.input_shape[0], name="X")
            if X.shape[2] != X.shape[3]:
                graph = replace(graph, input_shape=(graph.input_shape[0], X.shape[2], X.shape[3]))
            else:
                graph = with_input_size(graph, X.shape[2])
        self.graph_ = infer_shapes(graph)
        self.weights_ = WeightStore.initialize(self.graph_, seed=self.random_state)
        return self

    def transform(self, X):
        check_is_fitted(self, "graph_")
        return forward(self.graph_, X, self.weights_)

    def _head_args(self):
        head = self.graph_.head
        if head is None:
            raise ConfigError(f"config {self.config} has no detection head")
        return head

    def predict(self, X):
        check_is_fitted(self, "graph_")
        head = self._head_args()
        outputs = self.transform(X)
        in_h = self.graph_.input_shape[1]
        strides = tuple(in_h // out.shape[2] for out in outputs)
        return decode_detections(
            outputs,
            strides,
            num_classes=head.args["nc"],
            reg_max=head.args["r"],
            score_threshold=self.score_threshold,
            iou_threshold=self.iou_threshold,
        )
