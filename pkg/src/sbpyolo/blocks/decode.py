"""Anchor-free decoding of head maps into scored boxes."""

import numpy as np

from ..boxes import Box, Detection, nms
from ..exceptions import ShapeError
from ..tensor import sigmoid
from ..validation import check_tensor

DEFAULT_STRIDES = (4, 8, 16, 32)


def dfl_expectation(logits, r):
    """Softmax expectation over ``r`` bins along axis 1.

    ``logits`` is (n, 4r, h, w); returns (n, 4, h, w) distances in bins.
    """
    n, _, h, w = logits.shape
    z = logits.reshape(n, 4, r, h, w)
    z = z - z.max(axis=2, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=2, keepdims=True)
    return np.einsum("nkrhw,r->nkhw", p, np.arange(r, dtype=np.float64))


def decode_detections(
    head_outputs,
    strides=DEFAULT_STRIDES,
    *,
    num_classes,
    reg_max=16,
    score_threshold=0.25,
    iou_threshold=0.7,
):
    """Turn per-level (n, 4r + nc, h, w) maps into :class:`Detection` records.

    Each cell predicts (left, top, right, bottom) distances from its center as
    the expectation over ``reg_max`` bins times the level stride. Class scores
    are sigmoids of the class logits. NMS is greedy and class-wise. The
    ``image_id`` of each detection is its batch index as a string.
    """
    if len(head_outputs) != len(strides):
        raise ShapeError(
            f"{len(head_outputs)} head levels but {len(strides)} strides", dim="levels"
        )
    expected = 4 * reg_max + num_classes
    boxes, scores, classes, images = [], [], [], []
    for level, (out, stride) in enumerate(zip(head_outputs, strides)):
        out = check_tensor(out, name=f"head_outputs[{level}]")
        if out.shape[1] != expected:
            raise ShapeError(
                f"level {level} has {out.shape[1]} channels, expected 4*{reg_max} + {num_classes} = {expected}",
                dim="channels",
            )
        n, _, h, w = out.shape
        dist = dfl_expectation(out[:, : 4 * reg_max], reg_max) * stride
        prob = sigmoid(out[:, 4 * reg_max :])
        gy, gx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        ax, ay = (gx + 0.5) * stride, (gy + 0.5) * stride
        left, top, right, bottom = dist[:, 0], dist[:, 1], dist[:, 2], dist[:, 3]
        x1, y1, x2, y2 = ax - left, ay - top, ax + right, ay + bottom
        cell_boxes = np.stack([(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1], axis=-1)
        b_idx, c_idx, yy, xx = np.nonzero(prob > score_threshold)
        boxes.append(cell_boxes[b_idx, yy, xx])
        scores.append(prob[b_idx, c_idx, yy, xx])
        classes.append(c_idx)
        images.append(b_idx)
    boxes = np.concatenate(boxes) if boxes else np.zeros((0, 4))
    scores = np.concatenate(scores) if scores else np.zeros(0)
    classes = np.concatenate(classes) if classes else np.zeros(0, int)
    images = np.concatenate(images) if images else np.zeros(0, int)

    detections = []
    for img in np.unique(images):
        for cls in np.unique(classes[images == img]):
            idx = np.flatnonzero((images == img) & (classes == cls))
            for k in nms(boxes[idx], scores[idx], iou_threshold):
                j = idx[k]
                detections.append(
                    Detection(str(int(img)), int(cls), Box(*map(float, boxes[j])), float(scores[j]))
                )
    detections.sort(key=lambda d: (int(d.image_id), -d.score))
    return detections
