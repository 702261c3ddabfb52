"""Box and detection record types shared by the losses, decoder and evaluator."""

from typing import NamedTuple

import numpy as np


class Box(NamedTuple):
    """Axis-aligned box in center-size form, in pixels."""

    cx: float
    cy: float
    w: float
    h: float

    def corners(self):
        return (self.cx - self.w / 2, self.cy - self.h / 2, self.cx + self.w / 2, self.cy + self.h / 2)


class Detection(NamedTuple):
    image_id: str
    class_id: int
    box: Box
    score: float


class GroundTruth(NamedTuple):
    image_id: str
    class_id: int
    box: Box


def box_iou(a, b):
    """Pairwise IoU between (N, 4) and (M, 4) arrays of (cx, cy, w, h) boxes.

    Zero-area boxes get IoU 0 against everything, including themselves.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    a1, a2 = a[:, None, :2] - a[:, None, 2:] / 2, a[:, None, :2] + a[:, None, 2:] / 2
    b1, b2 = b[None, :, :2] - b[None, :, 2:] / 2, b[None, :, :2] + b[None, :, 2:] / 2
    wh = np.clip(np.minimum(a2, b2) - np.maximum(a1, b1), 0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1), 0.0)
    return out


def nms(boxes, scores, iou_threshold):
    """Greedy non-maximum suppression; returns kept indices, best score first.

    Equal scores keep input order.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    keep = []
    while order.size:
        i = order[0]
        keep.append(int(i))
        if order.size == 1:
            break
        overlap = box_iou(boxes[i], boxes[order[1:]])[0]
        order = order[1:][overlap <= iou_threshold]
    return keep
