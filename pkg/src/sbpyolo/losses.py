"""IoU, normalized Wasserstein distance and the hybrid box-regression loss.

Boxes are :class:`~sbpyolo.boxes.Box` tuples ``(cx, cy, w, h)``. Each box is
read as a 2D Gaussian with mean ``(cx, cy)`` and covariance
``diag(w^2 / 4, h^2 / 4)``; the squared 2-Wasserstein distance between two
such Gaussians has a closed form. Gradients are analytic and taken with
respect to the first (predicted) box.
"""

import math
from dataclasses import dataclass

import numpy as np

from .boxes import Box

__all__ = [
    "Box",
    "HybridLossParams",
    "iou",
    "iou_with_grad",
    "wasserstein_sq",
    "nwd",
    "nwd_with_grad",
    "hybrid_loss",
]


def _check_box(box, name):
    box = Box(*map(float, box))
    if not all(math.isfinite(v) for v in box):
        raise ValueError(f"{name} has non-finite coordinates: {box}")
    if box.w <= 0 or box.h <= 0:
        raise ValueError(f"{name} is degenerate (w and h must be > 0): {box}")
    return box


@dataclass(frozen=True)
class HybridLossParams:
    """``C`` normalizes the Wasserstein distance; ``iou_ratio`` weights the IoU term."""

    C: float = 0.5
    iou_ratio: float = 0.5

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be > 0, got {self.C}")
        if not 0 <= self.iou_ratio <= 1:
            raise ValueError(f"iou_ratio must lie in [0, 1], got {self.iou_ratio}")


def _overlap_1d(a_lo, a_hi, b_lo, b_hi):
    """Overlap length and its derivatives w.r.t. (a_lo, a_hi)."""
    lo_a = a_lo > b_lo
    hi_a = a_hi < b_hi
    length = min(a_hi, b_hi) - max(a_lo, b_lo)
    if length <= 0:
        return 0.0, 0.0, 0.0
    return length, (-1.0 if lo_a else 0.0), (1.0 if hi_a else 0.0)


def iou_with_grad(a, b):
    """IoU of ``a`` and ``b`` and its gradient w.r.t. ``(a.cx, a.cy, a.w, a.h)``.

    The gradient is zero wherever the boxes do not overlap, and at
    ``a == b`` (the maximum, where IoU has a kink) the zero subgradient is
    returned. On other coinciding edges the overlap term uses the one-sided
    derivative that holds ``min``/``max`` on ``b``'s edge.
    """
    a, b = _check_box(a, "a"), _check_box(b, "b")
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw, diw_lo, diw_hi = _overlap_1d(ax1, ax2, bx1, bx2)
    ih, dih_lo, dih_hi = _overlap_1d(ay1, ay2, by1, by2)
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    value = inter / union
    if inter == 0 or a == b:
        return value, np.zeros(4)
    # x1 = cx - w/2, x2 = cx + w/2
    diw = np.array([diw_lo + diw_hi, 0.0, 0.5 * (diw_hi - diw_lo), 0.0])
    dih = np.array([0.0, dih_lo + dih_hi, 0.0, 0.5 * (dih_hi - dih_lo)])
    d_inter = ih * diw + iw * dih
    d_area = np.array([0.0, 0.0, a.h, a.w])
    d_union = d_area - d_inter
    grad = (d_inter * union - inter * d_union) / union**2
    return value, grad


def iou(a, b):
    """Intersection over union of two boxes; 0 when they are disjoint."""
    return iou_with_grad(a, b)[0]


def wasserstein_sq(a, b):
    """Squared 2-Wasserstein distance between the boxes' Gaussians."""
    a, b = _check_box(a, "a"), _check_box(b, "b")
    return (a.cx - b.cx) ** 2 + (a.cy - b.cy) ** 2 + ((a.w - b.w) / 2) ** 2 + ((a.h - b.h) / 2) ** 2


def nwd_with_grad(a, b, C=0.5):
    """``exp(-W2 / C)`` and its gradient w.r.t. the first box.

    At ``a == b`` the distance has a cone point; the zero subgradient is
    returned there.
    """
    if not C > 0:
        raise ValueError(f"C must be > 0, got {C}")
    a, b = _check_box(a, "a"), _check_box(b, "b")
    dist = math.sqrt(wasserstein_sq(a, b))
    value = math.exp(-dist / C)
    if dist == 0:
        return value, np.zeros(4)
    d_dist = np.array([a.cx - b.cx, a.cy - b.cy, (a.w - b.w) / 4, (a.h - b.h) / 4]) / dist
    return value, -value / C * d_dist


def nwd(a, b, C=0.5):
    return nwd_with_grad(a, b, C)[0]


def hybrid_loss(a, b, params=HybridLossParams(), *, parts=False):
    """``(1 - r) * (1 - NWD) + r * (1 - IoU)`` with ``r = params.iou_ratio``.

    Returns ``(loss, grad)``; ``grad`` is d loss / d ``(a.cx, a.cy, a.w, a.h)``.
    With ``parts=True`` also returns the NWD-term and IoU-term gradients.
    """
    r = params.iou_ratio
    n_val, n_grad = nwd_with_grad(a, b, params.C)
    i_val, i_grad = iou_with_grad(a, b)
    loss = (1 - r) * (1 - n_val) + r * (1 - i_val)
    # 0.0 - g keeps exact zeros positive
    nwd_term, iou_term = 0.0 - n_grad, 0.0 - i_grad
    grad = (1 - r) * nwd_term + r * iou_term
    if parts:
        return loss, grad, nwd_term, iou_term
    return loss, grad
