"""Finite-difference verification of the hybrid loss gradients."""

from dataclasses import dataclass

import numpy as np

from .boxes import Box
from .losses import HybridLossParams, hybrid_loss, iou, nwd

FD_STEP = 1e-6
REL_TOL = 1e-4
# gradients smaller than this are compared in absolute terms
GRAD_FLOOR = 1e-4
# keep edges this far apart so no min/max switch lies within the FD stencil
EDGE_MARGIN = 1e-3


def _edges(box):
    x1, y1, x2, y2 = box.corners()
    return (x1, x2), (y1, y2)


def _is_interior(a, b):
    for (a_lo, a_hi), (b_lo, b_hi) in zip(_edges(a), _edges(b)):
        for u in (a_lo, a_hi):
            for v in (b_lo, b_hi):
                if abs(u - v) < EDGE_MARGIN:
                    return False
    return np.hypot(a.cx - b.cx, a.cy - b.cy) + abs(a.w - b.w) + abs(a.h - b.h) > EDGE_MARGIN


def sample_box_pairs(n, rng, spread=4.0):
    """``n`` random non-degenerate box pairs away from IoU kinks."""
    pairs = []
    while len(pairs) < n:
        cx, cy = rng.uniform(0, 10, 2)
        a = Box(cx, cy, *rng.uniform(0.5, 5.0, 2))
        dx, dy = rng.uniform(-spread, spread, 2)
        b = Box(cx + dx, cy + dy, *rng.uniform(0.5, 5.0, 2))
        if _is_interior(a, b):
            pairs.append((a, b))
    return pairs


def fd_gradient(fn, a, h=FD_STEP):
    a = np.asarray(a, dtype=np.float64)
    grad = np.empty(4)
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        grad[i] = (fn(Box(*(a + e))) - fn(Box(*(a - e)))) / (2 * h)
    return grad


def relative_error(analytic, numeric):
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), GRAD_FLOOR)
    return float(np.max(np.abs(analytic - numeric)) / scale)


@dataclass
class GradcheckResult:
    n_trials: int
    alphas: tuple
    C: float
    max_rel_error: dict

    @property
    def worst(self):
        return max(self.max_rel_error.values())

    @property
    def passed(self):
        return self.worst < REL_TOL


def check_gradients(n_trials=1000, seed=0, alphas=(0.0, 0.5, 1.0), C=0.5):
    rng = np.random.default_rng(seed)
    pairs = sample_box_pairs(n_trials, rng)
    worst = {}
    for alpha in alphas:
        params = HybridLossParams(C=C, iou_ratio=alpha)
        err = 0.0
        for a, b in pairs:
            _, grad = hybrid_loss(a, b, params)
            numeric = fd_gradient(lambda p: hybrid_loss(p, b, params)[0], a)
            err = max(err, relative_error(grad, numeric))
        worst[float(alpha)] = err
    return GradcheckResult(n_trials, tuple(float(a) for a in alphas), C, worst)


def offset_sweep(alpha=0.0, C=0.5, size=2.0, t_max=6.0, step=1e-3):
    """Slide ``(t, 0, size, size)`` past ``(0, 0, size, size)`` along x.

    Returns an array with columns ``t, nwd, iou, loss, d_nwd_term/dcx,
    d_iou_term/dcx`` where the term gradients are of the unweighted losses
    ``1 - nwd`` and ``1 - iou``.
    """
    params = HybridLossParams(C=C, iou_ratio=alpha)
    target = Box(0.0, 0.0, size, size)
    ts = np.round(np.arange(step, t_max + step / 2, step), 12)
    rows = []
    for t in ts:
        a = Box(float(t), 0.0, size, size)
        loss, _, g_nwd, g_iou = hybrid_loss(a, target, params, parts=True)
        rows.append((t, nwd(a, target, C), iou(a, target), loss, g_nwd[0], g_iou[0]))
    return np.array(rows)


def sweep_is_smooth(table, tol=1e-2):
    """NWD-term derivative along the sweep has no jumps.

    Consecutive samples of d(1 - nwd)/dt may differ by at most ``tol``
    times the largest derivative seen; a discontinuity would show up as a
    jump of order one.
    """
    d = table[:, 4]
    jumps = np.abs(np.diff(d))
    return bool(np.max(jumps) <= tol * np.max(np.abs(d)))


def format_sweep(table, every=250):
    head = f"{'t':>8} {'nwd':>12} {'iou':>10} {'loss':>10} {'dNWDterm/dcx':>14} {'dIoUterm/dcx':>14}"
    rows = [head]
    for row in table[every - 1 :: every]:
        t, n, i, loss, gn, gi = row
        rows.append(f"{t:>8.3f} {n:>12.6e} {i:>10.6f} {loss:>10.6f} {gn:>14.6e} {gi:>14.6e}")
    return "\n".join(rows) + "\n"
