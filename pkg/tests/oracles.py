"""Independent reference implementations used as test oracles.

Nothing here imports the package's tensor code: convolution is a per-tap
accumulation, the shuffle is built from its index formula, and the blocks
are spelled out primitive by primitive.
"""

import numpy as np


def ref_conv(x, weight, bias=None, stride=1, groups=1):
    n, c1, h, w = x.shape
    c2, cg, k, _ = weight.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    ho = (h + 2 * p - k) // stride + 1
    wo = (w + 2 * p - k) // stride + 1
    out = np.zeros((n, c2, ho, wo))
    per_group = c2 // groups
    for o in range(c2):
        g = o // per_group
        for ci in range(cg):
            src = xp[:, g * cg + ci]
            for di in range(k):
                for dj in range(k):
                    patch = src[:, di : di + stride * (ho - 1) + 1 : stride, dj : dj + stride * (wo - 1) + 1 : stride]
                    out[:, o] += weight[o, ci, di, dj] * patch
        if bias is not None:
            out[:, o] += bias[o]
    return out


def ref_silu(v):
    return v / (1.0 + np.exp(-v))


def ref_block(x, params, name, stride=1, groups=1, act=True):
    y = ref_conv(x, params[name + ".weight"], params.get(name + ".bias"), stride, groups)
    return ref_silu(y) if act else y


def ref_shuffle2(x):
    c = x.shape[1]
    idx = [(j % 2) * (c // 2) + j // 2 for j in range(c)]
    return x[:, idx]


def _sub(params, prefix):
    return {k[len(prefix) + 1 :]: v for k, v in params.items() if k.startswith(prefix + ".")}


def ref_ghost(x, params, stride=1):
    primary = ref_block(x, params, "primary", stride)
    cheap = ref_block(primary, params, "cheap", groups=primary.shape[1])
    return np.concatenate([primary, cheap], axis=1)


def ref_gs(x, params, stride=1):
    y1 = ref_block(x, params, "sc", stride)
    y2 = ref_block(y1, params, "dw", groups=y1.shape[1])
    return ref_shuffle2(np.concatenate([y1, y2], axis=1))


def ref_gsb(x, params):
    main = ref_block(x, params, "cv1")
    main = ref_gs(main, _sub(params, "gs1"))
    main = ref_gs(main, _sub(params, "gs2"))
    return main + ref_block(x, params, "shortcut")


def ref_vov(x, params):
    a = ref_gsb(x, _sub(params, "gsb"))
    b = ref_block(x, params, "cv2")
    return ref_block(np.concatenate([a, b], axis=1), params, "cv3")


def count_macs(x_shape, weight_shape, stride=1, groups=1):
    """Multiply-accumulates of a conv, counted one output element at a time."""
    n, c1, h, w = x_shape
    c2, cg, k, _ = weight_shape
    p = k // 2
    ho = (h + 2 * p - k) // stride + 1
    wo = (w + 2 * p - k) // stride + 1
    macs = 0
    for _o in range(c2):
        for _i in range(ho):
            for _j in range(wo):
                for _ci in range(cg):
                    for _di in range(k):
                        for _dj in range(k):
                            macs += 1
    return n * macs


def gaussian_w2_sq(a, b):
    """Squared 2-Wasserstein distance between general Gaussians via sqrtm."""
    from scipy.linalg import sqrtm

    m1, m2 = np.array(a[:2]), np.array(b[:2])
    s1 = np.diag([a[2] ** 2 / 4, a[3] ** 2 / 4])
    s2 = np.diag([b[2] ** 2 / 4, b[3] ** 2 / 4])
    r1 = sqrtm(s1)
    cross = sqrtm(r1 @ s2 @ r1)
    return float(np.sum((m1 - m2) ** 2) + np.trace(s1 + s2 - 2 * np.real(cross)))


def greedy_oracle(dets, gts, thr):
    """Exhaustive reference for greedy score-ordered one-to-one matching.

    ``dets`` is a list of (score, box) in input order for ONE (image, class)
    group. All partial injections det -> gt with IoU >= thr are enumerated
    and the greedy one is selected: in score order (ties by input order),
    each detection takes the highest-IoU still-free gt, lowest gt index on
    IoU ties. That assignment is the lexicographic maximum, over detections
    in rank order, of the key (matched IoU, -gt index), with "unmatched"
    ranked below every admissible match and only admissible when no free
    gt qualifies. Returns per-detection flags in input order.
    """
    import itertools

    order = sorted(range(len(dets)), key=lambda i: -dets[i][0])
    iou = np.array([[_iou(dets[i][1], g) for g in gts] for i in range(len(dets))]).reshape(len(dets), len(gts))
    best_key, best = None, None
    choices = [list(range(len(gts))) + [None] for _ in order]
    for assignment in itertools.product(*choices):
        used = [a for a in assignment if a is not None]
        if len(used) != len(set(used)):
            continue
        valid, key, taken = True, [], set()
        for rank, det in enumerate(order):
            gt = assignment[rank]
            free_ok = [j for j in range(len(gts)) if j not in taken and iou[det, j] >= thr]
            if gt is None:
                if free_ok:
                    valid = False
                    break
                key.append((-1.0, 0))
            else:
                if gt not in free_ok:
                    valid = False
                    break
                key.append((iou[det, gt], -gt))
                taken.add(gt)
        if valid and (best_key is None or key > best_key):
            best_key, best = key, assignment
    flags = [False] * len(dets)
    for rank, det in enumerate(order):
        flags[det] = best[rank] is not None
    return flags


def _iou(a, b):
    ax1, ay1, ax2, ay2 = a[0] - a[2] / 2, a[1] - a[3] / 2, a[0] + a[2] / 2, a[1] + a[3] / 2
    bx1, by1, bx2, by2 = b[0] - b[2] / 2, b[1] - b[3] / 2, b[0] + b[2] / 2, b[1] + b[3] / 2
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    union = a[2] * a[3] + b[2] * b[3] - inter
    return inter / union if union > 0 else 0.0


def ap_oracle(flags_scores, total_gt):
    """AP by dense numeric integration of the envelope P(R) on a fine grid."""
    ranked = sorted(range(len(flags_scores)), key=lambda i: -flags_scores[i][1])
    tp = fp = 0
    points = []
    for i in ranked:
        if flags_scores[i][0]:
            tp += 1
        else:
            fp += 1
        points.append((tp / total_gt, tp / (tp + fp)))
    grid = np.linspace(0, 1, 200001)[1:]
    # envelope: best precision among points with recall >= r
    env = np.zeros_like(grid)
    for r, p in points:
        env = np.where(grid <= r + 1e-15, np.maximum(env, p), env)
    return float(np.mean(env))


def ap_exact(flags_scores, total_gt):
    """All-point AP in exact rational arithmetic, written loop by loop."""
    from fractions import Fraction

    ranked = sorted(range(len(flags_scores)), key=lambda i: -flags_scores[i][1])
    tp = 0
    recalls, precisions = [], []
    for rank, i in enumerate(ranked, 1):
        tp += bool(flags_scores[i][0])
        recalls.append(Fraction(tp, total_gt))
        precisions.append(Fraction(tp, rank))
    area, prev_recall = Fraction(0), Fraction(0)
    for k in range(len(ranked)):
        envelope = max(precisions[k:])
        area += (recalls[k] - prev_recall) * envelope
        prev_recall = recalls[k]
    return area
