"""Precision, recall, AP and mAP over detection / ground-truth records.

Record files are line-delimited text, ``#`` comments allowed::

    image_id class_id cx cy w h [score]

Coordinates are absolute pixels; the score column is present only in
detection files. Matching is greedy by descending score and one-to-one per
(image, class); equal scores keep input order. AP is the area under the
precision envelope (all-point interpolation).
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .boxes import Box, Detection, GroundTruth, box_iou
from .exceptions import RecordParseError

IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


def _parse_records(lines, with_score, path=None):
    records = []
    want = 7 if with_score else 6
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != want:
            raise RecordParseError(f"expected {want} fields, got {len(parts)}", lineno, path)
        image_id = parts[0]
        try:
            class_id = int(parts[1])
            values = [float(p) for p in parts[2:]]
        except ValueError as exc:
            raise RecordParseError(f"bad number ({exc})", lineno, path) from None
        if class_id < 0:
            raise RecordParseError(f"negative class id {class_id}", lineno, path)
        if not all(math.isfinite(v) for v in values):
            raise RecordParseError("non-finite value", lineno, path)
        box = Box(*values[:4])
        if with_score:
            if box.w < 0 or box.h < 0:
                raise RecordParseError("negative box size", lineno, path)
            score = values[4]
            if not 0 <= score <= 1:
                raise RecordParseError(f"score {score} outside [0, 1]", lineno, path)
            records.append(Detection(image_id, class_id, box, score))
        else:
            if box.w <= 0 or box.h <= 0:
                raise RecordParseError("ground-truth box must have w > 0 and h > 0", lineno, path)
            records.append(GroundTruth(image_id, class_id, box))
    return records


def read_detections(path):
    with open(path, encoding="utf-8") as fh:
        return _parse_records(fh, True, path)


def read_ground_truths(path):
    with open(path, encoding="utf-8") as fh:
        return _parse_records(fh, False, path)


def parse_detections(text):
    return _parse_records(text.splitlines(), True)


def parse_ground_truths(text):
    return _parse_records(text.splitlines(), False)


def write_records(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fields = [r.image_id, str(r.class_id), *(repr(float(v)) for v in r.box)]
            if isinstance(r, Detection):
                fields.append(repr(float(r.score)))
            fh.write(" ".join(fields) + "\n")


def match(detections, ground_truths, iou_threshold=0.5):
    """Greedy one-to-one matching inside each (image, class) group.

    Returns ``(tp, n_fn)``: a boolean array aligned with ``detections`` and
    the number of unmatched ground truths.
    """
    gt_groups = defaultdict(list)
    for g in ground_truths:
        gt_groups[g.image_id, g.class_id].append(g)
    det_groups = defaultdict(list)
    for i, d in enumerate(detections):
        det_groups[d.image_id, d.class_id].append(i)

    tp = np.zeros(len(detections), dtype=bool)
    matched_total = 0
    for key, idx in det_groups.items():
        gts = gt_groups.get(key)
        if not gts:
            continue
        idx = sorted(idx, key=lambda i: -detections[i].score)
        ious = box_iou([detections[i].box for i in idx], [g.box for g in gts])
        taken = np.zeros(len(gts), dtype=bool)
        for row, i in enumerate(idx):
            cand = np.where(taken | (ious[row] < iou_threshold), -1.0, ious[row])
            j = int(np.argmax(cand))
            if cand[j] >= 0 and ious[row, j] >= iou_threshold:
                taken[j] = True
                tp[i] = True
                matched_total += 1
    return tp, len(ground_truths) - matched_total


def average_precision(tp, scores, total_gt):
    """Area under the precision envelope over recall.

    ``tp`` flags and ``scores`` describe one class's detections in any
    order; they are ranked by descending score, ties kept in input order.
    """
    if total_gt <= 0:
        raise ValueError("average precision is undefined without ground truths")
    tp = np.asarray(tp, dtype=bool)
    if tp.size == 0:
        return 0.0
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    hits = tp[order]
    cum_tp = np.cumsum(hits)
    precision = cum_tp / np.arange(1, hits.size + 1)
    recall = cum_tp / total_gt
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(steps * envelope))


@dataclass(frozen=True)
class ClassResult:
    class_id: int
    ap: tuple
    precision: float
    recall: float
    n_gt: int

    @property
    def ap50(self):
        return self.ap[0]

    @property
    def ap50_95(self):
        return float(np.mean(self.ap))


@dataclass
class EvalResult:
    per_class: list
    map50: float
    map50_95: float
    counts: tuple
    thresholds: tuple = IOU_THRESHOLDS
    skipped_classes: list = field(default_factory=list)


def evaluate(detections, ground_truths, thresholds=IOU_THRESHOLDS):
    """AP per class at each IoU threshold, mAP@0.5 and mAP@0.5:0.95.

    Classes with no ground truth are left out of the means and listed in
    ``skipped_classes``. ``counts`` is (TP, FP, FN) at the first threshold.
    """
    detections, ground_truths = list(detections), list(ground_truths)
    gt_per_class = defaultdict(int)
    for g in ground_truths:
        gt_per_class[g.class_id] += 1
    classes = sorted(gt_per_class)
    skipped = sorted({d.class_id for d in detections} - set(classes))
    scores = np.array([d.score for d in detections], dtype=np.float64)
    class_ids = np.array([d.class_id for d in detections], dtype=np.int64)

    aps = {c: [] for c in classes}
    counts = None
    first = {}
    for t_idx, thr in enumerate(thresholds):
        tp, n_fn = match(detections, ground_truths, thr)
        if t_idx == 0:
            counts = (int(tp.sum()), int((~tp).sum()), int(n_fn))
        for c in classes:
            sel = class_ids == c
            aps[c].append(average_precision(tp[sel], scores[sel], gt_per_class[c]))
            if t_idx == 0:
                n_tp, n_det = int(tp[sel].sum()), int(sel.sum())
                first[c] = (n_tp / n_det if n_det else 0.0, n_tp / gt_per_class[c])

    per_class = [ClassResult(c, tuple(aps[c]), first[c][0], first[c][1], gt_per_class[c]) for c in classes]
    if per_class:
        map50 = float(np.mean([r.ap50 for r in per_class]))
        map50_95 = float(np.mean([np.mean(r.ap) for r in per_class]))
    else:
        map50 = map50_95 = 0.0
    if counts is None:
        counts = (0, len(detections), len(ground_truths))
    return EvalResult(per_class, map50, map50_95, counts, tuple(thresholds), skipped)


def evaluate_files(dets_path, gts_path):
    return evaluate(read_detections(dets_path), read_ground_truths(gts_path))


def format_eval_lines(result):
    """Machine-readable ``class_id threshold AP`` lines plus summary lines."""
    lines = ["# class_id threshold AP"]
    for r in result.per_class:
        lines += [f"{r.class_id} {thr:.2f} {ap!r}" for thr, ap in zip(result.thresholds, r.ap)]
    tp, fp, fn = result.counts
    lines += [
        f"map50 {result.map50!r}",
        f"map50_95 {result.map50_95!r}",
        f"counts tp={tp} fp={fp} fn={fn}",
    ]
    if result.skipped_classes:
        lines.append("skipped " + " ".join(str(c) for c in result.skipped_classes))
    return "\n".join(lines) + "\n"


def format_eval_table(result):
    rows = [f"{'class':>5} {'n_gt':>5} {'P':>7} {'R':>7} {'AP50':>7} {'AP50-95':>8}"]
    for r in result.per_class:
        rows.append(
            f"{r.class_id:>5} {r.n_gt:>5} {r.precision:>7.4f} {r.recall:>7.4f} {r.ap50:>7.4f} {r.ap50_95:>8.4f}"
        )
    tp, fp, fn = result.counts
    rows += [
        "",
        f"mAP50     {result.map50:.4f}",
        f"mAP50-95  {result.map50_95:.4f}",
        f"TP {tp}  FP {fp}  FN {fn} (IoU 0.50)",
    ]
    if result.skipped_classes:
        rows.append("classes without ground truth (excluded): " + ", ".join(map(str, result.skipped_classes)))
    return "\n".join(rows) + "\n"
