"""Evaluation metrics: cell-level precision/recall/IOU and pixel accuracy.

A grid cell counts as positive when its value reaches the confidence level
(0.5 by default), applied symmetrically to predictions and the Gaussian
ground-truth labels, so a perfect prediction scores IOU 1. Undefined ratios
(empty denominators) are reported as None rather than NaN.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def _grid2d(grid) -> np.ndarray:
    a = np.asarray(grid, dtype=np.float64)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    if a.ndim != 2:
        raise ValueError(f"expected a 2D heat grid, got shape {a.shape}")
    return a


def cell_confusion(pred_heat, gt_heat, conf: float = 0.5) -> ConfusionCounts:
    """Tabulate cell positives at the given confidence level."""
    p = _grid2d(pred_heat)
    g = _grid2d(gt_heat)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
    pp = p >= conf
    gp = g >= conf
    return ConfusionCounts(
        tp=int(np.sum(pp & gp)),
        fp=int(np.sum(pp & ~gp)),
        fn=int(np.sum(~pp & gp)),
        tn=int(np.sum(~pp & ~gp)),
    )


def precision_recall_iou(c: ConfusionCounts):
    """(precision, recall, iou); None where the denominator is empty."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp > 0 else None
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else None
    iou = c.tp / (c.tp + c.fp + c.fn) if c.tp + c.fp + c.fn > 0 else None
    return precision, recall, iou


def pixel_accuracy(pred, gt):
    """(pa, mpa, per_class) for hardened one-hot masks.

    Per-class accuracy is correct-in-class over ground-truth class count;
    MPA averages only the classes present in the ground truth, and absent
    classes report None.
    """
    p = np.asarray(pred)
    g = np.asarray(gt)
    if p.shape != g.shape or p.ndim != 3 or p.shape[2] != 3:
        raise ValueError(f"expected matching H x W x 3 masks, got {p.shape} vs {g.shape}")
    if p.shape[0] * p.shape[1] == 0:
        return None, None, (None, None, None)
    for name, a in (("pred", p), ("gt", g)):
        af = np.asarray(a, dtype=np.float64)
        if not (np.all((af == 0) | (af == 1)) and np.all(af.sum(axis=2) == 1)):
            raise ValueError(f"{name} mask is not one-hot")
    p_cls = p.argmax(axis=2)
    g_cls = g.argmax(axis=2)
    correct = p_cls == g_cls
    pa = float(correct.mean())

    per_class = []
    present = []
    for c in range(3):
        in_class = g_cls == c
        n = int(in_class.sum())
        if n == 0:
            per_class.append(None)
        else:
            acc = float(correct[in_class].mean())
            per_class.append(acc)
            present.append(acc)
    mpa = float(np.mean(present)) if present else None
    return pa, mpa, tuple(per_class)
