"""Evaluation metrics as predictions degrade.

Cell-level precision/recall/IOU at confidence 0.5 for the line heatmaps,
pixel accuracy and mean per-class pixel accuracy for segmentation. A
perfect prediction scores exactly 1.0 everywhere; corrupting more cells
and pixels walks the metrics down.
"""

import numpy as np

from stairkit import (
    GridGeometry,
    StairSpec,
    cell_confusion,
    encode_lines,
    generate_scene,
    pixel_accuracy,
    precision_recall_iou,
)

truth = generate_scene(StairSpec(steps=3, pitch=0.1, position=(0.0, -0.7, -2.0)))
convex, _ = encode_lines(truth.lines, GridGeometry())
gt_heat = convex.heatmap.data[:, :, 0]
gt_seg = truth.seg.grid.data

rng = np.random.default_rng(1)
print(f"{'corrupt':>8} {'precision':>10} {'recall':>8} {'iou':>8} {'pa':>8} {'mpa':>8}")
for corrupt in (0.0, 0.05, 0.2, 0.5):
    heat = gt_heat.copy()
    flip = rng.random(heat.shape) < corrupt
    heat[flip] = 1.0 - heat[flip]  # false positives and misses

    labels = gt_seg.argmax(axis=2)
    noise = rng.random(labels.shape) < corrupt
    labels[noise] = rng.integers(0, 3, int(noise.sum()))
    seg = np.eye(3, dtype=np.float32)[labels]

    p, r, iou = precision_recall_iou(cell_confusion(heat, gt_heat, conf=0.5))
    pa, mpa, _ = pixel_accuracy(seg, gt_seg)
    print(f"{corrupt:8.2f} {p:10.4f} {r:8.4f} {iou:8.4f} {pa:8.4f} {mpa:8.4f}")
