"""Loss breakdown on perturbed predictions, plus a gradient probe.

The training objective sums a weighted line loss per kind (confidence MSE
with positive/negative weights 15/5, plus masked location MSE with dynamic
per-axis weights), a BCE segmentation loss, and a weighted depth MSE.
Closed-form gradients are compared against central finite differences.
"""

import numpy as np

from stairkit import LineLossInput, LossConfig, total_loss
from stairkit.losses import (
    depth_loss,
    depth_loss_grad,
    finite_diff_check,
    update_dynamic_weights,
)

rng = np.random.default_rng(7)
cfg = LossConfig()
m, n = 64, 32

mask = (rng.random((m, n)) < 0.1).astype(np.float64)
gt_conf = rng.uniform(0.6, 1.0, (m, n)) * mask
gt_loc = rng.uniform(0, 1, (m, n, 4)) * mask[:, :, None]


def perturbed(sigma):
    return LineLossInput(
        pred_conf=np.clip(gt_conf + rng.normal(0, sigma, (m, n)), 0, 1),
        gt_conf=gt_conf,
        gt_mask=mask,
        pred_loc=np.clip(gt_loc + rng.normal(0, sigma, (m, n, 4)), 0, 1),
        gt_loc=gt_loc,
    )


seg_gt = np.eye(3)[rng.integers(0, 3, (64, 64))]
depth_gt = rng.random((64, 64))

print(f"{'sigma':>6} {'line_cvx':>10} {'line_ccv':>10} {'seg':>10} {'depth':>10} {'total':>10}")
for sigma in (0.0, 0.05, 0.2):
    seg_pred = np.clip(seg_gt * (1 - 2 * sigma) + sigma, 1e-7, 1 - 1e-7)
    depth_pred = np.clip(depth_gt + rng.normal(0, sigma, depth_gt.shape), 0, 1)
    total, parts = total_loss(
        perturbed(sigma), perturbed(sigma), seg_pred, seg_gt, depth_pred, depth_gt, cfg
    )
    print(f"{sigma:6.2f} {parts['line_convex']:10.4f} {parts['line_concave']:10.4f}"
          f" {parts['seg']:10.4f} {parts['depth']:10.4f} {total:10.4f}")

print("\ndynamic location weights track the per-axis validation error:")
for ex, ey in ((1.0, 1.0), (3.0, 1.0), (0.5, 2.0)):
    l1, l2 = update_dynamic_weights((cfg.lambda1, cfg.lambda2), ex, ey)
    print(f"  x-error {ex:.1f}, y-error {ey:.1f} -> lambda = ({l1:.1f}, {l2:.1f})")

print("\ngradient probe (depth loss at a random coordinate):")
x = rng.random((8, 8))
gt = rng.random((8, 8))
analytic, numeric = finite_diff_check(
    lambda v: depth_loss(v, gt, cfg),
    lambda v: depth_loss_grad(v, gt, cfg),
    x,
    (3, 5),
)
print(f"  analytic {analytic:+.10f}")
print(f"  numeric  {numeric:+.10f}")
print(f"  relative difference {abs(numeric - analytic) / abs(analytic):.2e}")
