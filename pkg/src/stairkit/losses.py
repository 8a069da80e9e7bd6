"""Reference loss functions for the stair-modeling training objective.

Pure f64 oracles: a weighted MSE line loss over confidence and per-cell
endpoint locations, a BCE segmentation loss, a weighted MSE depth loss, and
their sum. Each loss ships a closed-form gradient so training
implementations can be validated coordinate-by-coordinate against central
finite differences.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

_EPS = 1e-7  # BCE clamp

# location 4-vector layout (x1, y1, x2, y2): x coords at 0, 2; y at 1, 3
_X_IDX = (0, 2)
_Y_IDX = (1, 3)


@dataclass
class LossConfig:
    alpha1: float = 15.0   # positive-sample confidence weight
    alpha2: float = 5.0    # negative-sample confidence weight
    lambda1: float = 10.0  # dynamic x-location weight
    lambda2: float = 10.0  # dynamic y-location weight
    psi: float = 10.0      # depth weight
    num_classes: int = 3

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "lambda1", "lambda2", "psi"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class LineLossInput:
    """Prediction/ground-truth grids for one line kind.

    pred_conf, gt_conf: (M, N); gt_mask: (M, N) 0/1 stair-line indicator;
    pred_loc, gt_loc: (M, N, 4) cell-normalized endpoints.
    """

    pred_conf: np.ndarray
    gt_conf: np.ndarray
    gt_mask: np.ndarray
    pred_loc: np.ndarray
    gt_loc: np.ndarray

    def __post_init__(self):
        self.pred_conf = np.asarray(self.pred_conf, dtype=np.float64)
        self.gt_conf = np.asarray(self.gt_conf, dtype=np.float64)
        self.gt_mask = np.asarray(self.gt_mask, dtype=np.float64)
        self.pred_loc = np.asarray(self.pred_loc, dtype=np.float64)
        self.gt_loc = np.asarray(self.gt_loc, dtype=np.float64)
        m, n = self.pred_conf.shape
        if self.gt_conf.shape != (m, n) or self.gt_mask.shape != (m, n):
            raise ValueError("confidence/mask grids must share (M, N)")
        if self.pred_loc.shape != (m, n, 4) or self.gt_loc.shape != (m, n, 4):
            raise ValueError("location grids must be (M, N, 4)")
        if not np.all((self.gt_mask == 0) | (self.gt_mask == 1)):
            raise ValueError("gt_mask must be 0/1")


def line_loss(inp: LineLossInput, cfg: LossConfig) -> float:
    """Weighted confidence MSE plus masked location loss, averaged over MN.

    Per cell:
        alpha1*h*(p - p*)^2 + alpha2*(1-h)*(p - p*)^2
        + h*(lambda1*mean_x (t - t*)^2 + lambda2*mean_y (t - t*)^2)
    """
    h = inp.gt_mask
    dp2 = (inp.pred_conf - inp.gt_conf) ** 2
    conf_term = cfg.alpha1 * h * dp2 + cfg.alpha2 * (1.0 - h) * dp2

    dt = inp.pred_loc - inp.gt_loc
    loc_x = (dt[:, :, _X_IDX] ** 2).mean(axis=2)
    loc_y = (dt[:, :, _Y_IDX] ** 2).mean(axis=2)
    loc_term = h * (cfg.lambda1 * loc_x + cfg.lambda2 * loc_y)

    return float((conf_term + loc_term).mean())


def line_loss_grad(inp: LineLossInput, cfg: LossConfig):
    """Closed-form partials of line_loss: (d/d pred_conf, d/d pred_loc)."""
    mn = inp.pred_conf.size
    h = inp.gt_mask
    w = cfg.alpha1 * h + cfg.alpha2 * (1.0 - h)
    g_conf = 2.0 * w * (inp.pred_conf - inp.gt_conf) / mn
    dt = inp.pred_loc - inp.gt_loc
    lam = np.array([cfg.lambda1, cfg.lambda2, cfg.lambda1, cfg.lambda2])
    g_loc = h[:, :, None] * lam * dt / mn  # mean over 2 coords: 2*lam*dt/2
    return g_conf, g_loc


def seg_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean binary cross-entropy over every pixel and class channel.

    pred holds post-sigmoid scores in (0, 1); values at exactly 0 or 1 are
    clamped to [eps, 1-eps] with a warning.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    if np.any((pred <= 0.0) | (pred >= 1.0)):
        warnings.warn("seg_loss: scores at 0/1 clamped for log stability", stacklevel=2)
        pred = np.clip(pred, _EPS, 1.0 - _EPS)
    bce = -(gt * np.log(pred) + (1.0 - gt) * np.log(1.0 - pred))
    return float(bce.mean())


def seg_loss_grad(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Closed-form partial of seg_loss w.r.t. each score."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    return (-gt / pred + (1.0 - gt) / (1.0 - pred)) / pred.size


def depth_loss(pred: np.ndarray, gt: np.ndarray, cfg: LossConfig) -> float:
    """psi * mean squared error over normalized depth values."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    return float(cfg.psi * ((pred - gt) ** 2).mean())


def depth_loss_grad(pred: np.ndarray, gt: np.ndarray, cfg: LossConfig) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    return 2.0 * cfg.psi * (pred - gt) / pred.size


def total_loss(
    convex: LineLossInput,
    concave: LineLossInput,
    seg_pred: np.ndarray,
    seg_gt: np.ndarray,
    depth_pred: np.ndarray,
    depth_gt: np.ndarray,
    cfg: LossConfig,
) -> tuple[float, dict[str, float]]:
    """Sum of the four terms, with a per-term breakdown for logging."""
    breakdown = {
        "line_convex": line_loss(convex, cfg),
        "line_concave": line_loss(concave, cfg),
        "seg": seg_loss(seg_pred, seg_gt),
        "depth": depth_loss(depth_pred, depth_gt, cfg),
    }
    return sum(breakdown.values()), breakdown


def update_dynamic_weights(
    prev: tuple[float, float], eval_x_error: float, eval_y_error: float
) -> tuple[float, float]:
    """Redistribute the constant weight budget lambda1 + lambda2 = 20
    proportionally to the per-axis validation errors."""
    if eval_x_error < 0 or eval_y_error < 0:
        raise ValueError("evaluation errors must be non-negative")
    total = eval_x_error + eval_y_error
    if total == 0:
        return prev
    return 20.0 * eval_x_error / total, 20.0 * eval_y_error / total


def finite_diff_check(loss_fn, grad_fn, x: np.ndarray, index, h: float = 1e-4):
    """Central-difference probe of one coordinate of a loss.

    loss_fn maps an array to a scalar; grad_fn maps the array to its
    closed-form gradient (same shape). Returns (analytic, numeric) partial
    derivatives at ``index``.
    """
    if not 1e-6 <= h <= 1e-3:
        raise ValueError(f"step h must be in [1e-6, 1e-3], got {h}")
    x = np.asarray(x, dtype=np.float64)
    analytic = float(np.asarray(grad_fn(x))[index])
    xp = x.copy()
    xp[index] += h
    xm = x.copy()
    xm[index] -= h
    numeric = (loss_fn(xp) - loss_fn(xm)) / (2.0 * h)
    return analytic, float(numeric)
