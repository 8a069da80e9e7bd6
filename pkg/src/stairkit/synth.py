"""Procedural stair scenes with exact ground truth.

Builds an axis-aligned staircase in a world frame oriented like the camera
frame (x right, y down, z forward): the front-bottom-center of the first
riser sits at the origin, heights grow upward (-y) and depths recede (+z).
Step k contributes

* riser k:  vertical rectangle at z = k*tread_d, heights [k, k+1]*riser_h
* tread k:  horizontal rectangle at height (k+1)*riser_h, depths [k, k+1]*tread_d

and two stair lines at height (k+1)*riser_h: the convex tread front edge at
z = k*tread_d and the concave tread/riser junction at z = (k+1)*tread_d.

The camera pose maps world to camera as P_cam = R @ (P_world - position)
with R = Rz(roll) @ Rx(pitch) @ Ry(yaw); positive pitch tilts the view down.
Masks and depth are rasterized by exact ray/rectangle intersection with a
z-buffer; a far background wall keeps background depth valid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    CONCAVE,
    CONVEX,
    CameraIntrinsics,
    GridGeometry,
    LineSegment,
    TensorGrid,
)
from .label_codec import LabelPair, _clip_to_rect, encode_lines
from .reconstruct import CLASS_CHANNEL, DepthMatrix, SegmentationMask

_NEAR = 1e-6  # minimum camera-frame depth considered in front

_BG_COLOR = (80, 80, 80)


class BehindCameraError(ValueError):
    """A point or the whole staircase lies behind the camera."""


class EmptySceneError(ValueError):
    """The staircase is entirely behind the camera."""


def _default_intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics(fx=450.0, fy=450.0, cx=256.0, cy=256.0)


@dataclass(frozen=True)
class StairSpec:
    """Staircase geometry plus camera pose and imaging parameters."""

    steps: int = 3
    riser_h: float = 0.16
    tread_d: float = 0.30
    width: float = 1.5
    pitch: float = 0.0
    yaw: float = 0.0
    roll: float = 0.0
    position: tuple[float, float, float] = (0.0, -0.5, -2.0)  # camera center, world
    K: CameraIntrinsics = field(default_factory=_default_intrinsics)
    image_h: int = 512
    image_w: int = 512
    background_depth: float = 10.0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if min(self.riser_h, self.tread_d, self.width) <= 0:
            raise ValueError("riser_h, tread_d and width must be positive")


@dataclass(frozen=True)
class SceneTruth:
    """Exact ground truth for one rendered scene."""

    lines: list[LineSegment]
    seg: SegmentationMask        # one-hot
    depth: DepthMatrix           # exact, no noise
    rgb: TensorGrid              # flat-shaded u8
    spec: StairSpec
    rotation: np.ndarray         # 3x3 world-to-camera


def camera_rotation(spec: StairSpec) -> np.ndarray:
    """World-to-camera rotation Rz(roll) @ Rx(pitch) @ Ry(yaw)."""
    cp, sp = math.cos(spec.pitch), math.sin(spec.pitch)
    cy, sy = math.cos(spec.yaw), math.sin(spec.yaw)
    cr, sr = math.cos(spec.roll), math.sin(spec.roll)
    rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
    return rz @ rx @ ry


def project_point(P, K: CameraIntrinsics) -> tuple[float, float]:
    """Pixel coordinates of a camera-frame point (inverse of back-projection)."""
    X, Y, Z = float(P[0]), float(P[1]), float(P[2])
    if Z <= 0:
        raise BehindCameraError(f"point has Z = {Z} <= 0")
    return K.fx * X / Z + K.cx - 0.5, K.fy * Y / Z + K.cy - 0.5


def stair_rectangles(spec: StairSpec):
    """World-frame rectangles: (class_name, step, axis, value, bounds).

    ``axis`` is the fixed coordinate axis, ``value`` its plane coordinate and
    ``bounds`` a tuple of (axis, lo, hi) constraints for the in-plane axes.
    The background wall carries unbounded the in-plane axes (bounds = ()).
    """
    half_w = spec.width / 2.0
    rects = []
    for k in range(spec.steps):
        rects.append(
            (
                "riser",
                k,
                2,
                k * spec.tread_d,
                ((0, -half_w, half_w), (1, -(k + 1) * spec.riser_h, -k * spec.riser_h)),
            )
        )
        rects.append(
            (
                "tread",
                k,
                1,
                -(k + 1) * spec.riser_h,
                ((0, -half_w, half_w), (2, k * spec.tread_d, (k + 1) * spec.tread_d)),
            )
        )
    rects.append(("background", -1, 2, spec.background_depth, ()))
    return rects


def stair_lines_world(spec: StairSpec):
    """3D stair line segments: (kind, endpoint_a, endpoint_b) in world frame."""
    half_w = spec.width / 2.0
    out = []
    for k in range(spec.steps):
        y = -(k + 1) * spec.riser_h
        for kind, z in ((CONVEX, k * spec.tread_d), (CONCAVE, (k + 1) * spec.tread_d)):
            out.append((kind, np.array([-half_w, y, z]), np.array([half_w, y, z])))
    return out


def _project_segment(p1_cam, p2_cam, spec: StairSpec) -> tuple | None:
    """Near-clip a camera-frame 3D segment, project it, clip to the image.

    Returns clipped pixel endpoints (x1, y1, x2, y2), or None when nothing
    of the segment is visible.
    """
    z1, z2 = p1_cam[2], p2_cam[2]
    if z1 <= _NEAR and z2 <= _NEAR:
        return None
    if z1 <= _NEAR or z2 <= _NEAR:
        t = (_NEAR - z1) / (z2 - z1)
        cut = p1_cam + t * (p2_cam - p1_cam)
        if z1 <= _NEAR:
            p1_cam = cut
        else:
            p2_cam = cut
    x1, y1 = project_point(p1_cam, spec.K)
    x2, y2 = project_point(p2_cam, spec.K)
    eps = 1e-6  # image interval is half-open; keep endpoints strictly inside
    clipped = _clip_to_rect(
        x1, y1, x2, y2, 0.0, 0.0, spec.image_w - eps, spec.image_h - eps
    )
    if clipped is None:
        return None
    # the parametric clip can overshoot the rectangle by a few ulp
    cx1 = min(max(clipped[0], 0.0), spec.image_w - eps)
    cy1 = min(max(clipped[1], 0.0), spec.image_h - eps)
    cx2 = min(max(clipped[2], 0.0), spec.image_w - eps)
    cy2 = min(max(clipped[3], 0.0), spec.image_h - eps)
    if math.hypot(cx2 - cx1, cy2 - cy1) < 1e-9:
        return None
    return (cx1, cy1, cx2, cy2)


def scene_lines(spec: StairSpec) -> list[LineSegment]:
    """Project the spec's stair lines into the image, clipped to its bounds.

    The cheap line-only subset of generate_scene; identical line output.
    """
    R = camera_rotation(spec)
    C = np.asarray(spec.position, dtype=np.float64)
    lines = []
    for kind, a_w, b_w in stair_lines_world(spec):
        seg2d = _project_segment(R @ (a_w - C), R @ (b_w - C), spec)
        if seg2d is not None:
            lines.append(LineSegment(kind, *seg2d))
    return lines


def generate_scene(spec: StairSpec) -> SceneTruth:
    """Render exact masks, depth, colors and stair lines for a spec."""
    R = camera_rotation(spec)
    C = np.asarray(spec.position, dtype=np.float64)
    rects = stair_rectangles(spec)

    # the staircase must be at least partially in front of the camera
    max_z = -math.inf
    for _, _, axis, value, bounds in rects[:-1]:
        corners = _rect_corners(axis, value, bounds)
        cam_z = ((corners - C) @ R.T)[:, 2]
        max_z = max(max_z, cam_z.max())
    if max_z <= _NEAR:
        raise EmptySceneError("staircase entirely behind the camera")

    h, w = spec.image_h, spec.image_w
    K = spec.K
    xs = (np.arange(w, dtype=np.float64) + 0.5 - K.cx) / K.fx
    ys = (np.arange(h, dtype=np.float64) + 0.5 - K.cy) / K.fy
    rt = R.T
    # world-frame ray directions per pixel (camera z component is 1)
    dwx = rt[0, 0] * xs[None, :] + rt[0, 1] * ys[:, None] + rt[0, 2]
    dwy = rt[1, 0] * xs[None, :] + rt[1, 1] * ys[:, None] + rt[1, 2]
    dwz = rt[2, 0] * xs[None, :] + rt[2, 1] * ys[:, None] + rt[2, 2]
    dw = (dwx, dwy, dwz)

    zbuf = np.full((h, w), np.inf)
    cls = np.zeros((h, w), dtype=np.int64)  # background
    step_of = np.full((h, w), -1, dtype=np.int64)

    for name, k, axis, value, bounds in rects:
        denom = dw[axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (value - C[axis]) / denom
        valid = np.isfinite(t) & (t > _NEAR)
        for b_axis, lo, hi in bounds:
            coord = C[b_axis] + t * dw[b_axis]
            valid &= (coord >= lo) & (coord <= hi)
        closer = valid & (t < zbuf)
        zbuf[closer] = t[closer]
        cls[closer] = CLASS_CHANNEL[name]
        step_of[closer] = k

    hit = np.isfinite(zbuf)
    depth = np.where(hit, zbuf, 0.0).astype(np.float32)

    seg = np.zeros((h, w, 3), dtype=np.float32)
    rows, colsi = np.indices(cls.shape, sparse=True)
    seg[rows, colsi, cls] = 1.0

    rgb = np.empty((h, w, 3), dtype=np.uint8)
    rgb[:] = _BG_COLOR
    riser_sel = cls == CLASS_CHANNEL["riser"]
    tread_sel = cls == CLASS_CHANNEL["tread"]
    rgb[riser_sel, 0] = 200
    rgb[riser_sel, 1] = (50 + 15 * step_of[riser_sel]).astype(np.uint8)
    rgb[riser_sel, 2] = 50
    rgb[tread_sel, 0] = 50
    rgb[tread_sel, 1] = (90 + 15 * step_of[tread_sel]).astype(np.uint8)
    rgb[tread_sel, 2] = 200

    lines = scene_lines(spec)

    positive = depth[depth > 0]
    dmin = float(positive.min()) if positive.size else 0.2
    dmax = float(positive.max()) if positive.size else 10.0
    return SceneTruth(
        lines=lines,
        seg=SegmentationMask(TensorGrid(seg)),
        depth=DepthMatrix(TensorGrid(depth), dmin=dmin, dmax=dmax),
        rgb=TensorGrid(rgb),
        spec=spec,
        rotation=R,
    )


def _rect_corners(axis: int, value: float, bounds) -> np.ndarray:
    """Corner points of a bounded rectangle (wall gets token corners)."""
    if not bounds:
        p = np.zeros(3)
        p[axis] = value
        return p[None, :]
    (a0, lo0, hi0), (a1, lo1, hi1) = bounds
    corners = []
    for v0 in (lo0, hi0):
        for v1 in (lo1, hi1):
            p = np.zeros(3)
            p[axis] = value
            p[a0] = v0
            p[a1] = v1
            corners.append(p)
    return np.array(corners)


def add_noise(
    truth: SceneTruth,
    geom: GridGeometry,
    conf_jitter: float,
    loc_jitter_px: float,
    seed: int,
) -> tuple[LabelPair, LabelPair]:
    """Encode the scene's lines, then jitter the label grids.

    Gaussian noise of the given sigmas is added to heatmap values (clamped
    to [0, 1]) and, in pixel units, to the cell endpoint coordinates of
    occupied cells. Deterministic for a given seed; zero sigmas return the
    clean encoding unchanged. ``truth`` may also be a plain list of
    LineSegments.
    """
    if conf_jitter < 0 or loc_jitter_px < 0:
        raise ValueError("jitter sigmas must be >= 0")
    lines = truth.lines if hasattr(truth, "lines") else list(truth)
    convex, concave = encode_lines(lines, geom)
    rng = np.random.default_rng(seed)
    return (
        _jitter_pair(convex, conf_jitter, loc_jitter_px, rng, geom),
        _jitter_pair(concave, conf_jitter, loc_jitter_px, rng, geom),
    )


def _jitter_pair(pair: LabelPair, conf_sigma, loc_sigma_px, rng, geom) -> LabelPair:
    heat = pair.heatmap.data.astype(np.float64)
    loc = pair.locations.data.astype(np.float64)
    occupied = heat[:, :, 0] > 0
    if conf_sigma > 0:
        heat = np.clip(heat + rng.normal(0.0, conf_sigma, heat.shape), 0.0, 1.0)
    if loc_sigma_px > 0:
        jitter = rng.normal(0.0, loc_sigma_px, loc.shape)
        jitter[:, :, (0, 2)] /= geom.stride_w
        jitter[:, :, (1, 3)] /= geom.stride_h
        loc = np.clip(loc + np.where(occupied[:, :, None], jitter, 0.0), 0.0, 1.0)
    # keep the invariant: cells whose confidence clipped to 0 lose locations
    loc[heat[:, :, 0] == 0] = 0.0
    return LabelPair(
        heatmap=TensorGrid(heat.astype(np.float32)),
        locations=TensorGrid(loc.astype(np.float32)),
        kind=pair.kind,
    )
