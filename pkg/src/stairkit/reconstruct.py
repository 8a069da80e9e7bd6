"""Stair point cloud reconstruction.

Segmentation scores are hardened to one-hot per pixel, the class plane
gates the depth matrix elementwise, and every surviving pixel is
back-projected through the inverse intrinsic matrix (pixel centers, x+0.5)
into a camera-frame point. Pixels without a depth return are dropped from
the cloud rather than emitted as (0,0,0) sentinels; the drop count is kept
on the cloud.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import CameraIntrinsics, PointCloud, TensorGrid

CLASS_ORDER = ("background", "riser", "tread")
CLASS_CHANNEL = {name: i for i, name in enumerate(CLASS_ORDER)}


class InvalidDepthError(ValueError):
    """Non-positive depth where a positive depth is required."""


@dataclass(frozen=True)
class SegmentationMask:
    """H x W x 3 class scores (raw) or one-hot planes, channel order
    (background, riser, tread)."""

    grid: TensorGrid

    def __post_init__(self):
        if self.grid.rank != 3 or self.grid.dims[2] != 3:
            raise ValueError(f"mask must be H x W x 3, got {self.grid.dims}")

    @property
    def is_one_hot(self) -> bool:
        a = self.grid.data
        return bool(np.all((a == 0) | (a == 1)) and np.all(a.astype(np.int64).sum(axis=2) == 1))


@dataclass(frozen=True)
class DepthMatrix:
    """H x W forward distances in meters; 0 marks pixels with no return.

    dmin/dmax bound the sensor's valid interval and are used only for
    validation warnings, never clamping.
    """

    grid: TensorGrid
    dmin: float = 0.2
    dmax: float = 10.0

    def __post_init__(self):
        a = self.grid.data
        if a.ndim != 2:
            raise ValueError(f"depth must be rank 2, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("depth contains non-finite values")
        valid = a[a != 0]
        if valid.size and (valid.min() < self.dmin or valid.max() > self.dmax):
            warnings.warn(
                f"depth values outside [{self.dmin}, {self.dmax}]: "
                f"range [{valid.min():.3g}, {valid.max():.3g}]",
                stacklevel=2,
            )


def harden_mask(scores: SegmentationMask) -> SegmentationMask:
    """Per pixel, keep only the max-score channel as 1 (Eq.-style one-hot).

    Ties go to the lowest channel index. Idempotent on one-hot input.
    """
    a = scores.grid.data
    out = np.zeros(a.shape, dtype=a.dtype)
    winners = a.argmax(axis=2)
    rows, cols = np.indices(winners.shape, sparse=True)
    out[rows, cols, winners] = 1
    return SegmentationMask(TensorGrid(out))


def class_depth(depth: DepthMatrix, mask: SegmentationMask, class_id) -> DepthMatrix:
    """Depth gated by one class's 0-1 plane (elementwise product)."""
    channel = _class_channel(class_id)
    d = depth.grid.data
    m = mask.grid.data
    if m.shape[:2] != d.shape:
        raise ValueError(f"mask {m.shape[:2]} does not match depth {d.shape}")
    gated = d * (m[:, :, channel] != 0)
    return DepthMatrix(TensorGrid(gated.astype(np.float32)), dmin=depth.dmin, dmax=depth.dmax)


def backproject_pixel(x: float, y: float, z: float, K: CameraIntrinsics):
    """Camera-frame point for pixel (x, y) at depth z, via the pixel center."""
    if z <= 0:
        raise InvalidDepthError(f"depth must be positive, got {z}")
    X = (x + 0.5 - K.cx) * z / K.fx
    Y = (y + 0.5 - K.cy) * z / K.fy
    return X, Y, z


def _class_channel(class_id) -> int:
    if isinstance(class_id, str):
        if class_id not in CLASS_CHANNEL:
            raise ValueError(f"unknown class {class_id!r}, expected one of {CLASS_ORDER}")
        return CLASS_CHANNEL[class_id]
    if class_id not in (0, 1, 2):
        raise ValueError(f"unknown class channel {class_id}, expected 0..2")
    return int(class_id)


def _band_points(rows_sel, cols_sel, zs, K: CameraIntrinsics) -> np.ndarray:
    xs = (cols_sel + 0.5 - K.cx) * zs / K.fx
    ys = (rows_sel + 0.5 - K.cy) * zs / K.fy
    return np.column_stack((xs, ys, zs))


def reconstruct_cloud(
    depth: DepthMatrix,
    mask: SegmentationMask,
    K: CameraIntrinsics,
    class_id,
    rgb: TensorGrid | None = None,
    threads: int = 1,
) -> PointCloud:
    """Back-project every pixel of one class that has a depth return.

    Points are emitted in row-major pixel order regardless of ``threads``;
    row bands are processed in parallel and concatenated in order.
    """
    channel = _class_channel(class_id)
    d = depth.grid.data
    m = mask.grid.data
    if m.shape[:2] != d.shape:
        raise ValueError(f"mask {m.shape[:2]} does not match depth {d.shape}")
    if rgb is not None:
        rgb_arr = rgb.data if isinstance(rgb, TensorGrid) else np.asarray(rgb)
        if rgb_arr.shape[:2] != d.shape:
            raise ValueError(f"rgb {rgb_arr.shape[:2]} does not match depth {d.shape}")
    else:
        rgb_arr = None

    in_class = m[:, :, channel] != 0
    keep = in_class & (d != 0)
    dropped = int(in_class.sum() - keep.sum())

    h = d.shape[0]
    threads = max(1, int(threads))
    bands = [(i * h // threads, (i + 1) * h // threads) for i in range(threads)]
    bands = [b for b in bands if b[0] < b[1]]

    def run_band(band):
        r0, r1 = band
        rows_sel, cols_sel = np.nonzero(keep[r0:r1])
        zs = d[r0:r1][rows_sel, cols_sel].astype(np.float64)
        pts = _band_points(
            (rows_sel + r0).astype(np.float64), cols_sel.astype(np.float64), zs, K
        )
        if rgb_arr is None:
            return pts, None
        return pts, rgb_arr[r0:r1][rows_sel, cols_sel]

    if len(bands) == 1:
        results = [run_band(bands[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(bands)) as pool:
            results = list(pool.map(run_band, bands))

    points = np.concatenate([r[0] for r in results]) if results else np.empty((0, 3))
    colors = None
    if rgb_arr is not None:
        colors = np.concatenate([r[1] for r in results]) if results else np.empty((0, 3), np.uint8)
    return PointCloud(
        points=points,
        class_id=CLASS_ORDER[channel],
        colors=colors,
        dropped=dropped,
    )


# ---------------------------------------------------------------------------
# ASCII PLY
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".9g")


def write_ply(cloud: PointCloud, path) -> None:
    """Write an ASCII PLY file; colors included when the cloud carries them."""
    lines = [
        "ply",
        "format ascii 1.0",
        f"comment class {cloud.class_id}",
        f"comment dropped {cloud.dropped}",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if cloud.colors is not None:
        lines += ["property uchar red", "property uchar green", "property uchar blue"]
    lines.append("end_header")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
        if cloud.colors is None:
            for x, y, z in cloud.points:
                fh.write(f"{_fmt(x)} {_fmt(y)} {_fmt(z)}\n")
        else:
            for (x, y, z), (r, g, b) in zip(cloud.points, cloud.colors):
                fh.write(f"{_fmt(x)} {_fmt(y)} {_fmt(z)} {r} {g} {b}\n")


def read_ply(path) -> PointCloud:
    """Read an ASCII PLY written by write_ply (x y z [red green blue])."""
    with open(path, "r", encoding="ascii") as fh:
        if fh.readline().strip() != "ply":
            raise ValueError(f"{path}: not a PLY file")
        n = None
        has_color = False
        class_id = "background"
        dropped = 0
        for raw in fh:
            tok = raw.split()
            if tok[:2] == ["element", "vertex"]:
                n = int(tok[2])
            elif tok[:2] == ["property", "uchar"]:
                has_color = True
            elif tok[:2] == ["comment", "class"]:
                class_id = tok[2]
            elif tok[:2] == ["comment", "dropped"]:
                dropped = int(tok[2])
            elif tok == ["end_header"]:
                break
        if n is None:
            raise ValueError(f"{path}: missing vertex element")
        pts = np.empty((n, 3), dtype=np.float64)
        col = np.empty((n, 3), dtype=np.uint8) if has_color else None
        for i in range(n):
            tok = fh.readline().split()
            pts[i] = [float(t) for t in tok[:3]]
            if has_color:
                col[i] = [int(t) for t in tok[3:6]]
    return PointCloud(points=pts, class_id=class_id, colors=col, dropped=dropped)
