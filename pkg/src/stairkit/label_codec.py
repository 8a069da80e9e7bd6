"""Encode stair lines into Gaussian heatmap + location grids and decode them back.

Each grid cell carries a confidence shaped by a Gaussian kernel that peaks
(value 1) at the line endpoints and decays toward the middle, bottoming out
at exp(-1/2) ~ 0.6065 at the midpoint. Alongside the heatmap, a 4-channel
location grid regresses the endpoints of the line piece clipped to the cell,
normalized to [0, 1] relative to the cell's upper-left corner.

Convex and concave lines are encoded into fully independent grid pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    CONCAVE,
    CONVEX,
    KINDS,
    BoundsError,
    DegenerateLineError,
    GridGeometry,
    LineSegment,
    TensorGrid,
)


@dataclass(frozen=True)
class CellDetection:
    """One decoded grid cell: confidence plus cell-normalized endpoints."""

    row: int
    col: int
    confidence: float
    endpoints: tuple[float, float, float, float]  # (x1n, y1n, x2n, y2n) in [0,1]
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")


@dataclass(frozen=True)
class LabelPair:
    """Heatmap (R x C x 1) + locations (R x C x 4) for one line kind.

    Cells with zero heatmap must have all-zero locations.
    """

    heatmap: TensorGrid
    locations: TensorGrid
    kind: str

    def __post_init__(self):
        h, l = self.heatmap.data, self.locations.data
        if h.ndim != 3 or h.shape[2] != 1:
            raise ValueError(f"heatmap must be R x C x 1, got {h.shape}")
        if l.shape != (h.shape[0], h.shape[1], 4):
            raise ValueError(f"locations must be {h.shape[:2] + (4,)}, got {l.shape}")
        if h.min() < 0 or h.max() > 1 or l.min() < 0 or l.max() > 1:
            raise ValueError("heatmap/location values must lie in [0, 1]")
        if np.any((h[:, :, 0] == 0) & np.any(l != 0, axis=2)):
            raise ValueError("zero-heatmap cells must have all-zero locations")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")

    @property
    def grid_rows(self) -> int:
        return self.heatmap.dims[0]

    @property
    def grid_cols(self) -> int:
        return self.heatmap.dims[1]


def gaussian_response(x: float, y: float, line: LineSegment) -> float:
    """Heatmap value at an on-line point (x, y).

    exp(-(d^2) / (2 sigma^2)) with d the distance to the nearer endpoint and
    sigma = half the segment length, so endpoints score 1 and the midpoint
    scores exp(-1/2).
    """
    if line.is_degenerate:
        raise DegenerateLineError(f"zero-length line at ({line.x1}, {line.y1})")
    sigma = 0.5 * line.length
    d2 = min(
        (x - line.x1) ** 2 + (y - line.y1) ** 2,
        (x - line.x2) ** 2 + (y - line.y2) ** 2,
    )
    return math.exp(-d2 / (2.0 * sigma * sigma))


def pixel_to_cell(x: float, y: float, geom: GridGeometry) -> tuple[int, int]:
    """Grid cell (row, col) containing pixel (x, y)."""
    if not (0 <= x < geom.input_w and 0 <= y < geom.input_h):
        raise BoundsError(f"pixel ({x}, {y}) outside {geom.input_w}x{geom.input_h}")
    return int(y // geom.stride_h), int(x // geom.stride_w)


def raster_step(geom: GridGeometry) -> float:
    """Sub-pixel sampling step used when rasterizing lines into cells."""
    return min(geom.stride_w, geom.stride_h) / 4.0


def _clip_to_rect(x1, y1, x2, y2, rx0, ry0, rx1, ry1):
    """Liang-Barsky clip of segment (x1,y1)-(x2,y2) to [rx0,rx1] x [ry0,ry1].

    Returns clipped endpoints or None when the segment misses the rectangle.
    """
    dx, dy = x2 - x1, y2 - y1
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x1 - rx0), (dx, rx1 - x1), (-dy, y1 - ry0), (dy, ry1 - y1)):
        if p == 0.0:
            if q < 0.0:
                return None
        else:
            r = q / p
            if p < 0.0:
                if r > t1:
                    return None
                if r > t0:
                    t0 = r
            else:
                if r < t0:
                    return None
                if r < t1:
                    t1 = r
    return (x1 + t0 * dx, y1 + t0 * dy, x1 + t1 * dx, y1 + t1 * dy)


def _cell_locations(
    line: LineSegment, row: int, col: int, geom: GridGeometry, fallback: tuple[float, float]
):
    """Endpoints of line ∩ cell, normalized to the cell's upper-left corner."""
    sw, sh = geom.stride_w, geom.stride_h
    rx0, ry0 = col * sw, row * sh
    clipped = _clip_to_rect(
        line.x1, line.y1, line.x2, line.y2, rx0, ry0, rx0 + sw, ry0 + sh
    )
    if clipped is None:
        # only reachable through rounding at a cell corner; degrade to the
        # sample point that claimed the cell
        fx, fy = fallback
        clipped = (fx, fy, fx, fy)
    cx1, cy1, cx2, cy2 = clipped
    if (cx1, cy1) > (cx2, cy2):
        cx1, cy1, cx2, cy2 = cx2, cy2, cx1, cy1
    x1n = min(max((cx1 - rx0) / sw, 0.0), 1.0)
    y1n = min(max((cy1 - ry0) / sh, 0.0), 1.0)
    x2n = min(max((cx2 - rx0) / sw, 0.0), 1.0)
    y2n = min(max((cy2 - ry0) / sh, 0.0), 1.0)
    return x1n, y1n, x2n, y2n


def encode_lines(
    lines: list[LineSegment], geom: GridGeometry
) -> tuple[LabelPair, LabelPair]:
    """Rasterize ground-truth lines into (convex, concave) label grids.

    Every cell traversed by a line receives the max Gaussian response over
    the traversed sample points, and the endpoints of the line piece clipped
    to that cell. Where lines overlap in a cell, the strongest response wins
    and its line supplies the locations.
    """
    heat = {k: np.zeros((geom.grid_rows, geom.grid_cols), dtype=np.float64) for k in KINDS}
    loc = {k: np.zeros((geom.grid_rows, geom.grid_cols, 4), dtype=np.float64) for k in KINDS}

    step = raster_step(geom)
    for line in lines:
        for x, y in line.endpoints():
            if not (0 <= x < geom.input_w and 0 <= y < geom.input_h):
                raise BoundsError(
                    f"{line.kind} segment ({line.x1}, {line.y1})-({line.x2}, {line.y2})"
                    f" endpoint ({x}, {y}) outside {geom.input_w}x{geom.input_h}"
                )
        if line.is_degenerate:
            raise DegenerateLineError(
                f"zero-length {line.kind} line at ({line.x1}, {line.y1})"
            )

        length = line.length
        n = max(1, math.ceil(length / step))
        # per-cell best (response, sample point) along this line
        best: dict[tuple[int, int], tuple[float, float, float]] = {}
        for i in range(n + 1):
            if i == n:
                x, y = line.x2, line.y2
            else:
                t = i / n
                x = line.x1 + t * (line.x2 - line.x1)
                y = line.y1 + t * (line.y2 - line.y1)
            cell = pixel_to_cell(x, y, geom)
            r = gaussian_response(x, y, line)
            prev = best.get(cell)
            if prev is None or r > prev[0]:
                best[cell] = (r, x, y)

        h, l = heat[line.kind], loc[line.kind]
        for (row, col), (r, sx, sy) in best.items():
            if r > h[row, col]:
                h[row, col] = r
                l[row, col] = _cell_locations(line, row, col, geom, (sx, sy))

    def pack(kind: str) -> LabelPair:
        return LabelPair(
            heatmap=TensorGrid(heat[kind][:, :, None].astype(np.float32)),
            locations=TensorGrid(loc[kind].astype(np.float32)),
            kind=kind,
        )

    return pack(CONVEX), pack(CONCAVE)


def decode_cells(labels: LabelPair, threshold: float) -> list[CellDetection]:
    """All cells with heatmap >= threshold, strongest first.

    Ties are broken by (row, col) ascending, making truncation downstream
    reproducible.
    """
    h = labels.heatmap.data[:, :, 0].astype(np.float64)
    l = labels.locations.data.astype(np.float64)
    rows, cols = np.nonzero(h >= threshold)
    dets = [
        CellDetection(
            row=int(r),
            col=int(c),
            confidence=float(h[r, c]),
            endpoints=tuple(float(v) for v in l[r, c]),
            kind=labels.kind,
        )
        for r, c in zip(rows, cols)
    ]
    dets.sort(key=lambda d: (-d.confidence, d.row, d.col))
    return dets


def cell_to_pixels(det: CellDetection, geom: GridGeometry) -> LineSegment:
    """Denormalize a detection back to an input-pixel segment.

    All-zero detections yield a degenerate segment (check is_degenerate).
    """
    x1n, y1n, x2n, y2n = det.endpoints
    return LineSegment(
        kind=det.kind,
        x1=(det.col + x1n) * geom.stride_w,
        y1=(det.row + y1n) * geom.stride_h,
        x2=(det.col + x2n) * geom.stride_w,
        y2=(det.row + y2n) * geom.stride_h,
        score=det.confidence,
    )


# ---------------------------------------------------------------------------
# Ground-truth lines CSV:  kind,x1,y1,x2,y2
# ---------------------------------------------------------------------------

def read_lines_csv(path) -> list[LineSegment]:
    import csv

    with open(path, "r", newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        required = {"kind", "x1", "y1", "x2", "y2"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected header kind,x1,y1,x2,y2")
        return [
            LineSegment(
                kind=row["kind"],
                x1=float(row["x1"]),
                y1=float(row["y1"]),
                x2=float(row["x2"]),
                y2=float(row["y2"]),
            )
            for row in reader
        ]


def write_lines_csv(lines: list[LineSegment], path) -> None:
    import csv

    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "x1", "y1", "x2", "y2"])
        for s in lines:
            writer.writerow([s.kind, f"{s.x1:.6f}", f"{s.y1:.6f}", f"{s.x2:.6f}", f"{s.y2:.6f}"])


def label_paths(directory, stem: str, kind: str) -> tuple[str, str]:
    """Conventional file names for persisted label grids."""
    import os

    return (
        os.path.join(directory, f"{stem}.heat.{kind}.stn3"),
        os.path.join(directory, f"{stem}.loc.{kind}.stn3"),
    )
