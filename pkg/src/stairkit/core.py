"""Shared domain types, the STN3 tensor container, camera intrinsics and focus slicing.

Conventions used throughout the toolkit:

* Pixel (x, y) names the pixel's top-left corner in continuous image
  coordinates; anything that needs a sub-pixel location (back-projection,
  projection) works with pixel centers (x + 0.5, y + 0.5).
* Line segments are stored left endpoint first (x1 <= x2, ties broken by
  y1 <= y2).
* Grids are dense row-major numpy arrays, channel-fastest when rank 3.
  Files are f32/u8; internal arithmetic runs at f64.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

CONVEX = "convex"
CONCAVE = "concave"
KINDS = (CONVEX, CONCAVE)

_STN3_MAGIC = b"STN3"
_STN3_VERSION = 1
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.uint8): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype(np.uint8)}


class FormatError(ValueError):
    """A serialized payload does not match its declared format."""


class BoundsError(ValueError):
    """A coordinate or segment falls outside the valid image/grid region."""


class DegenerateLineError(ValueError):
    """A zero-length line where positive length is required."""


def _check_grid_array(arr: np.ndarray) -> np.ndarray:
    if arr.ndim not in (2, 3):
        raise ValueError(f"grid rank must be 2 or 3, got {arr.ndim}")
    if any(e < 1 for e in arr.shape):
        raise ValueError(f"grid extents must be >= 1, got {arr.shape}")
    if arr.dtype not in (np.dtype(np.float32), np.dtype(np.uint8)):
        raise ValueError(f"grid dtype must be float32 or uint8, got {arr.dtype}")
    arr = np.ascontiguousarray(arr)
    if arr.flags.writeable:
        arr = arr.copy()  # do not freeze (or share) the caller's buffer
        arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TensorGrid:
    """Dense row-major grid of rank 2 or 3, the common currency for
    heatmaps, masks, depth and location tensors.

    ``data`` holds float32 or uint8 values, channel-fastest when rank 3.
    The array is frozen (read-only) after construction.
    """

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _check_grid_array(self.data))

    @classmethod
    def from_array(cls, arr) -> "TensorGrid":
        """Wrap an array, casting floats to f32 (the on-disk precision)."""
        arr = np.asarray(arr)
        if arr.dtype.kind == "f" and arr.dtype != np.float32:
            arr = arr.astype(np.float32)
        elif arr.dtype.kind in "iu" and arr.dtype != np.uint8:
            raise ValueError(f"integer grids must be uint8, got {arr.dtype}")
        return cls(arr)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def rank(self) -> int:
        return self.data.ndim

    def __array__(self, dtype=None):
        return self.data if dtype is None else self.data.astype(dtype)


@dataclass(frozen=True)
class GridGeometry:
    """Mapping between the input image and the coarse cell grid."""

    input_h: int = 512
    input_w: int = 512
    grid_rows: int = 64
    grid_cols: int = 32

    def __post_init__(self):
        if self.input_h % self.grid_rows or self.input_w % self.grid_cols:
            raise ValueError(
                f"input {self.input_h}x{self.input_w} not divisible by "
                f"grid {self.grid_rows}x{self.grid_cols}"
            )

    @property
    def stride_h(self) -> int:
        return self.input_h // self.grid_rows

    @property
    def stride_w(self) -> int:
        return self.input_w // self.grid_cols


DEFAULT_GEOMETRY = GridGeometry()


@dataclass(frozen=True)
class LineSegment:
    """One stair line (convex or concave) in input-pixel coordinates.

    Stored left endpoint first. Zero-length segments are representable
    (decoders can emit them for empty cells) but are rejected wherever a
    positive length is required; check ``is_degenerate``.
    """

    kind: str
    x1: float
    y1: float
    x2: float
    y2: float
    score: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown line kind {self.kind!r}")
        if (self.x1, self.y1) > (self.x2, self.y2):
            # normalize to left-endpoint-first, ties broken by y
            x1, y1, x2, y2 = self.x2, self.y2, self.x1, self.y1
            object.__setattr__(self, "x1", x1)
            object.__setattr__(self, "y1", y1)
            object.__setattr__(self, "x2", x2)
            object.__setattr__(self, "y2", y2)

    @property
    def length(self) -> float:
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)

    @property
    def is_degenerate(self) -> bool:
        return self.length == 0.0

    def endpoints(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return (self.x1, self.y1), (self.x2, self.y2)


@dataclass(frozen=True)
class LineEquation:
    """Whole-stair line y = k*x + b over the pixel domain [x_min, x_max]."""

    kind: str
    k: float
    b: float
    x_min: float
    x_max: float
    source_cells: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown line kind {self.kind!r}")
        if not self.x_min < self.x_max:
            raise ValueError(f"empty domain [{self.x_min}, {self.x_max}]")

    def y_at(self, x: float) -> float:
        return self.k * x + self.b

    @property
    def mean_y(self) -> float:
        return self.k * 0.5 * (self.x_min + self.x_max) + self.b


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model; focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got {self.fx}, {self.fy}")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class PointCloud:
    """Camera-frame 3D points for one segmentation class.

    Zero-depth pixels are never emitted; ``dropped`` counts mask-selected
    pixels that were skipped for lack of a depth return.
    """

    points: np.ndarray           # (N, 3) float64, meters
    class_id: str
    colors: np.ndarray | None = None  # (N, 3) uint8
    dropped: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if pts.flags.writeable:
            pts = pts.copy()
            pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.colors is not None:
            col = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
            if len(col) != len(pts):
                raise ValueError(f"{len(col)} colors for {len(pts)} points")
            if col.flags.writeable:
                col = col.copy()
                col.flags.writeable = False
            object.__setattr__(self, "colors", col)

    def __len__(self) -> int:
        return len(self.points)


# ---------------------------------------------------------------------------
# STN3 tensor file format
#
# little-endian:  magic "STN3" | version u8 = 1 | dtype u8 (0=f32, 1=u8)
#                 | rank u8 in {2,3} | pad u8 = 0 | rank x u32 extents
#                 | row-major payload (channel-fastest)
# ---------------------------------------------------------------------------

def write_tensor(grid, path) -> None:
    """Serialize a grid to an STN3 file. Deterministic: same grid, same bytes."""
    if not isinstance(grid, TensorGrid):
        grid = TensorGrid(np.asarray(grid))
    arr = grid.data
    dtype_code = _DTYPE_CODES[arr.dtype]
    header = _STN3_MAGIC + struct.pack("<BBBB", _STN3_VERSION, dtype_code, arr.ndim, 0)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = arr.astype("<f4").tobytes() if dtype_code == 0 else arr.tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_tensor(path) -> TensorGrid:
    """Read an STN3 file, validating every header field."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != _STN3_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    version, dtype_code, rank, pad = struct.unpack("<BBBB", raw[4:8])
    if version != _STN3_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype_code not in _CODE_DTYPES:
        raise FormatError(f"{path}: unsupported dtype code {dtype_code}")
    if rank not in (2, 3):
        raise FormatError(f"{path}: unsupported rank {rank}")
    if pad != 0:
        raise FormatError(f"{path}: nonzero pad byte {pad}")
    offset = 8 + 4 * rank
    if len(raw) < offset:
        raise FormatError(f"{path}: truncated extents")
    dims = struct.unpack(f"<{rank}I", raw[8:offset])
    if any(d < 1 for d in dims):
        raise FormatError(f"{path}: bad extent in {dims}")
    dtype = _CODE_DTYPES[dtype_code]
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(raw) - offset != expected:
        raise FormatError(
            f"{path}: payload is {len(raw) - offset} bytes, expected {expected}"
        )
    arr = np.frombuffer(raw, dtype=dtype, count=int(np.prod(dims)), offset=offset)
    arr = arr.reshape(dims)
    if dtype_code == 0:
        arr = arr.astype(np.float32)  # native-endian copy
    else:
        arr = arr.copy()
    arr.flags.writeable = False
    return TensorGrid(arr)


# ---------------------------------------------------------------------------
# Camera intrinsics text format: 9 whitespace-separated decimals, row-major 3x3
# ---------------------------------------------------------------------------

def parse_intrinsics(text: str) -> CameraIntrinsics:
    """Parse a row-major 3x3 intrinsic matrix with zero skew.

    Expects row 3 = (0, 0, 1) and zero off-diagonals in the upper 2x2.
    """
    tokens = text.split()
    if len(tokens) != 9:
        raise FormatError(f"intrinsics need 9 values, got {len(tokens)}")
    try:
        vals = [float(t) for t in tokens]
    except ValueError as exc:
        raise FormatError(f"intrinsics: non-numeric token ({exc})") from exc
    k = np.array(vals).reshape(3, 3)
    if abs(k[0, 1]) > 1e-9 or abs(k[1, 0]) > 1e-9:
        raise FormatError(f"intrinsics skew must be zero, got {k[0, 1]}, {k[1, 0]}")
    if not (k[2, 0] == 0.0 and k[2, 1] == 0.0 and k[2, 2] == 1.0):
        raise FormatError(f"intrinsics bottom row must be (0, 0, 1), got {k[2]}")
    if k[0, 0] <= 0 or k[1, 1] <= 0:
        raise FormatError(f"focal lengths must be positive, got {k[0, 0]}, {k[1, 1]}")
    return CameraIntrinsics(
        fx=float(k[0, 0]), fy=float(k[1, 1]), cx=float(k[0, 2]), cy=float(k[1, 2])
    )


def format_intrinsics(K: CameraIntrinsics) -> str:
    """Inverse of parse_intrinsics (shortest exact decimals; round-trips)."""
    fx, fy, cx, cy = (float(v) for v in (K.fx, K.fy, K.cx, K.cy))
    return f"{fx!r} 0 {cx!r}\n0 {fy!r} {cy!r}\n0 0 1\n"


def read_intrinsics(path) -> CameraIntrinsics:
    with open(path, "r", encoding="ascii") as fh:
        return parse_intrinsics(fh.read())


# ---------------------------------------------------------------------------
# Focus slicing: split each 2x2 pixel block into 4 channel groups
# ---------------------------------------------------------------------------

def focus_slice(image: TensorGrid) -> TensorGrid:
    """Space-to-depth rearrangement H x W x C -> (H/2) x (W/2) x 4C.

    Channel blocks in order (even-row/even-col, odd-row/even-col,
    even-row/odd-col, odd-row/odd-col); each block keeps the original
    channel order. Pure permutation: the element multiset is preserved.
    """
    arr = image.data if isinstance(image, TensorGrid) else np.asarray(image)
    if arr.ndim != 3:
        raise ValueError(f"focus_slice needs a rank-3 grid, got rank {arr.ndim}")
    h, w, _ = arr.shape
    if h % 2 or w % 2:
        raise ValueError(f"focus_slice needs even H and W, got {h}x{w}")
    out = np.concatenate(
        [arr[0::2, 0::2], arr[1::2, 0::2], arr[0::2, 1::2], arr[1::2, 1::2]],
        axis=2,
    )
    return TensorGrid(np.ascontiguousarray(out))


def focus_unslice(sliced: TensorGrid) -> TensorGrid:
    """Exact inverse gather of focus_slice."""
    arr = sliced.data if isinstance(sliced, TensorGrid) else np.asarray(sliced)
    if arr.ndim != 3 or arr.shape[2] % 4:
        raise ValueError(f"not a focus-sliced grid: shape {arr.shape}")
    h2, w2, c4 = arr.shape
    c = c4 // 4
    out = np.empty((2 * h2, 2 * w2, c), dtype=arr.dtype)
    out[0::2, 0::2] = arr[:, :, 0 * c : 1 * c]
    out[1::2, 0::2] = arr[:, :, 1 * c : 2 * c]
    out[0::2, 1::2] = arr[:, :, 2 * c : 3 * c]
    out[1::2, 1::2] = arr[:, :, 3 * c : 4 * c]
    return TensorGrid(out)
