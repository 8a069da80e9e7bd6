"""File formats and the focus rearrangement.

STN3 is the toolkit's tensor container: a 16- to 20-byte header (magic,
version, dtype, rank, extents) followed by the row-major payload. Focus
slicing is the space-to-depth step that splits each 2x2 pixel block into
four channel groups, halving the spatial size and quadrupling the channels
without losing an element.
"""

import os
import tempfile

import numpy as np

from stairkit import (
    CameraIntrinsics,
    TensorGrid,
    focus_slice,
    focus_unslice,
    format_intrinsics,
    parse_intrinsics,
    read_tensor,
    write_tensor,
)

rng = np.random.default_rng(3)

# STN3 roundtrip
grid = TensorGrid(rng.standard_normal((6, 5, 2)).astype(np.float32))
with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "grid.stn3")
    write_tensor(grid, path)
    size = os.path.getsize(path)
    back = read_tensor(path)
print(f"STN3 roundtrip: dims {grid.dims}, file {size} bytes "
      f"(header {size - grid.data.nbytes} + payload {grid.data.nbytes})")
print(f"  bit-exact: {np.array_equal(back.data, grid.data)}")

# intrinsics text roundtrip
K = CameraIntrinsics(fx=450.0, fy=450.0, cx=256.0, cy=256.0)
text = format_intrinsics(K)
print(f"\nintrinsics text:\n{text}", end="")
print(f"  parses back to {parse_intrinsics(text)}")

# focus slicing
img = TensorGrid(rng.standard_normal((8, 6, 3)).astype(np.float32))
sliced = focus_slice(img)
restored = focus_unslice(sliced)
print(f"\nfocus slice: {img.dims} -> {sliced.dims}")
print(f"  element count preserved: {sliced.data.size == img.data.size}")
print(f"  inverse gather restores input exactly: {np.array_equal(restored.data, img.data)}")
