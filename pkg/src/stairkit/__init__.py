"""stairkit: stair-modeling geometry toolkit.

Gaussian-kernel heatmap label encoding/decoding for stair lines, cell-group
line linking, segmentation-gated point cloud reconstruction, reference loss
functions, evaluation metrics and a synthetic stair-scene oracle.
"""

__version__ = "0.1.0"

from .core import (
    CONCAVE,
    CONVEX,
    CameraIntrinsics,
    GridGeometry,
    LineEquation,
    LineSegment,
    PointCloud,
    TensorGrid,
    focus_slice,
    focus_unslice,
    format_intrinsics,
    parse_intrinsics,
    read_tensor,
    write_tensor,
)
from .label_codec import (
    CellDetection,
    LabelPair,
    cell_to_pixels,
    decode_cells,
    encode_lines,
    gaussian_response,
    pixel_to_cell,
)
from .line_linker import LinkerConfig, link_lines
from .losses import LineLossInput, LossConfig, depth_loss, line_loss, seg_loss, total_loss
from .metrics import cell_confusion, pixel_accuracy, precision_recall_iou
from .reconstruct import (
    DepthMatrix,
    SegmentationMask,
    backproject_pixel,
    class_depth,
    harden_mask,
    read_ply,
    reconstruct_cloud,
    write_ply,
)
from .synth import (
    SceneTruth,
    StairSpec,
    add_noise,
    generate_scene,
    project_point,
    scene_lines,
)

__all__ = [
    "CONCAVE",
    "CONVEX",
    "CameraIntrinsics",
    "CellDetection",
    "DepthMatrix",
    "GridGeometry",
    "LabelPair",
    "LineEquation",
    "LineLossInput",
    "LineSegment",
    "LinkerConfig",
    "LossConfig",
    "PointCloud",
    "SceneTruth",
    "SegmentationMask",
    "StairSpec",
    "TensorGrid",
    "add_noise",
    "backproject_pixel",
    "cell_confusion",
    "cell_to_pixels",
    "class_depth",
    "decode_cells",
    "depth_loss",
    "encode_lines",
    "focus_slice",
    "focus_unslice",
    "format_intrinsics",
    "gaussian_response",
    "generate_scene",
    "harden_mask",
    "line_loss",
    "link_lines",
    "parse_intrinsics",
    "pixel_accuracy",
    "pixel_to_cell",
    "precision_recall_iou",
    "project_point",
    "read_ply",
    "read_tensor",
    "reconstruct_cloud",
    "scene_lines",
    "seg_loss",
    "total_loss",
    "write_ply",
    "write_tensor",
]
