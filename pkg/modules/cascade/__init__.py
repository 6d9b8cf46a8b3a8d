"""
Cascade Module

Fastest-to-slowest OFS evaluation with close/invert masking, parallel OFPD
per speed bin, and the stitched per-window ObjectFlow list.
"""

from .morphology import (
    CascadeError,
    CascadeOrderError,
    CascadeShapeError,
    EvenKernelError,
    apply_mask,
    close,
    dilate,
    erode,
    make_mask,
)
from .pipeline import (
    FLOW_COLUMNS,
    CascadeStage,
    CascadeTrace,
    ObjectFlow,
    cascade_infer,
    check_models,
    infer_stream,
    read_flows_csv,
    run_cascade,
    write_flows_csv,
)
from .overlay import bin_colours, overlay_image, render_overlay

__all__ = [
    "CascadeError",
    "CascadeOrderError",
    "CascadeShapeError",
    "CascadeStage",
    "CascadeTrace",
    "EvenKernelError",
    "FLOW_COLUMNS",
    "ObjectFlow",
    "apply_mask",
    "bin_colours",
    "cascade_infer",
    "check_models",
    "close",
    "dilate",
    "erode",
    "infer_stream",
    "make_mask",
    "overlay_image",
    "read_flows_csv",
    "render_overlay",
    "run_cascade",
    "write_flows_csv",
]
