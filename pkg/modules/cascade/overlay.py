"""
Overlay Rendering

One PNG per window: events coloured by the speed bin whose stage claimed
them (a discretized colour wheel, slow to fast), unclaimed events in grey,
and an arrow along each detected object's direction of motion.
"""

from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .pipeline import CascadeTrace  # noqa: E402
from ..events import BinnedVolume  # noqa: E402

ARROW_LENGTH_PX = 8.0
UNCLAIMED_RGB = (0.55, 0.55, 0.55)


def bin_colours(n_bins: int) -> np.ndarray:
    """RGB colour per speed bin 1..n_bins (row k - 1)"""
    wheel = plt.get_cmap("hsv")
    return np.array([wheel(i / n_bins)[:3] for i in range(n_bins)])


def overlay_image(volume: BinnedVolume, trace: CascadeTrace, n_bins: int) -> np.ndarray:
    """H x W x 3 float image of the window's events"""
    image = np.zeros(volume.shape + (3,))
    events = volume.event_grid().astype(bool)
    image[events] = UNCLAIMED_RGB

    colours = bin_colours(n_bins)
    for stage in trace.stages:
        claimed = stage.input.event_grid().astype(bool) & (stage.mask == 0)
        image[claimed] = colours[stage.speed_bin - 1]
    return image


def render_overlay(
    volume: BinnedVolume,
    trace: CascadeTrace,
    n_bins: int,
    path: Union[str, Path],
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    colours = bin_colours(n_bins)

    fig, ax = plt.subplots(figsize=(4, 4))
    try:
        ax.imshow(overlay_image(volume, trace, n_bins), interpolation="nearest")
        for flow in trace.flows:
            cx, cy = flow.center
            ax.arrow(
                cx,
                cy,
                ARROW_LENGTH_PX * np.cos(flow.direction),
                ARROW_LENGTH_PX * np.sin(flow.direction),
                color=colours[flow.speed_bin - 1],
                width=0.4,
                head_width=2.0,
                length_includes_head=True,
            )
            ax.annotate(f"bin {flow.speed_bin}", (cx, cy), color="white", fontsize=7)
        ax.set_title(f"t={volume.t_start} us  dt={volume.dt} us", fontsize=8)
        ax.set_axis_off()
        fig.savefig(path, dpi=100, bbox_inches="tight")
    finally:
        plt.close(fig)
    return path
