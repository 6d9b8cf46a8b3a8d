"""
Morphology and Masking

Binary closing with a k x k square, and the mask that removes an OFS
stage's events (closed) from the input of the next, slower stage.
"""

import numpy as np
from scipy.ndimage import binary_dilation, binary_erosion

from ..events import BinnedVolume


class CascadeError(ValueError):
    """Base class for cascade errors"""


class CascadeOrderError(CascadeError):
    """OFS models are not in strictly descending speed-bin order"""


class CascadeShapeError(CascadeError):
    """Grids, volumes or models disagree on spatial shape"""


class EvenKernelError(CascadeError):
    """Structuring element size must be odd"""


def _square(k: int) -> np.ndarray:
    if k < 1 or k % 2 == 0:
        raise EvenKernelError(f"kernel size must be a positive odd number, got {k}")
    return np.ones((k, k), dtype=bool)


def _as_binary(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise CascadeShapeError(f"expected an H x W grid, got shape {grid.shape}")
    return grid != 0


def dilate(grid: np.ndarray, k: int) -> np.ndarray:
    """Dilation by a k x k square; pixels outside the grid count as 0"""
    return binary_dilation(_as_binary(grid), structure=_square(k)).astype(np.uint8)


def erode(grid: np.ndarray, k: int) -> np.ndarray:
    """Erosion by a k x k square; pixels outside the grid count as 0"""
    return binary_erosion(_as_binary(grid), structure=_square(k), border_value=0).astype(np.uint8)


def close(grid: np.ndarray, k: int = 5) -> np.ndarray:
    """
    Closing (dilate then erode) by a k x k square.

    The grid is padded by k // 2 so the erosion never sees the edge: the
    result is extensive (grid <= close(grid)) and idempotent.

    Raises:
        EvenKernelError: k is even or not positive
    """
    _square(k)
    r = k // 2
    closed = erode(dilate(np.pad(_as_binary(grid), r), k), k)
    return closed[r : closed.shape[0] - r, r : closed.shape[1] - r].astype(np.uint8)


def make_mask(out_k: np.ndarray, k: int = 5) -> np.ndarray:
    """mask = 1 - close(out_k)"""
    return (1 - close(out_k, k)).astype(np.uint8)


def apply_mask(volume: BinnedVolume, mask: np.ndarray) -> BinnedVolume:
    """
    Zero every bin and polarity at masked-out pixels.

    Raises:
        CascadeShapeError: mask shape differs from the volume grid
    """
    mask = np.asarray(mask)
    if mask.shape != volume.shape:
        raise CascadeShapeError(f"mask shape {mask.shape} does not match volume grid {volume.shape}")
    return volume.with_bins(volume.bins * (mask != 0)[None, None].astype(volume.bins.dtype))
