"""Alternative warping backends sharing the bilinear sampler.

Three transformation families besides the control-point spline: a global
projective transform (8 parameters), a coarse dense deformation grid
bilinearly upsampled to the image plane, and landmark-anchored warping that
reuses the TPS path with fixed anchor points.
"""

import numpy as np

from .errors import DomainError, ParameterError, ShapeError
from .sampler import (
    bilinear_sample,
    pixel_centers,
    sample_at_pixels,
    validate_image,
    warp_image,
)
from .tps import MIN_SEPARATION, ControlPointSet, _as_points

_MIN_HOMOGRAPHY_DET = 1e-12

IDENTITY_PROJECTIVE = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0)


def homography_from_params(params) -> np.ndarray:
    """3x3 homography from 8 parameters (row-major, bottom-right fixed to 1)."""
    arr = np.asarray(params, dtype=float).reshape(-1)
    if arr.shape != (8,):
        raise ShapeError(f"projective transform takes 8 parameters, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("projective parameters must be finite")
    matrix = np.append(arr, 1.0).reshape(3, 3)
    if abs(np.linalg.det(matrix)) <= _MIN_HOMOGRAPHY_DET:
        raise ParameterError("projective matrix is not invertible (|det| <= 1e-12)")
    return matrix


def projective_warp(image: np.ndarray, params) -> np.ndarray:
    """Warp by a homography: the inverse matrix maps each destination pixel
    center (NDC, homogeneous) to its source location."""
    image = validate_image(image)
    matrix = homography_from_params(params)
    if np.array_equal(matrix, np.eye(3)):
        return image.copy()
    h, w = image.shape[:2]
    inverse = np.linalg.inv(matrix)
    grid = pixel_centers(h, w).reshape(-1, 2)
    homogeneous = np.column_stack([grid, np.ones(len(grid))]) @ inverse.T
    z = homogeneous[:, 2]
    if np.any(np.abs(z) < 1e-12):
        raise ParameterError("homography maps a pixel to infinity")
    flow = (homogeneous[:, :2] / z[:, None]).reshape(h, w, 2)
    return bilinear_sample(image, flow)


def upsample_offsets(grid: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinearly upsample a coarse g_h x g_w x 2 offset grid to H x W x 2.

    Grid nodes span the full NDC square, corners included, so pixel centers
    always query strictly inside the node lattice.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 3 or grid.shape[2] != 2:
        raise ShapeError(f"deformation grid must be g_h x g_w x 2, got {grid.shape}")
    g_h, g_w = grid.shape[:2]
    if g_h < 2 or g_w < 2:
        raise ShapeError("deformation grid needs at least 2 nodes per axis")
    if not np.all(np.isfinite(grid)):
        raise DomainError("deformation grid must be finite")
    centers = pixel_centers(height, width)
    node_coords = np.empty_like(centers)
    node_coords[:, :, 0] = (centers[:, :, 0] + 1.0) * (g_w - 1) / 2.0
    node_coords[:, :, 1] = (centers[:, :, 1] + 1.0) * (g_h - 1) / 2.0
    return sample_at_pixels(grid, node_coords)


def dense_warp(image: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Warp by a coarse deformation grid of NDC source offsets.

    The upsampled offsets are added to the identity grid, so the all-zero
    grid is the identity (returned as an exact copy).
    """
    image = validate_image(image)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 3 or grid.shape[2] != 2 or min(grid.shape[:2]) < 2:
        raise ShapeError(f"deformation grid must be g_h x g_w x 2 (g >= 2), got {grid.shape}")
    if not grid.any():
        return image.copy()
    h, w = image.shape[:2]
    flow = pixel_centers(h, w) + upsample_offsets(grid, h, w)
    return bilinear_sample(image, flow)


def landmark_warp(
    image: np.ndarray,
    anchors,
    displacements,
    alpha: float = 1.0,
    regularization: float = 0.0,
) -> np.ndarray:
    """TPS warp anchored at fixed landmark positions; only the displacements
    vary. Identical to ``warp_image`` on the same point set."""
    anchors = _as_points(anchors, "anchors")
    diffs = anchors[:, None, :] - anchors[None, :, :]
    dist = np.hypot(diffs[..., 0], diffs[..., 1])
    np.fill_diagonal(dist, np.inf)
    if dist.min() < MIN_SEPARATION:
        raise DomainError("landmark anchors must be pairwise distinct (>= 1e-8)")
    control = ControlPointSet(anchors, displacements)
    return warp_image(image, control, alpha, regularization)
