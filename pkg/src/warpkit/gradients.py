"""Analytic reverse-mode derivatives of the TPS warp.

``warp_vjp`` returns the vector-Jacobian product of ``<upstream, warp>`` with
respect to the image, the control points, and the displacements. Every
dependency path is covered: upstream -> bilinear sampling -> flow -> spline
coefficients -> destinations, including the dependence of the kernel matrix
on the destinations, which is differentiated via the adjoint of the linear
solve (one extra solve against the transposed augmented system).

Bilinear sampling is only piecewise differentiable: across a sampling-cell
boundary the spatial derivative jumps. ``check_gradients`` therefore zeroes
the upstream cotangent at destination pixels whose source location falls
within a small guard band of a cell boundary before comparing against
central finite differences; at an exact boundary the analytic code takes
the derivative of the cell the floor() convention assigns.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_solve
from scipy.spatial.distance import cdist

from .errors import DomainError, ShapeError
from .sampler import (
    _interp_cells,
    build_flow,
    ndc_to_pixel,
    pixel_centers,
    validate_image,
    warp_image,
)
from .synth import random_control_points, smooth_image
from .tps import ControlPointSet, _solve_augmented, fit, kernel

# Pass band for FD agreement: relative error below FD_TOLERANCE, where
# magnitudes are floored at FD_DENOMINATOR_FLOOR. Together these give an
# absolute floor of 1e-7 on gradient entries too small to compare relatively.
FD_TOLERANCE = 1e-4
FD_DENOMINATOR_FLOOR = 1e-3
FD_STEP = 1e-5

# Source locations closer than this (in pixels) to a sampling-cell boundary
# are excluded from finite-difference comparisons.
BOUNDARY_GUARD = 1e-3

_PSI_FLOOR = 1e-12


def _psi(r: np.ndarray) -> np.ndarray:
    """phi'(r)/r = 2 ln r + 1, zeroed near r = 0 where the product limit is 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > _PSI_FLOOR, 2.0 * np.log(r) + 1.0, 0.0)


def _scatter_add(acc: np.ndarray, rows, cols, values):
    """acc[rows, cols, c] += values[:, c] for every channel c."""
    h, w, channels = acc.shape
    flat = rows * w + cols
    for c in range(channels):
        acc[:, :, c] += np.bincount(
            flat, weights=values[:, c], minlength=h * w
        ).reshape(h, w)


@dataclass
class WarpCotangents:
    """Input cotangents of the warp: image, control points, displacements."""

    d_image: np.ndarray
    d_points: np.ndarray
    d_displacements: np.ndarray


def warp_vjp(
    image: np.ndarray,
    control: ControlPointSet,
    upstream: np.ndarray,
    alpha: float = 1.0,
    regularization: float = 1e-6,
) -> WarpCotangents:
    """Vector-Jacobian product of ``<upstream, warp_image(...)>``.

    ``upstream`` must match the image shape. A positive ``regularization``
    keeps the augmented system (and its transpose, solved here for the
    adjoint) well-conditioned.
    """
    image = validate_image(image)
    h, w, channels = image.shape
    up = np.asarray(upstream, dtype=float)
    if up.ndim == 2:
        up = up[:, :, None]
    if up.shape != image.shape:
        raise ShapeError(f"upstream shape {up.shape} must match image {image.shape}")
    if not np.all(np.isfinite(up)):
        raise DomainError("upstream cotangent must be finite")

    scaled = control.scaled(alpha)
    destinations = scaled.destinations
    k = scaled.k
    theta, factorization = _solve_augmented(
        destinations, scaled.points, regularization
    )
    weights, offset, affine = theta[:k], theta[k], theta[k + 1:]

    queries = pixel_centers(h, w).reshape(-1, 2)
    radii = cdist(queries, destinations)
    radial = kernel(radii)
    # Same expression (and evaluation order) as tps.evaluate, so the flow here
    # is bit-identical to the forward pass.
    flow = radial @ weights + queries @ affine + offset

    px = ndc_to_pixel(flow, h, w)
    x, y = px[:, 0], px[:, 1]
    x0, x1, y0, y1, tx, ty = _interp_cells(x, y, h, w)
    corner00 = image[y0, x0]
    corner01 = image[y0, x1]
    corner10 = image[y1, x0]
    corner11 = image[y1, x1]
    txc, tyc = tx[:, None], ty[:, None]
    up_flat = up.reshape(-1, channels)

    d_image = np.zeros_like(image)
    _scatter_add(d_image, y0, x0, up_flat * (1.0 - txc) * (1.0 - tyc))
    _scatter_add(d_image, y0, x1, up_flat * txc * (1.0 - tyc))
    _scatter_add(d_image, y1, x0, up_flat * (1.0 - txc) * tyc)
    _scatter_add(d_image, y1, x1, up_flat * txc * tyc)

    # d<S>/d(source location), chained through the clamp (zero outside) and
    # the NDC -> pixel conversion.
    d_x = ((1.0 - tyc) * (corner01 - corner00) + tyc * (corner11 - corner10))
    d_y = ((1.0 - txc) * (corner10 - corner00) + txc * (corner11 - corner01))
    in_x = (x >= 0.0) & (x <= w - 1.0)
    in_y = (y >= 0.0) & (y <= h - 1.0)
    g = np.empty_like(flow)
    g[:, 0] = (up_flat * d_x).sum(axis=1) * in_x * (w / 2.0)
    g[:, 1] = (up_flat * d_y).sum(axis=1) * in_y * (h / 2.0)

    # Flow is [radial, 1, q] @ theta: accumulate the coefficient cotangent and
    # the direct kernel dependence on the destinations.
    d_theta = np.empty((k + 3, 2))
    d_theta[:k] = radial.T @ g
    d_theta[k] = g.sum(axis=0)
    d_theta[k + 1:] = queries.T @ g

    coeff = (g @ weights.T) * _psi(radii)
    d_dest = coeff.sum(axis=0)[:, None] * destinations - coeff.T @ queries

    # Adjoint of theta = L^{-1} rhs: mu = L^{-T} d_theta, d_rhs = mu,
    # d_L = -mu theta^T.
    mu = lu_solve(factorization, d_theta, trans=1, check_finite=False)
    l_bar = -mu @ theta.T

    k_bar = l_bar[:k, :k]
    sym = (k_bar + k_bar.T) * _psi(cdist(destinations, destinations))
    d_dest += sym.sum(axis=1)[:, None] * destinations - sym @ destinations
    d_dest += l_bar[:k, k + 1:] + l_bar[k + 1:, :k].T

    return WarpCotangents(
        d_image=d_image,
        d_points=mu[:k] + d_dest,
        d_displacements=alpha * d_dest,
    )


@dataclass
class GradientCheckReport:
    """Outcome of one analytic-vs-finite-difference comparison."""

    seed: int
    height: int
    width: int
    control_count: int
    max_relative_error: float
    checked_point_coords: int
    checked_image_entries: int
    masked_pixels: int
    tolerance: float = FD_TOLERANCE
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.max_relative_error < self.tolerance)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "height": self.height,
            "width": self.width,
            "control_count": self.control_count,
            "max_relative_error": self.max_relative_error,
            "checked_point_coords": self.checked_point_coords,
            "checked_image_entries": self.checked_image_entries,
            "masked_pixels": self.masked_pixels,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def _relative_errors(analytic, numeric):
    denom = np.maximum(
        np.maximum(np.abs(analytic), np.abs(numeric)), FD_DENOMINATOR_FLOOR
    )
    return np.abs(analytic - numeric) / denom


def check_gradients(
    seed: int,
    height: int = 16,
    width: int = 16,
    control_count: int = 8,
    image_entries: int = 64,
) -> GradientCheckReport:
    """Compare warp_vjp against central finite differences on a seeded instance.

    Checks every coordinate of the control points and displacements plus a
    random subset of image entries. Failures are reported through the
    returned record, never raised.
    """
    if height < 4 or width < 4:
        raise DomainError("gradient check needs height and width >= 4")
    if not 3 <= control_count <= 64:
        raise DomainError("control_count must be in [3, 64]")
    image_entries = min(max(image_entries, 64), height * width)

    rng = np.random.default_rng(seed)
    image = smooth_image(rng, height, width, channels=1)
    control = random_control_points(rng, control_count, magnitude=0.1)
    upstream = rng.uniform(-1.0, 1.0, size=image.shape)
    alpha = 1.0
    regularization = 1e-6

    # Zero the cotangent wherever the unperturbed source location sits within
    # the guard band of a sampling-cell boundary (piecewise-linearity kink).
    base_flow = build_flow(fit(control.scaled(alpha), regularization), height, width)
    base_px = ndc_to_pixel(base_flow.reshape(-1, 2), height, width)
    near = np.abs(base_px - np.round(base_px)) < BOUNDARY_GUARD
    masked = near.any(axis=1).reshape(height, width)
    upstream[masked] = 0.0

    def objective(img, ctrl):
        return float(np.sum(upstream * warp_image(img, ctrl, alpha, regularization)))

    cot = warp_vjp(image, control, upstream, alpha, regularization)

    errors = []

    def central(plus, minus):
        return (objective(*plus) - objective(*minus)) / (2.0 * FD_STEP)

    for attr in ("points", "displacements"):
        base = getattr(control, attr)
        analytic = cot.d_points if attr == "points" else cot.d_displacements
        for idx in np.ndindex(base.shape):
            bumped_hi = base.copy()
            bumped_lo = base.copy()
            bumped_hi[idx] += FD_STEP
            bumped_lo[idx] -= FD_STEP
            if attr == "points":
                hi = ControlPointSet(bumped_hi, control.displacements)
                lo = ControlPointSet(bumped_lo, control.displacements)
            else:
                hi = ControlPointSet(control.points, bumped_hi)
                lo = ControlPointSet(control.points, bumped_lo)
            fd = central((image, hi), (image, lo))
            errors.append(_relative_errors(analytic[idx], fd))

    flat_choices = rng.choice(image.size, size=image_entries, replace=False)
    for flat in flat_choices:
        idx = np.unravel_index(flat, image.shape)
        bumped_hi = image.copy()
        bumped_lo = image.copy()
        bumped_hi[idx] += FD_STEP
        bumped_lo[idx] -= FD_STEP
        fd = central((bumped_hi, control), (bumped_lo, control))
        errors.append(_relative_errors(cot.d_image[idx], fd))

    return GradientCheckReport(
        seed=seed,
        height=height,
        width=width,
        control_count=control_count,
        max_relative_error=float(np.max(errors)),
        checked_point_coords=4 * control_count,
        checked_image_entries=int(image_entries),
        masked_pixels=int(masked.sum()),
    )
