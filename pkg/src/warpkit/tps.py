"""Closed-form thin-plate-spline fitting and evaluation of the inverse mapping.

A warp is driven by k control points p (in NDC, [-1, 1] on both axes) and
their displacements dp. Destination points p' = p + dp. The spline f maps a
destination-space query q back to the source location it samples from:

    f(q) = sum_i w_i * phi(|q - p'_i|) + v^T q + b,   phi(r) = r^2 ln r

w, v, b come from the augmented linear system with the destinations as
kernel centers and the source points as targets, so f(p'_j) = p_j when the
curvature regularization is zero.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve
from scipy.spatial.distance import cdist, pdist

from .errors import DomainError, DuplicatePointError, NumericalError, ShapeError

# Destinations closer than this make the kernel matrix numerically
# indistinguishable in double precision.
MIN_SEPARATION = 1e-8

# Dense (k+3)x(k+3) solves stay cheap up to this count.
MAX_CONTROL_POINTS = 64

_RCOND_FLOOR = 1e-13
_SIDE_CONDITION_TOL = 1e-9


def kernel(r):
    """Thin-plate radial kernel r^2 ln r, with the continuous limit 0 at r = 0.

    Accepts a scalar or an ndarray of nonnegative radii.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise DomainError("kernel radius must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(arr > 0, arr * arr * np.log(arr), 0.0)
    if np.isscalar(r) or arr.ndim == 0:
        return float(out)
    return out


def kernel_derivative(r):
    """phi'(r) = r (2 ln r + 1); 0 at r = 0 (continuous limit of the gradient)."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise DomainError("kernel radius must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(arr > 0, arr * (2.0 * np.log(arr) + 1.0), 0.0)
    if np.isscalar(r) or arr.ndim == 0:
        return float(out)
    return out


def _as_points(a, name) -> np.ndarray:
    # Always copies: holders of point arrays must not see callers' later
    # in-place edits (the recovery demo updates its parameter arrays in place).
    arr = np.array(a, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ShapeError(f"{name} must have shape (k, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


@dataclass
class ControlPointSet:
    """k control points and their displacements, both in NDC units.

    Destinations p' = p + dp are derived on demand so the three views can
    never go out of sync.
    """

    points: np.ndarray
    displacements: np.ndarray

    def __post_init__(self):
        self.points = _as_points(self.points, "points")
        self.displacements = _as_points(self.displacements, "displacements")
        if self.points.shape != self.displacements.shape:
            raise ShapeError(
                f"points {self.points.shape} and displacements "
                f"{self.displacements.shape} must match"
            )
        k = self.points.shape[0]
        if k < 3:
            raise DomainError(f"need at least 3 control points, got {k}")
        if k > MAX_CONTROL_POINTS:
            raise DomainError(
                f"at most {MAX_CONTROL_POINTS} control points supported, got {k}"
            )

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def destinations(self) -> np.ndarray:
        return self.points + self.displacements

    def scaled(self, alpha: float) -> "ControlPointSet":
        """Same points with displacements multiplied by the exaggeration factor."""
        return ControlPointSet(self.points, alpha * self.displacements)


@dataclass
class TpsParameters:
    """Fitted spline: kernel weights w (k,2), affine matrix v (2,2), offset b (2,).

    ``centers`` holds the destination points the kernel terms are centered on.
    The side conditions sum(w) = 0 and centers^T w = 0 hold for every fit
    output, which bounds the bending energy.
    """

    weights: np.ndarray
    affine: np.ndarray
    offset: np.ndarray
    centers: np.ndarray
    regularization: float = 0.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.affine = np.asarray(self.affine, dtype=float)
        self.offset = np.asarray(self.offset, dtype=float)
        self.centers = np.asarray(self.centers, dtype=float)
        if self.regularization < 0:
            raise DomainError("regularization must be nonnegative")


def _augmented_matrix(destinations: np.ndarray, regularization: float) -> np.ndarray:
    """[[K + lam*I, P], [P^T, 0]] with K_ij = phi(|p'_i - p'_j|), P rows (1, p')."""
    k = destinations.shape[0]
    system = np.zeros((k + 3, k + 3))
    system[:k, :k] = kernel(cdist(destinations, destinations))
    system[:k, :k] += regularization * np.eye(k)
    system[:k, k] = 1.0
    system[:k, k + 1:] = destinations
    system[k, :k] = 1.0
    system[k + 1:, :k] = destinations.T
    return system


def _solve_augmented(destinations, targets, regularization):
    """Factor and solve the augmented system; also return the factorization.

    The LU factors are reused by the reverse-mode code, which needs one extra
    solve against the transposed system.
    """
    k = destinations.shape[0]
    if pdist(destinations).min() < MIN_SEPARATION:
        raise DuplicatePointError(
            f"destination points closer than {MIN_SEPARATION:g} (near-duplicate)"
        )
    system = _augmented_matrix(destinations, regularization)
    anorm = np.linalg.norm(system, 1)
    factorization = lu_factor(system, check_finite=False)
    gecon = get_lapack_funcs(("gecon",), (system,))[0]
    rcond, _ = gecon(factorization[0], anorm)
    if not np.isfinite(rcond) or rcond < _RCOND_FLOOR:
        cond = np.inf if rcond == 0 else 1.0 / rcond
        raise NumericalError(
            f"augmented TPS system is singular or near-singular "
            f"(condition estimate {cond:.3e}); are the destinations collinear?"
        )
    rhs = np.zeros((k + 3, 2))
    rhs[:k] = targets
    theta = lu_solve(factorization, rhs, check_finite=False)
    return theta, factorization


def fit(control: ControlPointSet, regularization: float = 0.0) -> TpsParameters:
    """Fit the inverse mapping f so that f(p'_j) ~= p_j.

    With ``regularization`` = 0 the spline interpolates the control points
    exactly; a positive value adds Tikhonov damping lam*I to the kernel block
    (the standard bending-energy relaxation).

    Raises:
        DuplicatePointError: two destinations closer than MIN_SEPARATION.
        NumericalError: singular system (e.g. collinear destinations).
    """
    if regularization < 0:
        raise DomainError("regularization must be nonnegative")
    destinations = control.destinations
    theta, _ = _solve_augmented(destinations, control.points, regularization)
    k = control.k
    weights = theta[:k]
    offset = theta[k]
    affine = theta[k + 1:]
    if (
        np.abs(weights.sum(axis=0)).max() > _SIDE_CONDITION_TOL
        or np.abs(weights.T @ destinations).max() > _SIDE_CONDITION_TOL
    ):
        raise NumericalError(
            "side conditions on kernel weights violated; system too ill-conditioned"
        )
    return TpsParameters(
        weights=weights,
        affine=affine,
        offset=offset,
        centers=destinations.copy(),
        regularization=float(regularization),
    )


def evaluate(params: TpsParameters, q) -> np.ndarray:
    """Evaluate f at one query point (2,) or a batch (n, 2) of NDC queries.

    No clamping: the result may leave [-1, 1].
    """
    query = np.asarray(q, dtype=float)
    single = query.ndim == 1
    query = np.atleast_2d(query)
    if query.shape[1] != 2:
        raise ShapeError(f"query must be a 2-vector or (n, 2) array, got {query.shape}")
    if not np.all(np.isfinite(query)):
        raise DomainError("query must be finite")
    radial = kernel(cdist(query, params.centers))
    out = radial @ params.weights + query @ params.affine + params.offset
    return out[0] if single else out
