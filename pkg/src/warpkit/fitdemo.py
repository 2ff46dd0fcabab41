"""Recover a control-point warp by gradient descent through the sampler.

This is the desk-scale certificate that the warp is usable inside
gradient-based training: given a source image and a warped target, first-order
updates with bias-corrected adaptive moments drive the L1 reconstruction loss
down using only ``warp_vjp``. Recovery quality is always judged in image
space (PSNR); the control-point parameterization of a warp is not unique.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, DomainError, ShapeError
from .gradients import warp_vjp
from .losses import identity_mapping_loss
from .sampler import validate_image, warp_image
from .synth import random_control_points, smooth_image
from .tps import ControlPointSet

_ADAM_EPS = 1e-8
_DIVERGENCE_FACTOR = 10.0
_DIVERGENCE_PATIENCE = 100

# Keep initial control points away from the borders, where clamp-to-edge
# flattens the sampling gradients.
_GRID_SPAN = 0.8


@dataclass
class FitConfig:
    control_count: int = 16
    iterations: int = 2000
    step_size: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    regularization: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.control_count < 3:
            raise DomainError("control_count must be >= 3")
        if self.iterations < 1:
            raise DomainError("iterations must be positive")
        if self.step_size <= 0:
            raise DomainError("step_size must be positive")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise DomainError(f"{name} must lie in [0, 1)")
        if self.regularization < 0:
            raise DomainError("regularization must be nonnegative")


@dataclass
class FitReport:
    control: ControlPointSet
    trajectory: np.ndarray
    psnr: float
    best_loss: float = field(init=False)

    def __post_init__(self):
        self.best_loss = float(np.min(self.trajectory))


def _initial_grid(count: int) -> np.ndarray:
    """First ``count`` nodes of the smallest uniform grid over the span."""
    side = math.isqrt(count)
    if side * side < count:
        side += 1
    axis = np.linspace(-_GRID_SPAN, _GRID_SPAN, side)
    uu, vv = np.meshgrid(axis, axis, indexing="xy")
    return np.column_stack([uu.ravel(), vv.ravel()])[:count].copy()


def psnr(image: np.ndarray, reference: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for unit-range images; inf when equal."""
    mse = float(np.mean((np.asarray(image, float) - np.asarray(reference, float)) ** 2))
    if mse == 0.0:
        return math.inf
    return -10.0 * math.log10(mse)


def fit_warp(source, target, config: FitConfig | None = None) -> FitReport:
    """Minimize the L1 distance between the warped source and the target over
    the control points and displacements; returns the best iterate.

    Raises DivergenceError (carrying the trajectory) when the loss stays
    above 10x the initial value for 100 consecutive iterations.
    """
    config = config if config is not None else FitConfig()
    source = validate_image(source)
    target = validate_image(target)
    if source.shape != target.shape:
        raise ShapeError(f"source {source.shape} and target {target.shape} differ")

    points = _initial_grid(config.control_count)
    displacements = np.zeros_like(points)
    moment1 = {"p": np.zeros_like(points), "d": np.zeros_like(displacements)}
    moment2 = {"p": np.zeros_like(points), "d": np.zeros_like(displacements)}

    n_entries = source.size
    trajectory = np.empty(config.iterations)
    best_loss = math.inf
    best = None
    initial_loss = None
    bad_streak = 0

    for step in range(config.iterations):
        control = ControlPointSet(points, displacements)
        warped = warp_image(source, control, 1.0, config.regularization)
        loss = identity_mapping_loss(warped, target)
        trajectory[step] = loss
        if step == 0:
            initial_loss = loss
        if loss < best_loss:
            best_loss = loss
            best = control
        if loss > _DIVERGENCE_FACTOR * initial_loss:
            bad_streak += 1
            if bad_streak >= _DIVERGENCE_PATIENCE:
                raise DivergenceError(
                    f"loss {loss:.3e} stayed above {_DIVERGENCE_FACTOR:g}x the "
                    f"initial {initial_loss:.3e} for {bad_streak} iterations",
                    trajectory[: step + 1],
                )
        else:
            bad_streak = 0

        upstream = np.sign(warped - target) / n_entries
        cot = warp_vjp(source, control, upstream, 1.0, config.regularization)
        t = step + 1
        correction1 = 1.0 - config.beta1**t
        correction2 = 1.0 - config.beta2**t
        # Constant step for the first half, then linear decay to zero: the
        # late decay settles the oscillation the L1 sign gradient causes.
        half = config.iterations / 2.0
        lr = config.step_size * min(1.0, (config.iterations - step) / max(half, 1.0))
        for key, grad, value in (
            ("p", cot.d_points, points),
            ("d", cot.d_displacements, displacements),
        ):
            moment1[key] = config.beta1 * moment1[key] + (1 - config.beta1) * grad
            moment2[key] = config.beta2 * moment2[key] + (1 - config.beta2) * grad**2
            m_hat = moment1[key] / correction1
            v_hat = moment2[key] / correction2
            value -= lr * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)

    final = warp_image(source, best, 1.0, config.regularization)
    return FitReport(control=best, trajectory=trajectory, psnr=psnr(final, target))


def roundtrip(
    seed: int,
    height: int = 64,
    width: int = 64,
    control_count: int = 16,
    magnitude: float = 0.1,
    config: FitConfig | None = None,
) -> FitReport:
    """Warp a seeded smooth image by a random control-point set of the given
    displacement magnitude, then recover the warp with ``fit_warp``."""
    if magnitude > 0.2:
        raise DomainError("roundtrip magnitude must be <= 0.2")
    if config is None:
        config = FitConfig(control_count=control_count, seed=seed)
    rng = np.random.default_rng(seed)
    source = smooth_image(rng, height, width, channels=1)
    truth = random_control_points(rng, control_count, magnitude=magnitude)
    target = warp_image(source, truth, 1.0, config.regularization)
    return fit_warp(source, target, config)
