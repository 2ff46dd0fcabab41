"""Seeded synthetic inputs for gradient checks and the recovery demo.

Bilinear sampling has piecewise-constant spatial gradients on raw noise, so
everything here is Gaussian-smoothed before use.
"""

import numpy as np
from scipy.ndimage import gaussian_filter

from .tps import ControlPointSet


def smooth_image(rng, height: int, width: int, channels: int = 1, sigma: float = 2.0):
    """Blurred uniform noise rescaled into [0.1, 0.9], shape H x W x C."""
    noise = rng.random((height, width, channels))
    blurred = gaussian_filter(noise, sigma=(sigma, sigma, 0.0))
    lo = blurred.min()
    hi = blurred.max()
    span = hi - lo if hi > lo else 1.0
    return 0.1 + 0.8 * (blurred - lo) / span


def random_control_points(
    rng,
    count: int,
    span: float = 0.85,
    magnitude: float = 0.1,
    min_separation: float | None = None,
) -> ControlPointSet:
    """Random control points whose destinations keep a minimum separation.

    Points are drawn one at a time and rejected while their destination falls
    too close to an already-accepted one. When ``magnitude`` > 0 the
    displacements are rescaled so their max-abs component equals it exactly.
    """
    if min_separation is None:
        min_separation = min(0.05, 0.6 / np.sqrt(count))
    if magnitude > 0:
        displacements = rng.uniform(-magnitude, magnitude, (count, 2))
        peak = np.abs(displacements).max()
        if peak > 0:
            displacements *= magnitude / peak
    else:
        displacements = np.zeros((count, 2))
    points = np.empty((count, 2))
    destinations = np.empty((count, 2))
    accepted = 0
    while accepted < count:
        p = rng.uniform(-span, span, 2)
        dest = p + displacements[accepted]
        if accepted and np.min(np.hypot(*(destinations[:accepted] - dest).T)) < min_separation:
            continue
        points[accepted] = p
        destinations[accepted] = dest
        accepted += 1
    return ControlPointSet(points, displacements)
