"""Five-landmark similarity alignment of face crops.

``estimate_similarity`` solves the closed-form orthogonal-Procrustes-with-
scale problem; ``align_face`` maps an image onto a canonical template by
inverse-mapping every output pixel through the fitted transform and sampling
bilinearly with clamped borders.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLandmarksError, DomainError, ShapeError
from .sampler import sample_at_pixels, validate_image

# Five-point template in pixel coordinates of a 256 x 256 crop (a widely used
# frontal layout); overridable per call and via the CLI.
TEMPLATE_SIZE = 256
DEFAULT_TEMPLATE = np.array(
    [
        [87.5305, 118.1630],
        [168.0727, 117.7175],
        [128.0576, 163.9690],
        [94.9698, 211.1268],
        [161.6683, 210.7522],
    ]
)


def _vec2(value, name) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (2,):
        raise ShapeError(f"{name} must be an [x, y] pair, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


@dataclass
class FiveLandmarks:
    """Eye centers, nose tip, and mouth corners in pixel coordinates."""

    left_eye: np.ndarray
    right_eye: np.ndarray
    nose: np.ndarray
    mouth_left: np.ndarray
    mouth_right: np.ndarray

    def __post_init__(self):
        for name in ("left_eye", "right_eye", "nose", "mouth_left", "mouth_right"):
            setattr(self, name, _vec2(getattr(self, name), name))
        if np.linalg.norm(self.left_eye - self.right_eye) <= 1.0:
            raise DegenerateLandmarksError("eye centers must be > 1 pixel apart")

    def as_array(self) -> np.ndarray:
        return np.stack(
            [self.left_eye, self.right_eye, self.nose, self.mouth_left, self.mouth_right]
        )


@dataclass
class SimilarityTransform:
    """x -> scale * R(rotation) @ x + translation."""

    scale: float
    rotation: float
    translation: np.ndarray

    def __post_init__(self):
        if self.scale <= 0:
            raise DomainError("scale must be positive")
        self.translation = _vec2(self.translation, "translation")

    @property
    def matrix(self) -> np.ndarray:
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        return self.scale * np.array([[c, -s], [s, c]])

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.matrix.T + self.translation

    def inverse(self) -> "SimilarityTransform":
        inv_scale = 1.0 / self.scale
        inv = SimilarityTransform(inv_scale, -self.rotation, np.zeros(2))
        inv.translation = -(inv.matrix @ self.translation)
        return inv


def _as_point_array(landmarks) -> np.ndarray:
    if isinstance(landmarks, FiveLandmarks):
        return landmarks.as_array()
    arr = np.asarray(landmarks, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ShapeError(f"landmarks must be (n, 2), got {arr.shape}")
    return arr


def estimate_similarity(source, template) -> SimilarityTransform:
    """Least-squares similarity (scale, rotation, translation) taking the
    source landmarks onto the template ones, in closed form.

    Raises DegenerateLandmarksError when the source points are (numerically)
    coincident, which leaves scale and rotation undetermined.
    """
    src = _as_point_array(source)
    dst = _as_point_array(template)
    if src.shape != dst.shape:
        raise ShapeError(f"landmark sets differ: {src.shape} vs {dst.shape}")
    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    centered_src = src - mu_src
    centered_dst = dst - mu_dst
    variance = (centered_src**2).sum() / len(src)
    if variance < 1e-12:
        raise DegenerateLandmarksError("source landmarks are coincident")
    cov = centered_dst.T @ centered_src / len(src)
    u, d, vt = np.linalg.svd(cov)
    sign = np.sign(np.linalg.det(u) * np.linalg.det(vt))
    reflect = np.array([1.0, sign])
    rotation_matrix = (u * reflect) @ vt
    scale = float((d * reflect).sum() / variance)
    if scale <= 0:
        raise DegenerateLandmarksError("degenerate configuration: nonpositive scale")
    angle = float(np.arctan2(rotation_matrix[1, 0], rotation_matrix[0, 0]))
    translation = mu_dst - scale * rotation_matrix @ mu_src
    return SimilarityTransform(scale, angle, translation)


def scaled_template(out_size: int, template: np.ndarray | None = None) -> np.ndarray:
    base = DEFAULT_TEMPLATE if template is None else np.asarray(template, dtype=float)
    return base * (out_size / TEMPLATE_SIZE)


def align_face(
    image,
    landmarks: FiveLandmarks,
    out_size: int = 256,
    template: np.ndarray | None = None,
) -> np.ndarray:
    """Resample the image so the landmarks land on the template (scaled to
    ``out_size``), with clamp-to-edge borders.

    A custom ``template`` is interpreted in the pixel frame of a
    TEMPLATE_SIZE-sized crop and scaled along with the default.
    """
    image = validate_image(image)
    if out_size < 16:
        raise DomainError("out_size must be >= 16")
    target = scaled_template(out_size, template)
    transform = estimate_similarity(landmarks, target)
    back = transform.inverse()
    xs, ys = np.meshgrid(np.arange(out_size), np.arange(out_size), indexing="xy")
    dest = np.stack([xs, ys], axis=-1).reshape(-1, 2).astype(float)
    src = back.apply(dest)
    return sample_at_pixels(image, src).reshape(out_size, out_size, image.shape[2])
