"""Loss arithmetic for the adversarial caricature objectives, plus the
instance-normalization and AdaIN feature operators.

All functions operate on caller-supplied tensors (no networks live here).
Expectations are realized as arithmetic means over the supplied batch/patch
axes; cross-entropies subtract the row max before exponentiation so saturated
logits stay finite. Class indices are 0-based.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError


@dataclass
class LossWeights:
    """Objective weights: lambda_p (patch adversarial), lambda_g
    (identity-preservation adversarial), lambda_idt (identity mapping)."""

    lambda_p: float = 2.0
    lambda_g: float = 1.0
    lambda_idt: float = 10.0

    def __post_init__(self):
        for name in ("lambda_p", "lambda_g", "lambda_idt"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise DomainError(f"{name} must be a nonnegative finite real")


def _finite(arr, name) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(out)):
        raise DomainError(f"{name} must be finite")
    return out


def instance_norm(feature_map, eps: float = 1e-5) -> np.ndarray:
    """Normalize each channel of an h x w x c map to zero mean and (nearly)
    unit variance; statistics are population moments over the plane."""
    f = _finite(feature_map, "feature map")
    if f.ndim != 3:
        raise ShapeError(f"feature map must be h x w x c, got {f.shape}")
    if f.shape[0] * f.shape[1] < 2:
        raise ShapeError("instance norm needs at least 2 spatial samples")
    if eps <= 0:
        raise DomainError("eps must be positive")
    mean = f.mean(axis=(0, 1))
    var = f.var(axis=(0, 1))
    return (f - mean) / np.sqrt(var + eps)


def adain(feature_map, style_mean, style_scale, eps: float = 1e-5) -> np.ndarray:
    """Re-statistic a feature map to per-channel (style_mean, style_scale)."""
    f = _finite(feature_map, "feature map")
    mean = _finite(style_mean, "style mean").reshape(-1)
    scale = _finite(style_scale, "style scale").reshape(-1)
    if f.ndim != 3 or mean.shape[0] != f.shape[2] or scale.shape[0] != f.shape[2]:
        raise ShapeError(
            f"style channel counts {mean.shape[0]}/{scale.shape[0]} must match "
            f"feature map {f.shape}"
        )
    if np.any(scale <= 0):
        raise DomainError("style scale must be positive")
    return instance_norm(f, eps) * scale + mean


def identity_mapping_loss(reconstruction, original) -> float:
    """Mean absolute difference over all entries (the L1 reconstruction loss)."""
    rec = _finite(reconstruction, "reconstruction")
    orig = _finite(original, "original")
    if rec.shape != orig.shape:
        raise ShapeError(f"shape mismatch {rec.shape} vs {orig.shape}")
    return float(np.abs(rec - orig).mean())


def _cross_entropy_mean(logits, labels) -> float:
    """Mean of -log softmax(logits)[label] over rows, max-stabilized."""
    rows = np.atleast_2d(_finite(logits, "logits"))
    targets = np.atleast_1d(np.asarray(labels))
    if not np.issubdtype(targets.dtype, np.integer):
        raise DomainError("labels must be integers")
    if targets.ndim != 1 or targets.shape[0] != rows.shape[0]:
        raise ShapeError("one label per logit row required")
    if np.any(targets < 0) or np.any(targets >= rows.shape[1]):
        raise DomainError("label out of range")
    shifted = rows - rows.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(rows.shape[0]), targets]
    return float((log_norm - picked).mean())


def _patch_rows(patches, name) -> np.ndarray:
    arr = _finite(patches, name)
    if arr.ndim < 1 or arr.shape[-1] != 3:
        raise ShapeError(f"{name} must have a trailing axis of 3 class logits")
    return arr.reshape(-1, 3)


PATCH_CARICATURE, PATCH_PHOTO, PATCH_GENERATED = 0, 1, 2


def patch_adv_loss_generator(generated_patches) -> float:
    """Generator side of the 3-class patch objective: mean cross-entropy of
    generated patches against the caricature class."""
    rows = _patch_rows(generated_patches, "generated patches")
    return _cross_entropy_mean(rows, np.zeros(rows.shape[0], dtype=int))


def patch_adv_loss_discriminator(
    caricature_patches, photo_patches, generated_patches
) -> float:
    """Discriminator side: each batch pulled toward its own class
    (caricature, photo, generated), terms summed."""
    total = 0.0
    for patches, target in (
        (caricature_patches, PATCH_CARICATURE),
        (photo_patches, PATCH_PHOTO),
        (generated_patches, PATCH_GENERATED),
    ):
        rows = _patch_rows(patches, "patch logits")
        total += _cross_entropy_mean(rows, np.full(rows.shape[0], target))
    return total


def _identity_rows(scores, name):
    arr = _finite(scores, name)
    rows = np.atleast_2d(arr)
    if rows.ndim != 2 or rows.shape[1] % 3 != 0 or rows.shape[1] == 0:
        raise ShapeError(f"{name} must be (n, 3M) identity logits, got {arr.shape}")
    return rows, rows.shape[1] // 3


def _identity_labels(labels, n, m):
    arr = np.atleast_1d(np.asarray(labels))
    if not np.issubdtype(arr.dtype, np.integer):
        raise DomainError("identity labels must be integers")
    if arr.shape != (n,):
        raise ShapeError(f"expected {n} labels, got {arr.shape}")
    if np.any(arr < 0) or np.any(arr >= m):
        raise DomainError(f"identity label out of range [0, {m})")
    return arr


def identity_adv_loss_generator(generated_scores, photo_labels) -> float:
    """Generator identity objective: generated images scored against the
    subject's real-caricature class (labels unshifted)."""
    rows, m = _identity_rows(generated_scores, "generated scores")
    labels = _identity_labels(photo_labels, rows.shape[0], m)
    return _cross_entropy_mean(rows, labels)


def identity_adv_loss_discriminator(
    caricature_scores,
    caricature_labels,
    photo_scores,
    photo_labels,
    generated_scores,
    generated_photo_labels,
) -> float:
    """Discriminator identity objective over the 3M classes: real caricatures
    at y_c, real photos at y_p + M, generated caricatures at y_p + 2M."""
    total = 0.0
    for scores, labels, shift in (
        (caricature_scores, caricature_labels, 0),
        (photo_scores, photo_labels, 1),
        (generated_scores, generated_photo_labels, 2),
    ):
        rows, m = _identity_rows(scores, "identity scores")
        base = _identity_labels(labels, rows.shape[0], m)
        total += _cross_entropy_mean(rows, base + shift * m)
    return total


def total_generator_loss(
    patch_term: float,
    identity_term: float,
    reconstruction_caricature: float,
    reconstruction_photo: float,
    weights: LossWeights | None = None,
) -> float:
    """lambda_p * L_p + lambda_g * L_g + lambda_idt * (L_idt_c + L_idt_p)."""
    w = weights if weights is not None else LossWeights()
    return (
        w.lambda_p * patch_term
        + w.lambda_g * identity_term
        + w.lambda_idt * (reconstruction_caricature + reconstruction_photo)
    )


def total_discriminator_loss(
    patch_term: float,
    identity_term: float,
    weights: LossWeights | None = None,
) -> float:
    """lambda_p * L_p + lambda_g * L_g."""
    w = weights if weights is not None else LossWeights()
    return w.lambda_p * patch_term + w.lambda_g * identity_term
