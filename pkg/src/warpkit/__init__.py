"""Control-point image warping: closed-form thin-plate splines, bilinear
resampling, analytic reverse-mode gradients, alternative warping backends,
feature-normalization operators, and the adversarial loss arithmetic that
drives caricature-style training."""

from .align import (
    DEFAULT_TEMPLATE,
    FiveLandmarks,
    SimilarityTransform,
    align_face,
    estimate_similarity,
)
from .backends import (
    IDENTITY_PROJECTIVE,
    dense_warp,
    homography_from_params,
    landmark_warp,
    projective_warp,
    upsample_offsets,
)
from .errors import (
    DegenerateLandmarksError,
    DivergenceError,
    DomainError,
    DuplicatePointError,
    FormatError,
    ImageIOError,
    NumericalError,
    ParameterError,
    ShapeError,
    WarpKitError,
)
from .fitdemo import FitConfig, FitReport, fit_warp, psnr, roundtrip
from .gradients import GradientCheckReport, WarpCotangents, check_gradients, warp_vjp
from .io import (
    load_dense_grid,
    load_landmarks,
    load_points,
    load_projective_params,
    read_flow,
    read_png,
    save_landmarks,
    save_points,
    write_flow,
    write_png,
)
from .losses import (
    LossWeights,
    adain,
    identity_adv_loss_discriminator,
    identity_adv_loss_generator,
    identity_mapping_loss,
    instance_norm,
    patch_adv_loss_discriminator,
    patch_adv_loss_generator,
    total_discriminator_loss,
    total_generator_loss,
)
from .sampler import (
    bilinear_sample,
    build_flow,
    ndc_to_pixel,
    pixel_centers,
    sample_at_pixels,
    warp_image,
)
from .synth import random_control_points, smooth_image
from .tps import (
    MAX_CONTROL_POINTS,
    MIN_SEPARATION,
    ControlPointSet,
    TpsParameters,
    evaluate,
    fit,
    kernel,
    kernel_derivative,
)

__version__ = "0.1.0"
