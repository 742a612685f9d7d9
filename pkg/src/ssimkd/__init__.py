"""SSIM-family feature-distillation losses with analytic gradients."""

from .errors import (
    ConfigError, DimensionError, FormatError, InvalidInputError, InvalidSpecError, SsimKdError,
)
from .kernels import available_backends, get_backend, set_backend
from .tensor import AdapterParams, NormScope, apply_adapter, min_max_normalize
from .window import (
    Estimator, GaussianWindow, MomentMaps, WindowSpec, gaussian_window, local_moments,
    separable_convolve,
)
from .losses import (
    LossConfig, LossResult, SsimExponents, StabilizerConfig, combined_l1_msssim, compute_loss,
    contrast_map, feat_loss, lp_loss, luminance_map, ms_ssim_loss, smooth_l1_loss, ssim_loss,
    structure_map, total_loss,
)
from .autograd import GradCheckReport, GradientBundle, backward, finite_diff_check

__version__ = "0.1.0"
