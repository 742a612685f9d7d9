"""Window construction and per-location local moments.

Two estimators are provided.  ``gaussian`` is the weighted SSIM computation:
mean ``mu = w * X``, variance ``E_w[X^2] - mu^2`` and covariance
``E_w[ST] - mu_S mu_T``.  ``uniform`` uses flat patch weights with the
``1/(PQ - 1)`` Bessel correction on variance and covariance.

All windowed quantities live on the valid region, i.e. an (H, W) plane
yields an (H - F + 1, W - F + 1) map.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import DimensionError, InvalidSpecError


class Estimator(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class WindowSpec:
    """Square patch of side ``size`` with Gaussian std ``sigma`` (grid units)."""

    size: int = 11
    sigma: float = 1.5
    estimator: Estimator = Estimator.GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        if int(self.size) != self.size or self.size < 1:
            raise InvalidSpecError(f"window size must be a positive integer, got {self.size}")
        if self.estimator is Estimator.GAUSSIAN:
            if self.size % 2 == 0:
                raise InvalidSpecError(f"Gaussian window size must be odd, got {self.size}")
            if not self.sigma > 0:
                raise InvalidSpecError(f"sigma must be positive, got {self.sigma}")
        elif self.size < 2:
            # the unbiased estimator divides by PQ - 1
            raise InvalidSpecError("uniform unbiased estimator needs a window of at least 2x2")

    @property
    def count(self):
        return self.size * self.size

    @property
    def bessel(self):
        """Factor applied to the weighted second moments (1 for the Gaussian path)."""
        if self.estimator is Estimator.UNIFORM:
            return self.count / (self.count - 1.0)
        return 1.0


@dataclass(frozen=True)
class GaussianWindow:
    weights_1d: np.ndarray

    @property
    def size(self):
        return len(self.weights_1d)

    @property
    def weights_2d(self):
        return np.outer(self.weights_1d, self.weights_1d)


def gaussian_window(spec):
    """Normalized 1-D Gaussian taps; the 2-D window is their outer product."""
    if not isinstance(spec, WindowSpec):
        spec = WindowSpec(*spec) if isinstance(spec, tuple) else WindowSpec(spec)
    if spec.estimator is not Estimator.GAUSSIAN:
        raise InvalidSpecError("gaussian_window requires the gaussian estimator")
    offsets = np.arange(spec.size, dtype=np.float64) - (spec.size - 1) / 2.0
    g = np.exp(-(offsets ** 2) / (2.0 * spec.sigma ** 2))
    g /= g.sum()
    # exact mirror symmetry regardless of exp rounding
    g = 0.5 * (g + g[::-1])
    return GaussianWindow(g)


def window_weights(spec):
    """1-D separable factor for either estimator."""
    if spec.estimator is Estimator.GAUSSIAN:
        return gaussian_window(spec).weights_1d
    return np.full(spec.size, 1.0 / spec.size)


def _check_fits(shape, size):
    if shape[-2] < size or shape[-1] < size:
        raise DimensionError(
            f"map of spatial size {shape[-2]}x{shape[-1]} is smaller than the {size}x{size} window"
        )


def separable_convolve(x, w, backend=None):
    """Valid-mode weighted average over the last two axes.

    ``w`` is a :class:`GaussianWindow` or a 1-D weight vector; a horizontal
    pass is followed by a vertical pass.
    """
    taps = w.weights_1d if isinstance(w, GaussianWindow) else np.asarray(w)
    x = np.asarray(x)
    _check_fits(x.shape, len(taps))
    return kernels.correlate_sep(x, taps, backend=backend)


def direct_convolve(x, w2d):
    """Reference valid-mode 2-D weighted sum, one shifted slice per tap (F^2 passes)."""
    x = np.asarray(x)
    f = w2d.shape[0]
    _check_fits(x.shape, f)
    oh, ow = x.shape[-2] - f + 1, x.shape[-1] - f + 1
    out = np.zeros(x.shape[:-2] + (oh, ow), dtype=x.dtype)
    for u in range(f):
        for v in range(f):
            out += w2d[u, v] * x[..., u:u + oh, v:v + ow]
    return out


def adjoint_convolve(g, w):
    """Transpose of :func:`separable_convolve`: scatter a valid-region map back to full size."""
    taps = np.asarray(w.weights_1d if isinstance(w, GaussianWindow) else w)
    f = len(taps)
    pad = [(0, 0)] * (g.ndim - 2) + [(f - 1, f - 1), (f - 1, f - 1)]
    return kernels.correlate_sep(np.pad(g, pad), taps[::-1].copy())


@dataclass
class MomentMaps:
    """Local statistics on the valid region, shape (..., H - F + 1, W - F + 1).

    ``clamped_s``/``clamped_t`` flag locations whose raw variance estimate was
    negative and has been clamped to zero.
    """

    mu_s: np.ndarray
    mu_t: np.ndarray
    var_s: np.ndarray
    var_t: np.ndarray
    cov_st: np.ndarray
    clamped_s: np.ndarray
    clamped_t: np.ndarray


def local_moments(s, t, spec=WindowSpec()):
    s = np.asarray(s)
    t = np.asarray(t)
    if s.shape != t.shape:
        raise DimensionError(f"student {s.shape} and teacher {t.shape} shapes differ")
    _check_fits(s.shape, spec.size)
    taps = window_weights(spec)
    stacked = np.stack([s, t, s * s, t * t, s * t])
    mu_s, mu_t, ess, ett, est = kernels.correlate_sep(stacked, taps)
    k = spec.bessel
    var_s = k * (ess - mu_s * mu_s)
    var_t = k * (ett - mu_t * mu_t)
    cov = k * (est - mu_s * mu_t)
    clamped_s = var_s < 0
    clamped_t = var_t < 0
    return MomentMaps(
        mu_s, mu_t,
        np.maximum(var_s, 0.0), np.maximum(var_t, 0.0),
        cov, clamped_s, clamped_t,
    )
