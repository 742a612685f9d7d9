"""Feature-map container helpers, min-max normalization and the 1x1 adapter.

Feature maps are plain float64 numpy arrays of shape (B, C, H, W).  A
multi-scale feature set is a list of such arrays sharing the batch size.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError, InvalidInputError


class NormScope(str, Enum):
    PER_SAMPLE = "per-sample"
    PER_CHANNEL = "per-channel"


def as_feature_map(x, name="x", check_finite=True):
    """Validate ``x`` as a (B, C, H, W) map and return it as C-contiguous float64."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 4:
        raise DimensionError(f"{name} must be 4-D (B, C, H, W), got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise DimensionError(f"{name} has an empty dimension: {arr.shape}")
    if check_finite and not np.isfinite(arr).all():
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def as_multiscale(xs, name="features"):
    if isinstance(xs, np.ndarray):
        xs = [xs]
    maps = [as_feature_map(x, f"{name}[{i}]") for i, x in enumerate(xs)]
    if not maps:
        raise DimensionError(f"{name} must contain at least one scale")
    batch = {m.shape[0] for m in maps}
    if len(batch) != 1:
        raise DimensionError(f"{name}: batch size differs across scales {sorted(batch)}")
    return maps


def _group_axes(scope):
    scope = NormScope(scope)
    return (1, 2, 3) if scope is NormScope.PER_SAMPLE else (2, 3)


def normalize_with_scale(x, scope=NormScope.PER_SAMPLE):
    """Min-max normalize ``x`` and also return the per-group ``1 / (max - min)``.

    The scale broadcasts against ``x`` and is 0 for degenerate groups
    (max == min), which map to all zeros.
    """
    axes = _group_axes(scope)
    lo = x.min(axis=axes, keepdims=True)
    span = x.max(axis=axes, keepdims=True) - lo
    safe = np.where(span > 0, span, 1.0)
    # divide rather than multiply by 1/span so the group max lands exactly on 1
    out = np.where(span > 0, (x - lo) / safe, 0.0)
    return out, np.where(span > 0, 1.0 / safe, 0.0)


def min_max_normalize(x, scope=NormScope.PER_SAMPLE):
    """Rescale each scope group of ``x`` to [0, 1].

    ``per-sample`` groups all of (C, H, W) for each batch entry; ``per-channel``
    groups each (H, W) plane.  A constant group becomes all zeros.
    """
    return normalize_with_scale(as_feature_map(x), scope)[0]


@dataclass(frozen=True)
class AdapterParams:
    """Weights of a 1x1 convolution mapping ``c_in`` channels to ``c_out``."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weight, dtype=np.float64)
        b = np.ascontiguousarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[0] or min(w.shape) < 1:
            raise DimensionError(f"adapter weight {w.shape} / bias {b.shape} are inconsistent")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise InvalidInputError("adapter parameters must be finite")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def c_out(self):
        return self.weight.shape[0]

    @property
    def c_in(self):
        return self.weight.shape[1]

    @classmethod
    def identity(cls, channels):
        return cls(np.eye(channels), np.zeros(channels))

    @classmethod
    def init(cls, c_in, c_out, rng=None):
        """Uniform weights in +-1/sqrt(c_in), zero bias."""
        rng = np.random.default_rng(rng)
        bound = 1.0 / np.sqrt(c_in)
        return cls(rng.uniform(-bound, bound, size=(c_out, c_in)), np.zeros(c_out))


def apply_adapter(phi, x):
    """Per-pixel linear channel map: ``out[b, o] = bias[o] + sum_i weight[o, i] * x[b, i]``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 4:
        raise DimensionError(f"expected a (B, C, H, W) map, got shape {x.shape}")
    if x.shape[-3] != phi.c_in:
        raise DimensionError(
            f"adapter expects {phi.c_in} input channels, map has {x.shape[-3]}"
        )
    out = np.einsum("oi,...ihw->...ohw", phi.weight, x)
    out += phi.bias[:, None, None]
    return out
