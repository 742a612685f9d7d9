"""Desk-scale distillation: optimize a student feature map toward a fixed teacher.

The detection loss is stubbed to zero, so training minimizes
``lam * feat_loss`` alone with classical momentum SGD.
"""

import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .autograd import backward
from .errors import ConfigError, DimensionError
from .losses import LossConfig, prepare_pair, ssim_loss, total_loss
from .tensor import AdapterParams, as_multiscale

GENERATORS = ("smooth+texture", "random", "affine-pair")


class StudentKind(str, Enum):
    DIRECT = "direct"
    ADAPTER = "adapter"


@dataclass(frozen=True)
class DistillConfig:
    loss: LossConfig = LossConfig()
    lr: float = 0.01
    momentum: float = 0.9
    steps: int = 2000
    lam: float = 4.0
    student_kind: StudentKind = StudentKind.DIRECT
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "student_kind", StudentKind(self.student_kind))
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")


@dataclass
class Scenario:
    """Teacher features, optional region masks over scale 1 and optional student init."""

    teacher: list
    masks: dict = field(default_factory=dict)
    student: list | None = None
    generator: str = ""
    seed: int = 0


@dataclass
class TrainLog:
    losses: list
    ssims: list
    student: list
    seconds: list
    adapter: list | None = None


@dataclass
class DistributionStats:
    means: dict
    ratio: float


# ------------------------------------------------------------------ scenarios


def _smooth_texture(shape, rng):
    """Bright low-frequency blob on the left, dark fine texture on the right."""
    b, c, h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    half = w // 2
    out = np.empty(shape)
    for i in range(b):
        for j in range(c):
            cy = rng.uniform(0.35, 0.65) * h
            cx = rng.uniform(0.3, 0.7) * half
            rad = rng.uniform(0.25, 0.4) * h
            blob = 0.6 + 0.35 * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * rad ** 2))
            fy, fx = rng.uniform(1.2, 2.0, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            texture = 0.12 + 0.08 * np.sin(fy * yy + phase) * np.sin(fx * xx) + 0.03 * rng.standard_normal((h, w))
            out[i, j] = np.where(xx < half, blob, texture)
    masks = {
        "bright_flat": (xx >= 2) & (xx < half - 2),
        "dark_textured": (xx >= half + 2) & (xx < w - 2),
    }
    return out, masks


def generate_scenario(name, dims=(1, 4, 32, 32), seed=0, scales=1):
    """Build a synthetic teacher (and masks / student init where applicable).

    ``scales`` > 1 adds further scales at halved spatial resolution.
    """
    if name not in GENERATORS:
        raise ConfigError(f"unknown generator {name!r}; expected one of {GENERATORS}")
    rng = np.random.default_rng(seed)
    b, c, h, w = dims
    shapes = [(b, c, max(h >> r, 1), max(w >> r, 1)) for r in range(scales)]
    masks = {}
    student = None
    if name == "smooth+texture":
        teacher = []
        for r, shp in enumerate(shapes):
            t, m = _smooth_texture(shp, rng)
            teacher.append(t)
            if r == 0:
                masks = m
        # student error proportional to activation magnitude
        student = [t * (1.0 + 0.1 * rng.standard_normal(t.shape)) for t in teacher]
    elif name == "random":
        teacher = [rng.random(shp) for shp in shapes]
    else:
        teacher = [rng.random(shp) for shp in shapes]
        a, off = 0.5, 0.2
        student = [a * t + off + 0.01 * rng.standard_normal(t.shape) for t in teacher]
    return Scenario(teacher, masks, student, name, seed)


# ------------------------------------------------------------------ optimizer


def sgd_step(param, grad, lr, momentum, velocity=None):
    """Classical momentum: ``v <- momentum * v + g``; ``p <- p - lr * v``."""
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if param.shape != grad.shape:
        raise DimensionError(f"parameter {param.shape} and gradient {grad.shape} differ")
    if velocity is None:
        velocity = np.zeros_like(param)
    elif np.shape(velocity) != param.shape:
        raise DimensionError(f"velocity {np.shape(velocity)} does not match {param.shape}")
    velocity = momentum * velocity + grad
    return param - lr * velocity, velocity


# ------------------------------------------------------------------ training


def _mean_ssim(student, teacher, phis, cfg):
    plain = replace(cfg, kind="ssim", exponents=LossConfig().exponents)
    vals = []
    for s, t, phi in zip(student, teacher, phis):
        sn, tn = prepare_pair(s, t, phi, plain)
        vals.append(1.0 - 2.0 * ssim_loss(sn, tn, plain).scalar)
    return float(np.mean(vals))


def run_distillation(scenario, cfg=DistillConfig(), init=None):
    """Train a student toward ``scenario.teacher`` and log loss / SSIM per step.

    ``init`` overrides the starting student (direct mode) or the fixed base
    features (adapter mode); otherwise ``scenario.student`` is used when
    present, else uniform noise in [0, 1] drawn from ``cfg.seed``.
    """
    teacher = as_multiscale(scenario.teacher, "teacher")
    # separate stream from the scenario generators, which also seed from small ints
    rng = np.random.default_rng((cfg.seed, 0x5EED))
    loss_cfg = cfg.loss
    if init is None:
        init = scenario.student
    if init is None:
        feats = [rng.random(t.shape) for t in teacher]
    else:
        feats = [np.array(x, dtype=np.float64) for x in as_multiscale(init, "init")]
    if len(feats) != len(teacher):
        raise DimensionError(f"{len(feats)} student scales vs {len(teacher)} teacher scales")

    adapter = cfg.student_kind is StudentKind.ADAPTER
    phis = [None] * len(teacher)
    if adapter:
        phis = [AdapterParams.init(f.shape[1], t.shape[1], rng) for f, t in zip(feats, teacher)]
        vel = [[None, None] for _ in phis]
    else:
        vel = [None] * len(feats)
    plain_ssim = loss_cfg.kind == "ssim" and loss_cfg.exponents == LossConfig().exponents \
        and loss_cfg.window == LossConfig().window

    losses, ssims, seconds = [], [], []
    for _ in range(cfg.steps):
        t0 = time.perf_counter()
        feat = 0.0
        grads = []
        for f, t, phi in zip(feats, teacher, phis):
            value, g = backward(loss_cfg.kind, f, t, phi, loss_cfg)
            feat += value
            grads.append(g)
        losses.append(total_loss(feat, 0.0, cfg.lam))
        if plain_ssim:
            ssims.append(1.0 - 2.0 * feat / len(teacher))
        else:
            ssims.append(_mean_ssim(feats, teacher, phis, loss_cfg))
        for r, g in enumerate(grads):
            if adapter:
                w, vel[r][0] = sgd_step(phis[r].weight, cfg.lam * g.d_adapter_weight, cfg.lr, cfg.momentum, vel[r][0])
                bias, vel[r][1] = sgd_step(phis[r].bias, cfg.lam * g.d_adapter_bias, cfg.lr, cfg.momentum, vel[r][1])
                phis[r] = AdapterParams(w, bias)
            else:
                feats[r], vel[r] = sgd_step(feats[r], cfg.lam * g.d_student, cfg.lr, cfg.momentum, vel[r])
        seconds.append(time.perf_counter() - t0)
    return TrainLog(losses, ssims, feats, seconds, phis if adapter else None)


# ------------------------------------------------------------------ analysis


def _as_plane(values):
    v = np.abs(np.asarray(values, dtype=np.float64))
    while v.ndim > 2:
        v = v.mean(axis=0)
    return v


def gradient_distribution_stats(values, masks, numerator="dark_textured", denominator="bright_flat"):
    """Mean ``|values|`` inside each mask and the numerator/denominator ratio.

    ``values`` may be (B, C, H, W) (averaged over batch and channels) or 2-D.
    A map smaller than the masks is taken to be a centered valid region and
    the masks are cropped to match.  A zero denominator gives ``inf``.
    """
    v = _as_plane(values)
    means = {}
    for name, mask in masks.items():
        mask = np.asarray(mask, dtype=bool)
        dh, dw = mask.shape[0] - v.shape[0], mask.shape[1] - v.shape[1]
        if dh < 0 or dw < 0 or dh % 2 or dw % 2:
            raise DimensionError(f"mask {mask.shape} cannot be cropped to map {v.shape}")
        crop = mask[dh // 2:mask.shape[0] - dh // 2, dw // 2:mask.shape[1] - dw // 2]
        if not crop.any():
            raise DimensionError(f"mask {name!r} is empty after cropping to {v.shape}")
        means[name] = float(v[crop].mean())
    den = means[denominator]
    ratio = means[numerator] / den if den > 0 else float("inf")
    return DistributionStats(means, ratio)


def loss_distribution(scenario, student, cfg=LossConfig()):
    """Gradient and loss-map distribution stats of one loss on scale 1."""
    t = scenario.teacher[0]
    s = student[0] if isinstance(student, (list, tuple)) else student
    _, g = backward(cfg.kind, s, t, None, cfg)
    from .losses import compute_loss

    sn, tn = prepare_pair(s, t, None, cfg)
    lmap = compute_loss(sn, tn, cfg).map
    return (
        gradient_distribution_stats(g.d_student, scenario.masks),
        gradient_distribution_stats(lmap, scenario.masks),
    )
