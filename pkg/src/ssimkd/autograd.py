"""Analytic gradients of every loss and a finite-difference checker.

The backward pass of a windowed comparison works on the five moment maps:
given ``dL/dmu_s``, ``dL/dvar_s`` and ``dL/dcov`` on the valid region,

    dL/dS = adj(g_mu - 2k g_var mu_s - k g_cov mu_t) + 2k S adj(g_var) + k T adj(g_cov)

where ``adj`` is the transpose of the valid-mode window correlation and
``k`` the estimator's Bessel factor.  Min-max normalization is treated as a
fixed affine map (its min/max are not differentiated).
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import losses as L
from .errors import ConfigError, DimensionError
from .tensor import apply_adapter, as_feature_map, normalize_with_scale
from .window import adjoint_convolve, window_weights

log = logging.getLogger(__name__)


@dataclass
class GradientBundle:
    d_student: np.ndarray
    d_adapter_weight: np.ndarray | None = None
    d_adapter_bias: np.ndarray | None = None


@dataclass
class GradCheckReport:
    max_abs_err: float
    max_rel_err: float
    worst_index: int
    epsilon: float
    checked: int
    skipped: list = field(default_factory=list)
    adapter_max_rel_err: float | None = None

    @property
    def worst_rel_err(self):
        if self.adapter_max_rel_err is None:
            return self.max_rel_err
        return max(self.max_rel_err, self.adapter_max_rel_err)


def _ssim_backward(f, d_prod, s, t, cfg):
    """Gradient w.r.t. ``s`` given ``dL/d(product)`` on the valid region."""
    m = f.moments
    ex, st = cfg.exponents, cfg.stabilizers
    d_prod = np.where(f.inside, d_prod, 0.0)
    if f.lum_term is not None:
        dl = d_prod * f.cs_term * L.dspow(f.luminance, ex.alpha)
        denom = m.mu_s ** 2 + m.mu_t ** 2 + st.c1
        g_mu = dl * 2.0 * (m.mu_t - m.mu_s * f.luminance) / denom
        d_cs = d_prod * f.lum_term
    else:
        g_mu = np.zeros_like(d_prod)
        d_cs = d_prod

    denom_c = m.var_s + m.var_t + st.c2
    if f.cs is not None:
        dcs = d_cs * L.dspow(f.cs, ex.beta)
        g_cov = 2.0 * dcs / denom_c
        g_var = -dcs * f.cs / denom_c
    else:
        sd_s = np.sqrt(m.var_s)
        sd_t = np.sqrt(m.var_t)
        # d sd_s / d var_s is unbounded at var_s = 0; that branch is dropped there
        ratio = np.divide(sd_t, sd_s, out=np.zeros_like(sd_s), where=sd_s > 0)
        denom_s = sd_s * sd_t + st.c3
        dc = d_cs * L.dspow(f.contrast, ex.beta) * L.spow(f.structure, ex.gamma)
        ds = d_cs * L.spow(f.contrast, ex.beta) * L.dspow(f.structure, ex.gamma)
        g_var = dc * (ratio - f.contrast) / denom_c - ds * f.structure * ratio / (2.0 * denom_s)
        g_cov = ds / denom_s
    g_var = np.where(m.clamped_s, 0.0, g_var)

    k = f.window.bessel
    a = g_mu - 2.0 * k * g_var * m.mu_s - k * g_cov * m.mu_t
    adj_a, adj_v, adj_c = adjoint_convolve(np.stack([a, g_var, g_cov]), window_weights(f.window))
    return adj_a + 2.0 * k * s * adj_v + k * t * adj_c


def _pointwise_grad(kind, s, t, cfg, p=None):
    d = s - t
    n = d.size
    if kind == "smoothl1":
        beta = cfg.huber_beta
        return np.where(np.abs(d) < beta, d / beta, np.sign(d)) / n
    p = cfg.order if p is None else p
    if p == 1:
        return np.sign(d) / n
    if p == 2:
        return 2.0 * d / n
    return p * np.abs(d) ** (p - 1) * np.sign(d) / n


def _ms_grad(fields, s, t, cfg):
    shape = s.shape
    counts = [L._valid_count(shape, f.window.size) for f in fields]
    means = np.array([f.product.sum() / n for f, n in zip(fields, counts)])
    terms = [L.spow(mv, w) for mv, w in zip(means, L.MS_WEIGHTS)]
    grad = np.zeros_like(s)
    for i, (f, n) in enumerate(zip(fields, counts)):
        others = np.prod([terms[j] for j in range(len(terms)) if j != i])
        d_mean = -0.5 * L.dspow(means[i], L.MS_WEIGHTS[i]) * others
        grad += _ssim_backward(f, np.full(f.product.shape, d_mean / n), s, t, cfg)
    return grad


def loss_and_grad(kind, s, t, cfg=L.LossConfig()):
    """Loss scalar and ``dL/ds`` for already-prepared (normalized, adapted) inputs."""
    if kind not in L.KINDS:
        raise ConfigError(f"unknown loss kind {kind!r}")
    cfg = replace(cfg, kind=kind)
    s = as_feature_map(s, "student")
    t = as_feature_map(t, "teacher")
    if s.shape != t.shape:
        raise DimensionError(f"student {s.shape} and teacher {t.shape} shapes differ")
    if kind in L.POINTWISE:
        return float(L.loss_scalar(kind, s, t, cfg)), _pointwise_grad(kind, s, t, cfg)
    L._check_window(s.shape, cfg.window.size if kind == "ssim" else max(L.MS_WINDOWS))
    fields = L.loss_fields(kind, s, t, cfg)
    scalar = float(L.loss_scalar(kind, s, t, cfg, fields))
    if kind == "ssim":
        n = L._valid_count(s.shape, cfg.window.size)
        grad = _ssim_backward(fields[0], np.full(fields[0].product.shape, -0.5 / n), s, t, cfg)
    elif kind == "msssim":
        grad = _ms_grad(fields, s, t, cfg)
    else:
        grad = cfg.combine_w1 * _pointwise_grad("l1", s, t, cfg, p=1) + cfg.combine_w2 * _ms_grad(
            fields, s, t, cfg
        )
    return scalar, grad


def backward(kind, s, t, phi=None, cfg=L.LossConfig()):
    """Loss and gradients w.r.t. the raw student map and the adapter.

    The chain is ``s -> adapter -> min-max normalization -> loss``; the
    normalization min/max are held fixed.
    """
    cfg = replace(cfg, kind=kind)
    s = as_feature_map(s, "student")
    t = as_feature_map(t, "teacher")
    a = apply_adapter(phi, s) if phi is not None else s
    if a.shape != t.shape:
        raise DimensionError(f"student {a.shape} and teacher {t.shape} shapes differ")
    if cfg.normalize is not None:
        sn, scale = normalize_with_scale(a, cfg.normalize)
        tn = normalize_with_scale(t, cfg.normalize)[0]
    else:
        sn, tn, scale = a, t, 1.0
    scalar, d_sn = loss_and_grad(kind, sn, tn, cfg)
    d_a = d_sn * scale
    if phi is None:
        return scalar, GradientBundle(d_a)
    d_s = np.einsum("oi,bohw->bihw", phi.weight, d_a)
    d_w = np.einsum("bohw,bihw->oi", d_a, s)
    d_b = d_a.sum(axis=(0, 2, 3))
    return scalar, GradientBundle(d_s, d_w, d_b)


def multiscale_backward(student, teacher, phis=None, cfg=L.LossConfig()):
    """Per-scale gradients of the summed multi-scale feature loss."""
    phis = L._per_scale(phis, len(student))
    if len(student) != len(teacher):
        raise DimensionError(f"{len(student)} student scales vs {len(teacher)} teacher scales")
    total, bundles = 0.0, []
    for s, t, phi in zip(student, teacher, phis):
        value, g = backward(cfg.kind, s, t, phi, cfg)
        total += value
        bundles.append(g)
    return total, bundles


# ------------------------------------------------------------ finite differences

_HP = np.longdouble
_CHUNK = 256


def _has_kink(kind, cfg):
    if kind == "combined":
        return True
    return kind in ("l1", "lp") and cfg.order < 2


def _plane_local_fd(kind, s, t, cfg, coords, eps):
    """Central differences exploiting that a pixel only affects its own (b, c) plane."""
    sl, tl = s.astype(_HP), t.astype(_HP)
    base = L.plane_stats(kind, sl, tl, cfg)
    b_, c_, h, w = s.shape
    numeric = np.empty(len(coords), dtype=_HP)
    planes = {}
    for n, flat in enumerate(coords):
        b, c, i, j = np.unravel_index(flat, s.shape)
        planes.setdefault((b, c), []).append((n, i * w + j))
    for (b, c), items in planes.items():
        mask = np.ones((b_, c_), dtype=bool)
        mask[b, c] = False
        others = base[mask].sum(axis=0)
        for start in range(0, len(items), _CHUNK):
            chunk = items[start:start + _CHUNK]
            k = len(chunk)
            pos = np.array([p for _, p in chunk])
            copies = np.repeat(sl[b, c].reshape(1, -1), 2 * k, axis=0)
            copies[np.arange(k), pos] += eps
            copies[k + np.arange(k), pos] -= eps
            copies = copies.reshape(2 * k, h, w)
            stats = L.plane_stats(kind, copies, np.broadcast_to(tl[b, c], copies.shape), cfg)
            values = L.finalize(kind, others + stats, s.shape, cfg)
            for (n, _), vp, vm in zip(chunk, values[:k], values[k:]):
                numeric[n] = (vp - vm) / (2 * _HP(eps))
    return numeric


def _full_fd(kind, s, t, phi, cfg, coords, eps):
    sl, tl = s.astype(_HP), t.astype(_HP)
    weight, bias = phi.weight.astype(_HP), phi.bias.astype(_HP)
    numeric = np.empty(len(coords), dtype=_HP)
    for start in range(0, len(coords), _CHUNK // 4):
        chunk = coords[start:start + _CHUNK // 4]
        k = len(chunk)
        copies = np.repeat(sl.reshape(1, -1), 2 * k, axis=0)
        copies[np.arange(k), chunk] += eps
        copies[k + np.arange(k), chunk] -= eps
        copies = copies.reshape((2 * k,) + s.shape)
        a = np.einsum("oi,...ihw->...ohw", weight, copies) + bias[:, None, None]
        values = L.loss_scalar(kind, a, np.broadcast_to(tl, a.shape), cfg)
        numeric[start:start + k] = (values[:k] - values[k:]) / (2 * _HP(eps))
    return numeric


def _adapter_fd(kind, s, t, phi, cfg, eps):
    sl, tl = s.astype(_HP), t.astype(_HP)
    w0, b0 = phi.weight.astype(_HP), phi.bias.astype(_HP)

    def value(weight, bias):
        a = np.einsum("oi,bihw->bohw", weight, sl) + bias[:, None, None]
        return L.loss_scalar(kind, a, tl, cfg)

    d_w = np.empty(w0.shape, dtype=_HP)
    for idx in np.ndindex(w0.shape):
        wp, wm = w0.copy(), w0.copy()
        wp[idx] += eps
        wm[idx] -= eps
        d_w[idx] = (value(wp, b0) - value(wm, b0)) / (2 * _HP(eps))
    d_b = np.empty(b0.shape, dtype=_HP)
    for o in range(len(b0)):
        bp, bm = b0.copy(), b0.copy()
        bp[o] += eps
        bm[o] -= eps
        d_b[o] = (value(w0, bp) - value(w0, bm)) / (2 * _HP(eps))
    return d_w, d_b


def _rel(analytic, numeric):
    a = np.asarray(analytic, dtype=_HP)
    n = np.asarray(numeric, dtype=_HP)
    abs_err = np.abs(a - n)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    return abs_err, abs_err / denom


def finite_diff_check(kind, s, t, cfg=L.LossConfig(), epsilon=1e-5, phi=None,
                      max_coords=None, seed=0):
    """Compare :func:`backward` against central differences.

    Inputs are taken as already normalized (the check bypasses min-max
    scaling).  Differences are evaluated in extended precision so rounding
    in the loss value does not swamp small gradient entries.  Coordinates
    where a kinked loss is evaluated across its kink (``|s - t| <= eps``)
    are skipped and listed in the report.  For maps larger than 4096
    elements a random subset of ``max_coords`` (default 256) coordinates is
    checked.
    """
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    cfg = replace(cfg, kind=kind, normalize=None)
    s = as_feature_map(s, "student")
    t = as_feature_map(t, "teacher")
    _, grads = backward(kind, s, t, phi, cfg)

    n_total = s.size
    if max_coords is None and n_total > 4096:
        max_coords = 256
    if max_coords is not None and max_coords < n_total:
        coords = np.sort(np.random.default_rng(seed).choice(n_total, max_coords, replace=False))
    else:
        coords = np.arange(n_total)

    skipped = []
    if _has_kink(kind, cfg) and phi is None:
        near = np.abs((s - t).ravel()[coords]) <= epsilon
        skipped = coords[near].tolist()
        coords = coords[~near]

    if phi is None:
        numeric = _plane_local_fd(kind, s, t, cfg, coords, epsilon)
    else:
        numeric = _full_fd(kind, s, t, phi, cfg, coords, epsilon)
    analytic = grads.d_student.ravel()[coords]
    abs_err, rel_err = _rel(analytic, numeric)
    if len(coords):
        worst = int(np.argmax(rel_err))
        report = GradCheckReport(
            float(abs_err.max()), float(rel_err.max()), int(coords[worst]), epsilon,
            len(coords), skipped,
        )
    else:
        report = GradCheckReport(0.0, 0.0, -1, epsilon, 0, skipped)
    if phi is not None:
        d_w, d_b = _adapter_fd(kind, s, t, phi, cfg, epsilon)
        _, rw = _rel(grads.d_adapter_weight, d_w)
        _, rb = _rel(grads.d_adapter_bias, d_b)
        report.adapter_max_rel_err = float(max(rw.max(), rb.max()))
    log.debug("gradcheck %s: %s", kind, report)
    return report


__all__ = [
    "GradCheckReport", "GradientBundle", "backward", "finite_diff_check",
    "loss_and_grad", "multiscale_backward",
]
