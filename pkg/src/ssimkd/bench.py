"""Timing of the separable window correlation against the direct 2-D sum."""

import time

import numpy as np

from . import kernels
from .window import WindowSpec, direct_convolve, gaussian_window


def _best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run_bench(dims=(1, 8, 256, 256), window=11, sigma=1.5, repeat=3, seed=0):
    """Best-of-``repeat`` seconds per backend plus the largest deviation from the direct sum."""
    x = np.random.default_rng(seed).random(dims)
    w = gaussian_window(WindowSpec(window, sigma))
    t_direct, ref = _best_of(lambda: direct_convolve(x, w.weights_2d), repeat)
    rows = {"direct": {"seconds": t_direct, "max_abs_diff": 0.0}}
    for backend in kernels.available_backends():
        t, out = _best_of(lambda: kernels.correlate_sep(x, w.weights_1d, backend=backend), repeat)
        rows[f"separable-{backend}"] = {
            "seconds": t,
            "max_abs_diff": float(np.abs(out - ref).max()),
            "speedup": t_direct / t,
        }
    return rows


def format_bench(rows):
    lines = [f"{'method':<20} {'seconds':>10} {'speedup':>8} {'max|diff|':>10}"]
    for name, r in rows.items():
        lines.append(
            f"{name:<20} {r['seconds']:>10.4f} {r.get('speedup', 1.0):>8.2f} {r['max_abs_diff']:>10.2e}"
        )
    return "\n".join(lines)
