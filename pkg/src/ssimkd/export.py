"""Writers for 2-D maps: binary PGM (P5) and CSV."""

import numpy as np

from .errors import DimensionError


def to_plane(values, batch=0):
    """Reduce a (B, C, H, W) map to 2-D by taking ``batch`` and averaging channels."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 4:
        v = v[batch].mean(axis=0)
    elif v.ndim == 3:
        v = v.mean(axis=0)
    if v.ndim != 2:
        raise DimensionError(f"cannot export a map of shape {np.shape(values)}")
    return v


def pgm_bytes(values):
    """8-bit P5 image, min-max scaled, higher values darker."""
    v = to_plane(values)
    lo, hi = v.min(), v.max()
    scaled = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
    pixels = np.rint(255.0 * (1.0 - scaled)).astype(np.uint8)
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def _fmt(x):
    text = repr(float(x))
    return text[:-2] if text.endswith(".0") else text


def csv_text(values):
    v = to_plane(values)
    return "".join(",".join(_fmt(x) for x in row) + "\n" for row in v)


def export_map(values, path, fmt=None):
    """Write a 2-D map as ``pgm`` or ``csv`` (inferred from the suffix when ``fmt`` is None)."""
    path = str(path)
    if fmt is None:
        fmt = "csv" if path.lower().endswith(".csv") else "pgm"
    fmt = fmt.lower()
    if fmt == "pgm":
        with open(path, "wb") as fh:
            fh.write(pgm_bytes(values))
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            fh.write(csv_text(values))
    else:
        raise ValueError(f"unknown export format {fmt!r}")
