"""Pure numpy separable valid-mode correlation (fallback backend).

Works for any float dtype, including ``np.longdouble``.
"""

import numpy as np


def correlate_sep(x, w):
    """Valid correlation of each (H, W) plane of ``x`` (shape (N, H, W)) with ``w`` outer ``w``."""
    f = len(w)
    ow = x.shape[-1] - f + 1
    oh = x.shape[-2] - f + 1
    w = np.asarray(w, dtype=x.dtype)
    tmp = np.zeros(x.shape[:-1] + (ow,), dtype=x.dtype)
    for k in range(f):
        tmp += w[k] * x[..., k:k + ow]
    out = np.zeros(x.shape[:-2] + (oh, ow), dtype=x.dtype)
    for k in range(f):
        out += w[k] * tmp[..., k:k + oh, :]
    return out
