import numpy as np
import pytest

from ssimkd import kernels
from ssimkd import _pykernels


def test_backends_listed():
    assert "python" in kernels.available_backends()
    assert kernels.get_backend() in kernels.available_backends()


def test_set_backend_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.set_backend("gpu")


@pytest.mark.skipif("compiled" not in kernels.available_backends(), reason="extension not built")
def test_compiled_and_python_are_bit_equal(rng):
    x = rng.standard_normal((2, 3, 20, 17))
    w = rng.random(5)
    w /= w.sum()
    a = kernels.correlate_sep(x, w, backend="compiled")
    b = kernels.correlate_sep(x, w, backend="python")
    assert a.shape == (2, 3, 16, 13)
    np.testing.assert_array_equal(a, b)


def test_python_kernel_matches_loops(rng):
    x = rng.random((7, 6))
    w = np.array([0.2, 0.5, 0.3])
    out = _pykernels.correlate_sep(x, w)
    ref = np.zeros((5, 4))
    for i in range(5):
        for j in range(4):
            ref[i, j] = sum(w[u] * w[v] * x[i + u, j + v] for u in range(3) for v in range(3))
    np.testing.assert_allclose(out, ref, atol=1e-15)


def test_non_float64_goes_through_python(backend):
    x = np.ones((1, 1, 5, 5), dtype=np.longdouble)
    out = kernels.correlate_sep(x, np.full(3, 1 / 3))
    assert out.dtype == np.longdouble and out.shape == (1, 1, 3, 3)


def test_lead_axes_are_preserved(backend, rng):
    x = rng.random((5, 2, 3, 9, 9))
    out = kernels.correlate_sep(x, np.full(3, 1 / 3))
    assert out.shape == (5, 2, 3, 7, 7)
