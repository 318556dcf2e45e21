"""Both kernel backends must agree with each other and with plain numpy."""

import numpy as np
import pytest
from scipy.signal import convolve2d as scipy_convolve2d

from headsmith import _pykernels, kernels

try:
    from headsmith import _ckernels
except ImportError:
    _ckernels = None

needs_compiled = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def test_default_backend_prefers_compiled():
    expected = "compiled" if _ckernels is not None else "python"
    assert kernels.available_backends()[0] == expected


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def test_splitmix_reference_vectors(backend):
    # published SplitMix64 outputs for seed 0
    out = np.empty(3, dtype=np.uint64)
    state = kernels.splitmix_fill(0, out)
    assert [int(x) for x in out] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    assert state == (3 * 0x9E3779B97F4A7C15) & ((1 << 64) - 1)


def test_splitmix_empty_fill_keeps_state(backend):
    assert kernels.splitmix_fill(99, np.empty(0, dtype=np.uint64)) == 99


@needs_compiled
@pytest.mark.parametrize("seed", [0, 1, 2**63 + 5, 2**64 - 1])
def test_splitmix_backends_identical(seed):
    a = np.empty(1000, dtype=np.uint64)
    b = np.empty(1000, dtype=np.uint64)
    sa = _pykernels.splitmix_fill(seed, a)
    sb = _ckernels.splitmix_fill(seed, b)
    assert sa == sb
    np.testing.assert_array_equal(a, b)


@needs_compiled
def test_fisher_yates_backends_identical(np_rng):
    u = np_rng.random(99)
    a = np.arange(100, dtype=np.int64)
    b = a.copy()
    _pykernels.fisher_yates(a, u)
    _ckernels.fisher_yates(b, u)
    np.testing.assert_array_equal(a, b)
    assert sorted(a) == list(range(100))


@needs_compiled
def test_integer_kernels_identical(np_rng):
    img = np_rng.integers(0, 256, size=(37, 23), dtype=np.uint8)
    np.testing.assert_array_equal(_pykernels.histogram256(img), _ckernels.histogram256(img))
    yt = np_rng.integers(0, 4, 300).astype(np.int64)
    yp = np_rng.integers(0, 4, 300).astype(np.int64)
    np.testing.assert_array_equal(_pykernels.confusion_counts(yt, yp, 4), _ckernels.confusion_counts(yt, yp, 4))
    for r, h in [(1, 1), (2, 2), (3, 2), (5, 3)]:
        np.testing.assert_array_equal(_pykernels.max_pool2d(img, r, h), _ckernels.max_pool2d(img, r, h))


def test_histogram_matches_bincount(backend, np_rng):
    img = np_rng.integers(0, 256, size=(16, 9), dtype=np.uint8)
    hist = kernels.histogram256(img)
    assert hist.shape == (256,)
    assert hist.sum() == img.size
    np.testing.assert_array_equal(hist, np.bincount(img.ravel(), minlength=256))


def test_convolution_matches_scipy(backend, np_rng):
    img = np_rng.normal(size=(9, 7))
    k = np_rng.normal(size=(3, 2))
    np.testing.assert_allclose(kernels.convolve2d_valid(img, k), scipy_convolve2d(img, k, mode="valid"), atol=1e-12)
