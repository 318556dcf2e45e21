"""Pure-Python/numpy implementations of the hot kernels.

Every function here has a twin with the same signature in the compiled
``_ckernels`` extension; both must produce identical results on integer
kernels and agree to rounding on floating-point ones.
"""

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def splitmix_fill(state, out):
    """Fill ``out`` (uint64) with the next ``len(out)`` splitmix64 outputs.

    Returns the advanced state as a Python int.
    """
    n = out.shape[0]
    if n == 0:
        return state
    with np.errstate(over="ignore"):
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(state) + steps * GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        out[:] = z ^ (z >> np.uint64(31))
    return (state + n * int(GAMMA)) & _MASK


def fisher_yates(idx, uniforms):
    """In-place shuffle of ``idx`` driven by ``len(idx) - 1`` uniforms in [0, 1)."""
    n = idx.shape[0]
    k = 0
    for i in range(n - 1, 0, -1):
        j = int(uniforms[k] * (i + 1))
        k += 1
        idx[i], idx[j] = idx[j], idx[i]


def histogram256(img):
    return np.bincount(img.ravel(), minlength=256).astype(np.int64)


def confusion_counts(y_true, y_pred, k):
    flat = np.bincount(y_true * k + y_pred, minlength=k * k)
    return flat.reshape(k, k).astype(np.int64)


def convolve2d_valid(img, kernel):
    s, t = kernel.shape
    windows = np.lib.stride_tricks.sliding_window_view(img, (s, t))
    return np.einsum("ijab,ab->ij", windows, kernel[::-1, ::-1])


def max_pool2d(img, r, h):
    windows = np.lib.stride_tricks.sliding_window_view(img, (r, r))[::h, ::h]
    return windows.max(axis=(2, 3))
