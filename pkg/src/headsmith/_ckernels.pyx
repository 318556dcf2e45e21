# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``."""

import numpy as np
from libc.stdint cimport uint64_t, int64_t, uint8_t

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef uint64_t _M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t _M2 = 0x94D049BB133111EBULL


def splitmix_fill(state, uint64_t[::1] out):
    cdef uint64_t s = <uint64_t>(state & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t z
    cdef Py_ssize_t i, n = out.shape[0]
    for i in range(n):
        s += GAMMA
        z = s
        z = (z ^ (z >> 30)) * _M1
        z = (z ^ (z >> 27)) * _M2
        out[i] = z ^ (z >> 31)
    return int(s)


def fisher_yates(int64_t[::1] idx, const double[::1] uniforms):
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t i, j, k = 0
    cdef int64_t tmp
    i = n - 1
    while i > 0:
        j = <Py_ssize_t>(uniforms[k] * (i + 1))
        k += 1
        tmp = idx[i]
        idx[i] = idx[j]
        idx[j] = tmp
        i -= 1


def histogram256(const uint8_t[:, :] img):
    out = np.zeros(256, dtype=np.int64)
    cdef int64_t[::1] h = out
    cdef Py_ssize_t i, j
    for i in range(img.shape[0]):
        for j in range(img.shape[1]):
            h[img[i, j]] += 1
    return out


def confusion_counts(const int64_t[::1] y_true, const int64_t[::1] y_pred, Py_ssize_t k):
    out = np.zeros((k, k), dtype=np.int64)
    cdef int64_t[:, ::1] c = out
    cdef Py_ssize_t i
    for i in range(y_true.shape[0]):
        c[y_true[i], y_pred[i]] += 1
    return out


def convolve2d_valid(const double[:, :] img, const double[:, :] kernel):
    cdef Py_ssize_t m = img.shape[0], n = img.shape[1]
    cdef Py_ssize_t s = kernel.shape[0], t = kernel.shape[1]
    cdef Py_ssize_t i, j, a, b
    cdef double acc
    out = np.empty((m - s + 1, n - t + 1), dtype=np.float64)
    cdef double[:, ::1] g = out
    for i in range(m - s + 1):
        for j in range(n - t + 1):
            acc = 0.0
            for a in range(s):
                for b in range(t):
                    acc += img[i + a, j + b] * kernel[s - 1 - a, t - 1 - b]
            g[i, j] = acc
    return out


def max_pool2d(const uint8_t[:, :] img, Py_ssize_t r, Py_ssize_t h):
    cdef Py_ssize_t om = (img.shape[0] - r) // h + 1
    cdef Py_ssize_t on = (img.shape[1] - r) // h + 1
    cdef Py_ssize_t i, j, a, b
    cdef uint8_t best, v
    out = np.empty((om, on), dtype=np.uint8)
    cdef uint8_t[:, ::1] g = out
    for i in range(om):
        for j in range(on):
            best = 0
            for a in range(r):
                for b in range(r):
                    v = img[i * h + a, j * h + b]
                    if v > best:
                        best = v
            g[i, j] = best
    return out
