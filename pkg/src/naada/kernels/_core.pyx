# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled gather/scatter kernels (same contract as ``_pure``).

Bounds checks are hoisted out of the inner loops: for each kernel
offset the valid output range is computed once, so the hot loops run
branch-free over contiguous runs. Single-threaded on purpose: the
tensor core promises bit-identical results for identical inputs, which
rules out nondeterministic parallel accumulation in col2im.
"""

import numpy as np

BACKEND = "compiled"

ctypedef fused real:
    float
    double


cdef inline Py_ssize_t _ceil_div(Py_ssize_t a, Py_ssize_t b) nogil:
    # callers guarantee a > 0, b > 0: safe under C truncating division
    return (a + b - 1) // b


def im2col(real[:, :, :, ::1] x, int kh, int kw, int sh, int sw, int ph, int pw):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h + 2 * ph - kh) // sh + 1
    cdef Py_ssize_t ow = (w + 2 * pw - kw) // sw + 1
    if real is float:
        out = np.zeros((b, c * kh * kw, oh * ow), dtype=np.float32)
    else:
        out = np.zeros((b, c * kh * kw, oh * ow), dtype=np.float64)
    cdef real[:, :, ::1] o = out
    cdef Py_ssize_t bi, ci, i, j, r, s, row, base
    cdef Py_ssize_t r_lo, r_hi, s_lo, s_hi, ih, iw0
    with nogil:
        for i in range(kh):
            # rows with i*1 + r*sh - ph inside [0, h)
            r_lo = _ceil_div(ph - i, sh) if ph > i else 0
            r_hi = (h - 1 + ph - i) // sh
            if r_hi > oh - 1:
                r_hi = oh - 1
            for j in range(kw):
                s_lo = _ceil_div(pw - j, sw) if pw > j else 0
                s_hi = (w - 1 + pw - j) // sw
                if s_hi > ow - 1:
                    s_hi = ow - 1
                if r_lo > r_hi or s_lo > s_hi:
                    continue
                for bi in range(b):
                    for ci in range(c):
                        row = (ci * kh + i) * kw + j
                        for r in range(r_lo, r_hi + 1):
                            ih = r * sh - ph + i
                            base = r * ow
                            iw0 = s_lo * sw - pw + j
                            for s in range(s_lo, s_hi + 1):
                                o[bi, row, base + s] = x[bi, ci, ih, iw0]
                                iw0 += sw
    return out


def col2im(real[:, :, ::1] cols, int b, int c, int h, int w,
           int kh, int kw, int sh, int sw, int ph, int pw):
    cdef Py_ssize_t oh = (h + 2 * ph - kh) // sh + 1
    cdef Py_ssize_t ow = (w + 2 * pw - kw) // sw + 1
    if real is float:
        out = np.zeros((b, c, h, w), dtype=np.float32)
    else:
        out = np.zeros((b, c, h, w), dtype=np.float64)
    cdef real[:, :, :, ::1] o = out
    cdef Py_ssize_t bi, ci, i, j, r, s, row, base
    cdef Py_ssize_t r_lo, r_hi, s_lo, s_hi, ih, iw0
    with nogil:
        for i in range(kh):
            r_lo = _ceil_div(ph - i, sh) if ph > i else 0
            r_hi = (h - 1 + ph - i) // sh
            if r_hi > oh - 1:
                r_hi = oh - 1
            for j in range(kw):
                s_lo = _ceil_div(pw - j, sw) if pw > j else 0
                s_hi = (w - 1 + pw - j) // sw
                if s_hi > ow - 1:
                    s_hi = ow - 1
                if r_lo > r_hi or s_lo > s_hi:
                    continue
                for bi in range(b):
                    for ci in range(c):
                        row = (ci * kh + i) * kw + j
                        for r in range(r_lo, r_hi + 1):
                            ih = r * sh - ph + i
                            base = r * ow
                            iw0 = s_lo * sw - pw + j
                            for s in range(s_lo, s_hi + 1):
                                o[bi, ci, ih, iw0] += cols[bi, row, base + s]
                                iw0 += sw
    return out
