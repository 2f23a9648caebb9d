"""Kernel backend selection.

Prefers the compiled Cython extension; falls back to the pure-NumPy
implementation when the extension is missing or when the environment
variable ``NAADA_PURE_PYTHON`` is set to a non-empty value. Both
backends share one contract and one test suite.
"""

import os

import numpy as np

if os.environ.get("NAADA_PURE_PYTHON"):
    from naada.kernels import _pure as _impl
else:
    try:
        from naada.kernels import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        from naada.kernels import _pure as _impl  # type: ignore[no-redef]

BACKEND = _impl.BACKEND

_SUPPORTED = (np.float32, np.float64)


def backend_name():
    """Name of the active backend: 'compiled' or 'python'."""
    return BACKEND


def _set_backend(name):
    """Swap the live backend ('compiled' or 'python'); benchmark/test hook."""
    global _impl, BACKEND
    if name == "python":
        from naada.kernels import _pure as module
    elif name == "compiled":
        from naada.kernels import _core as module  # raises if not built
    else:
        raise ValueError(f"unknown backend {name!r}")
    _impl = module
    BACKEND = module.BACKEND


def _check_dtype(a):
    if a.dtype.type not in _SUPPORTED:
        raise TypeError(f"kernels support float32/float64, got {a.dtype}")


def im2col(x, kh, kw, sh, sw, ph, pw):
    """Gather windows of a [B,C,H,W] array into [B, C*kh*kw, OH*OW]."""
    _check_dtype(x)
    x = np.ascontiguousarray(x)
    return np.asarray(_impl.im2col(x, kh, kw, sh, sw, ph, pw))


def col2im(cols, b, c, h, w, kh, kw, sh, sw, ph, pw):
    """Scatter-add [B, C*kh*kw, OH*OW] columns back to [B,C,H,W]."""
    _check_dtype(cols)
    cols = np.ascontiguousarray(cols)
    return np.asarray(_impl.col2im(cols, b, c, h, w, kh, kw, sh, sw, ph, pw))


def conv_out_size(size, k, stride, pad):
    """Spatial output size of a strided correlation."""
    return (size + 2 * pad - k) // stride + 1


def tconv_out_size(size, k, stride, pad):
    """Spatial output size of a transposed (fractionally strided) correlation."""
    return (size - 1) * stride - 2 * pad + k
