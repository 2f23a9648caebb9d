"""Pure-NumPy gather/scatter kernels for the convolution ops.

Fallback backend used when the compiled extension is unavailable or
disabled. Both backends implement the same two primitives:

  im2col  -- gather k x k input windows into a column matrix
  col2im  -- scatter-add a column matrix back onto an image grid

Every spatial operator in the tensor core (conv, transposed conv,
average pooling and all their gradients) is expressed through these two.
"""

import numpy as np

BACKEND = "python"


def _out_size(size, k, stride, pad):
    return (size + 2 * pad - k) // stride + 1


def im2col(x, kh, kw, sh, sw, ph, pw):
    """[B,C,H,W] -> [B, C*kh*kw, OH*OW] with implicit zero padding."""
    b, c, h, w = x.shape
    oh = _out_size(h, kh, sh, ph)
    ow = _out_size(w, kw, sw, pw)
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::sh, ::sw]  # [B,C,OH,OW,kh,kw]
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(b, c * kh * kw, oh * ow)
    return np.ascontiguousarray(cols)


def col2im(cols, b, c, h, w, kh, kw, sh, sw, ph, pw):
    """Adjoint of im2col: scatter-add [B, C*kh*kw, OH*OW] -> [B,C,H,W]."""
    oh = _out_size(h, kh, sh, ph)
    ow = _out_size(w, kw, sw, pw)
    xp = np.zeros((b, c, h + 2 * ph, w + 2 * pw), dtype=cols.dtype)
    c6 = cols.reshape(b, c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i : i + sh * oh : sh, j : j + sw * ow : sw] += c6[:, :, i, j]
    if ph or pw:
        return np.ascontiguousarray(xp[:, :, ph : ph + h, pw : pw + w])
    return xp
