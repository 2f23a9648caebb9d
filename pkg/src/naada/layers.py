"""Convolutional layer primitives over the autodiff tensor core.

All spatial ops are routed through the im2col/col2im kernels, so the
compiled and pure backends share every code path here. Weight layouts:

  conv2d            [C_out, C_in, k, k]
  transposed_conv2d [C_in, C_out, k, k]
  conv1x1           conv2d with k=1 (attention projections)
  batchnorm2d       weight/bias of length C plus running statistics
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from naada import kernels
from naada.tensor import Tensor

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass
class LayerParams:
    """Parameters and hyperparameters of one layer."""

    kind: str  # conv2d | transposed_conv2d | batchnorm2d | conv1x1
    weight: Tensor
    bias: Tensor
    stride: int = 1
    padding: int = 0
    running_mean: np.ndarray | None = None
    running_var: np.ndarray | None = None
    eps: float = BN_EPS
    momentum: float = BN_MOMENTUM
    extra: dict = field(default_factory=dict)

    @property
    def kernel_size(self):
        if self.kind == "batchnorm2d":
            return 1
        return self.weight.shape[2]

    @property
    def in_channels(self):
        if self.kind == "batchnorm2d":
            return self.weight.shape[0]
        if self.kind == "transposed_conv2d":
            return self.weight.shape[0]
        return self.weight.shape[1]

    @property
    def out_channels(self):
        if self.kind == "batchnorm2d":
            return self.weight.shape[0]
        if self.kind == "transposed_conv2d":
            return self.weight.shape[1]
        return self.weight.shape[0]

    def trainable(self):
        return [self.weight, self.bias]

    def n_params(self):
        return self.weight.size + self.bias.size


def he_uniform(shape, fan_in, rng, dtype=np.float32):
    """Uniform He-style initialization scaled by fan-in."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def conv_params(c_in, c_out, k, stride, padding, rng, dtype=np.float32):
    fan_in = c_in * k * k
    w = Tensor(he_uniform((c_out, c_in, k, k), fan_in, rng, dtype), requires_grad=True)
    b = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)
    kind = "conv1x1" if k == 1 else "conv2d"
    return LayerParams(kind, w, b, stride=stride, padding=padding)


def tconv_params(c_in, c_out, k, stride, padding, rng, dtype=np.float32):
    fan_in = c_in * k * k
    w = Tensor(he_uniform((c_in, c_out, k, k), fan_in, rng, dtype), requires_grad=True)
    b = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)
    return LayerParams("transposed_conv2d", w, b, stride=stride, padding=padding)


def bn_params(channels, dtype=np.float32):
    w = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
    b = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
    return LayerParams(
        "batchnorm2d",
        w,
        b,
        running_mean=np.zeros(channels, dtype=dtype),
        running_var=np.ones(channels, dtype=dtype),
    )


def conv2d(x: Tensor, p: LayerParams) -> Tensor:
    """Strided 2-D correlation with zero padding.

    Output size per axis: (H + 2*pad - k) // stride + 1.
    """
    w, bias = p.weight, p.bias
    b, c_in, h, wd = x.shape
    c_out, c_in_w, kh, kw = w.shape
    if c_in != c_in_w:
        raise ValueError(f"conv2d: input has {c_in} channels, weights expect {c_in_w}")
    if h + 2 * p.padding < kh or wd + 2 * p.padding < kw:
        raise ValueError("conv2d: spatial dims smaller than kernel")
    s, pad = p.stride, p.padding
    oh = kernels.conv_out_size(h, kh, s, pad)
    ow = kernels.conv_out_size(wd, kw, s, pad)

    cols = kernels.im2col(x.data, kh, kw, s, s, pad, pad)  # [B, Cin*k*k, T]
    w2 = w.data.reshape(c_out, c_in * kh * kw)
    out_data = (w2 @ cols).reshape(b, c_out, oh, ow) + bias.data.reshape(1, c_out, 1, 1)

    def backward(g):
        g2 = g.reshape(b, c_out, oh * ow)
        if w.requires_grad:
            gw = np.einsum("bot,bct->oc", g2, cols, optimize=True)
            w._accum(gw.reshape(w.data.shape))
        if bias.requires_grad:
            bias._accum(g2.sum(axis=(0, 2)))
        if x.requires_grad:
            dcols = w2.T @ g2
            x._accum(kernels.col2im(dcols, b, c_in, h, wd, kh, kw, s, s, pad, pad))

    return Tensor._from_op(out_data, (x, w, bias), backward)


def transposed_conv2d(x: Tensor, p: LayerParams) -> Tensor:
    """Transposed (fractionally strided) convolution, the adjoint of conv2d.

    Output size per axis: (H - 1) * stride - 2*pad + k.
    """
    w, bias = p.weight, p.bias
    b, c_in, h, wd = x.shape
    c_in_w, c_out, kh, kw = w.shape
    if c_in != c_in_w:
        raise ValueError(
            f"transposed_conv2d: input has {c_in} channels, weights expect {c_in_w}"
        )
    s, pad = p.stride, p.padding
    oh = kernels.tconv_out_size(h, kh, s, pad)
    ow = kernels.tconv_out_size(wd, kw, s, pad)
    if oh <= 0 or ow <= 0:
        raise ValueError("transposed_conv2d: non-positive output size")

    x2 = x.data.reshape(b, c_in, h * wd)
    w2 = w.data.reshape(c_in, c_out * kh * kw)
    cols = np.matmul(w2.T[None], x2)  # [B, Cout*k*k, H*W]
    out_data = kernels.col2im(cols, b, c_out, oh, ow, kh, kw, s, s, pad, pad)
    out_data = out_data + bias.data.reshape(1, c_out, 1, 1)

    def backward(g):
        dcols = kernels.im2col(g, kh, kw, s, s, pad, pad)  # [B, Cout*k*k, H*W]
        if bias.requires_grad:
            bias._accum(g.sum(axis=(0, 2, 3)))
        if w.requires_grad:
            gw = np.einsum("bct,bjt->cj", x2, dcols, optimize=True)
            w._accum(gw.reshape(w.data.shape))
        if x.requires_grad:
            gx = np.matmul(w2[None], dcols)
            x._accum(gx.reshape(b, c_in, h, wd))

    return Tensor._from_op(out_data, (x, w, bias), backward)


def batchnorm2d(x: Tensor, p: LayerParams, training: bool, update_running=True) -> Tensor:
    """Per-channel batch normalization with affine transform.

    Training mode normalizes with batch statistics and (optionally)
    updates the running buffers; eval mode uses the running buffers.
    """
    c = x.shape[1]
    if c != p.weight.shape[0]:
        raise ValueError(f"batchnorm2d: {c} channels vs {p.weight.shape[0]} parameters")
    gamma = p.weight.reshape(1, c, 1, 1)
    beta = p.bias.reshape(1, c, 1, 1)
    axes = (0, 2, 3)
    if training:
        mu = x.mean(axis=axes, keepdims=True)
        var = ((x - mu) ** 2).mean(axis=axes, keepdims=True)
        xhat = (x - mu) / (var + p.eps).sqrt()
        if update_running:
            n = x.data.shape[0] * x.data.shape[2] * x.data.shape[3]
            unbias = n / max(n - 1, 1)
            m = p.momentum
            p.running_mean *= 1.0 - m
            p.running_mean += m * mu.data.reshape(c).astype(p.running_mean.dtype)
            p.running_var *= 1.0 - m
            p.running_var += m * unbias * var.data.reshape(c).astype(p.running_var.dtype)
    else:
        rm = Tensor(p.running_mean.reshape(1, c, 1, 1).astype(x.dtype))
        rv = Tensor(p.running_var.reshape(1, c, 1, 1).astype(x.dtype))
        xhat = (x - rm) / (rv + p.eps).sqrt()
    return gamma * xhat + beta


def avgpool2d(x: Tensor, k: int, stride: int = 1, padding: int = 0) -> Tensor:
    """Mean over k x k windows; padded windows still divide by k*k."""
    if k < 1:
        raise ValueError("avgpool2d: kernel must be >= 1")
    b, c, h, w = x.shape
    oh = kernels.conv_out_size(h, k, stride, padding)
    ow = kernels.conv_out_size(w, k, stride, padding)
    cols = kernels.im2col(x.data, k, k, stride, stride, padding, padding)
    out_data = cols.reshape(b, c, k * k, oh * ow).mean(axis=2).reshape(b, c, oh, ow)

    def backward(g):
        if not x.requires_grad:
            return
        gcols = np.broadcast_to(
            g.reshape(b, c, 1, oh * ow) / (k * k), (b, c, k * k, oh * ow)
        ).reshape(b, c * k * k, oh * ow)
        x._accum(
            kernels.col2im(
                np.ascontiguousarray(gcols), b, c, h, w, k, k, stride, stride, padding, padding
            )
        )

    return Tensor._from_op(out_data, (x,), backward)
