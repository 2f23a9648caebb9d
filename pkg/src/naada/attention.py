"""Multi-head self-attention over bottleneck feature maps.

Two modes share one core:

  standard     A = softmax(Q^T K / sqrt(M'))              applied to V
  noise_aware  A = softmax((Q^T K + g * Qn^T K) / sqrt(M')) applied to V

where Q, K, V are 1x1-convolution projections of the feature map, Qn is
the same kind of projection of its noise map, and g is a learnable
scalar mixing the noise scores in. Tokens are the flattened spatial
positions; channels are split evenly across heads. Head outputs are
concatenated back along channels, passed through a 1x1 output
projection and residual-added to the input, so a zero-initialized g
makes the noise-aware block start as a plain attention block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from naada.layers import LayerParams, conv2d, conv_params
from naada.noisemap import noise_map
from naada.tensor import Tensor

MODE_STANDARD = "standard"
MODE_NOISE_AWARE = "noise_aware"


@dataclass
class AttentionConfig:
    channels: int
    heads: int = 8
    mode: str = MODE_NOISE_AWARE
    gamma_init: float = 0.0

    def __post_init__(self):
        if self.channels % self.heads != 0:
            raise ValueError(
                f"channels ({self.channels}) must be divisible by heads ({self.heads})"
            )
        if self.mode not in (MODE_STANDARD, MODE_NOISE_AWARE):
            raise ValueError(f"unknown attention mode {self.mode!r}")

    @property
    def head_dim(self):
        return self.channels // self.heads


@dataclass
class AttentionParams:
    q_proj: LayerParams
    k_proj: LayerParams
    v_proj: LayerParams
    out_proj: LayerParams
    noise_q_proj: LayerParams | None = None
    gamma: Tensor | None = None

    def trainable(self):
        named = {
            "attn.q_proj.weight": self.q_proj.weight,
            "attn.q_proj.bias": self.q_proj.bias,
            "attn.k_proj.weight": self.k_proj.weight,
            "attn.k_proj.bias": self.k_proj.bias,
            "attn.v_proj.weight": self.v_proj.weight,
            "attn.v_proj.bias": self.v_proj.bias,
            "attn.out_proj.weight": self.out_proj.weight,
            "attn.out_proj.bias": self.out_proj.bias,
        }
        if self.noise_q_proj is not None:
            named["attn.noise_q_proj.weight"] = self.noise_q_proj.weight
            named["attn.noise_q_proj.bias"] = self.noise_q_proj.bias
        if self.gamma is not None:
            named["attn.gamma"] = self.gamma
        return named


def init_attention(cfg: AttentionConfig, rng, dtype=np.float32) -> AttentionParams:
    m = cfg.channels
    p = AttentionParams(
        q_proj=conv_params(m, m, 1, 1, 0, rng, dtype),
        k_proj=conv_params(m, m, 1, 1, 0, rng, dtype),
        v_proj=conv_params(m, m, 1, 1, 0, rng, dtype),
        out_proj=conv_params(m, m, 1, 1, 0, rng, dtype),
    )
    if cfg.mode == MODE_NOISE_AWARE:
        p.noise_q_proj = conv_params(m, m, 1, 1, 0, rng, dtype)
        p.gamma = Tensor(np.asarray(cfg.gamma_init, dtype=dtype), requires_grad=True)
    return p


def _split_heads(t: Tensor, heads: int):
    """[B,M,H,W] -> [B,h,T,M'] with T = H*W tokens."""
    b, m, h, w = t.shape
    return t.reshape(b, heads, m // heads, h * w).transpose(0, 1, 3, 2)


def _attention_core(z: Tensor, p: AttentionParams, cfg: AttentionConfig, psi: Tensor | None):
    b, m, h, w = z.shape
    if m != cfg.channels:
        raise ValueError(f"attention: {m} channels vs config {cfg.channels}")
    scale = 1.0 / math.sqrt(cfg.head_dim)

    q = _split_heads(conv2d(z, p.q_proj), cfg.heads)  # [B,h,T,M']
    k = _split_heads(conv2d(z, p.k_proj), cfg.heads)
    v = _split_heads(conv2d(z, p.v_proj), cfg.heads)

    scores = (q @ k.transpose(0, 1, 3, 2)) * scale  # [B,h,T,T]
    if psi is not None:
        if psi.shape != z.shape:
            raise ValueError(f"noise map shape {psi.shape} != feature shape {z.shape}")
        qn = _split_heads(conv2d(psi, p.noise_q_proj), cfg.heads)
        scores = scores + p.gamma * ((qn @ k.transpose(0, 1, 3, 2)) * scale)

    attn = scores.softmax(axis=-1)
    out = attn @ v  # [B,h,T,M']
    out = out.transpose(0, 1, 3, 2).reshape(b, m, h, w)
    return z + conv2d(out, p.out_proj)


def standard_attention(z: Tensor, p: AttentionParams, cfg: AttentionConfig) -> Tensor:
    """Plain multi-head self-attention with residual output."""
    return _attention_core(z, p, cfg, psi=None)


def nasa_attention(z: Tensor, psi: Tensor, p: AttentionParams, cfg: AttentionConfig) -> Tensor:
    """Noise-aware attention; ``psi`` is the noise map of ``z``."""
    if p.noise_q_proj is None or p.gamma is None:
        raise ValueError("nasa_attention requires noise-query parameters")
    return _attention_core(z, p, cfg, psi=psi)


def attention_block(z: Tensor, p: AttentionParams, cfg: AttentionConfig) -> Tensor:
    """Mode dispatch used by the network bottleneck."""
    if cfg.mode == MODE_NOISE_AWARE:
        return nasa_attention(z, noise_map(z), p, cfg)
    return standard_attention(z, p, cfg)


def attention_score_matrices(z: Tensor, p: AttentionParams, cfg: AttentionConfig):
    """Pre- and post-softmax score matrices for debugging dumps.

    Returns (scores, attn) as numpy arrays of shape [B, h, T, T], using
    the mode and noise path configured in ``cfg``.
    """
    b, m, h, w = z.shape
    scale = 1.0 / math.sqrt(cfg.head_dim)
    q = _split_heads(conv2d(z, p.q_proj), cfg.heads)
    k = _split_heads(conv2d(z, p.k_proj), cfg.heads)
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    if cfg.mode == MODE_NOISE_AWARE:
        qn = _split_heads(conv2d(noise_map(z), p.noise_q_proj), cfg.heads)
        scores = scores + p.gamma * ((qn @ k.transpose(0, 1, 3, 2)) * scale)
    return scores.data, scores.softmax(axis=-1).data
