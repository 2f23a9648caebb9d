"""Encoder / attention-bottleneck / decoder assembly of the denoiser.

Encoder: five conv stages (conv -> batchnorm -> ReLU). Stage 1 is a 3x3
stride-1 layer; stages 2-4 are 4x4 stride-2 layers that walk the
resolution schedule down; stage 5 is another 3x3 stride-1 layer that
widens to the bottleneck depth. The decoder mirrors this with
transposed convolutions and ends in a sigmoid, so outputs live in
(0, 1). Skip connections add each encoder stage output onto the
decoder activation of identical shape.

At the default 224 patch the resolution schedule is 224 -> 114 -> 60 ->
32 and the derived stride-2 paddings are {3, 4, 3} (decoder {3, 4, 3}
mirrored); those are the only paddings reproducing that schedule. Other
patch sizes (divisible by 8) use exact halving with padding 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from naada.attention import (
    MODE_NOISE_AWARE,
    MODE_STANDARD,
    AttentionConfig,
    AttentionParams,
    attention_block,
    init_attention,
)
from naada.layers import (
    LayerParams,
    batchnorm2d,
    bn_params,
    conv2d,
    conv_params,
    tconv_params,
    transposed_conv2d,
)
from naada.tensor import Tensor

BASE_CHANNELS = (64, 128, 256, 512, 1024)
MIN_CHANNELS = 8


@dataclass(frozen=True)
class NetworkSpec:
    channels: tuple = BASE_CHANNELS
    width_mult: float = 1.0
    patch: int = 224
    heads: int = 8
    attention_mode: str = MODE_NOISE_AWARE
    gamma_init: float = 0.0
    skip_mode: str = "add"  # add | none

    def __post_init__(self):
        if any(a >= b for a, b in zip(self.channels, self.channels[1:])):
            raise ValueError("channel schedule must be strictly increasing")
        if len(self.channels) != 5:
            raise ValueError("expected a five-stage channel schedule")
        if self.patch != 224 and self.patch % 8 != 0:
            raise ValueError("patch size must be 224 or divisible by 8")
        if self.skip_mode not in ("add", "none"):
            raise ValueError(f"unknown skip mode {self.skip_mode!r}")
        # validates mode/head divisibility early
        AttentionConfig(self.scaled_channels()[-1], self.heads, self.attention_mode)

    def scaled_channels(self):
        return tuple(max(MIN_CHANNELS, round(c * self.width_mult)) for c in self.channels)

    def resolutions(self):
        """Spatial size after each encoder stage (stage 5 keeps stage 4's)."""
        p = self.patch
        if p == 224:
            return (224, 114, 60, 32, 32)
        return (p, p // 2, p // 4, p // 8, p // 8)

    def encoder_paddings(self):
        res = self.resolutions()
        pads = [1]  # 3x3 stride-1 stage
        for r_in, r_out in zip(res[:3], res[1:4]):
            pad = r_out - r_in // 2 + 1  # from (r_in + 2p - 4)//2 + 1 == r_out
            if pad < 0 or (r_in + 2 * pad - 4) // 2 + 1 != r_out:
                raise ValueError(f"no valid padding for {r_in} -> {r_out}")
            pads.append(pad)
        pads.append(1)
        return tuple(pads)

    def decoder_paddings(self):
        res = self.resolutions()
        pads = [1]
        for r_in, r_out in zip(res[3:0:-1], res[2::-1]):
            pad = r_in + 1 - r_out // 2  # from (r_in - 1)*2 - 2p + 4 == r_out
            if pad < 0 or (r_in - 1) * 2 - 2 * pad + 4 != r_out:
                raise ValueError(f"no valid padding for {r_in} -> {r_out}")
            pads.append(pad)
        pads.append(1)
        return tuple(pads)

    def attention_config(self):
        return AttentionConfig(
            channels=self.scaled_channels()[-1],
            heads=self.heads,
            mode=self.attention_mode,
            gamma_init=self.gamma_init,
        )

    def to_dict(self):
        return {
            "channels": list(self.channels),
            "width_mult": self.width_mult,
            "patch": self.patch,
            "heads": self.heads,
            "attention_mode": self.attention_mode,
            "gamma_init": self.gamma_init,
            "skip_mode": self.skip_mode,
        }

    @staticmethod
    def from_dict(d):
        d = dict(d)
        d["channels"] = tuple(d["channels"])
        return NetworkSpec(**d)


@dataclass
class NetworkState:
    spec: NetworkSpec
    encoder: list  # five (conv, bn) pairs
    attention: AttentionParams
    decoder: list  # four (tconv, bn) pairs plus a final bare tconv
    training: bool = True
    update_running: bool = True  # freeze batchnorm buffers for pure-function checks
    extra: dict = field(default_factory=dict)

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def named_parameters(self):
        named = {}
        for i, (conv, bn) in enumerate(self.encoder, start=1):
            named[f"enc{i}.conv.weight"] = conv.weight
            named[f"enc{i}.conv.bias"] = conv.bias
            named[f"enc{i}.bn.weight"] = bn.weight
            named[f"enc{i}.bn.bias"] = bn.bias
        named.update(self.attention.trainable())
        for i, stage in enumerate(self.decoder, start=1):
            if isinstance(stage, tuple):
                tconv, bn = stage
                named[f"dec{i}.tconv.weight"] = tconv.weight
                named[f"dec{i}.tconv.bias"] = tconv.bias
                named[f"dec{i}.bn.weight"] = bn.weight
                named[f"dec{i}.bn.bias"] = bn.bias
            else:
                named[f"dec{i}.tconv.weight"] = stage.weight
                named[f"dec{i}.tconv.bias"] = stage.bias
        return named

    def named_buffers(self):
        buffers = {}
        for i, (_, bn) in enumerate(self.encoder, start=1):
            buffers[f"enc{i}.bn.running_mean"] = bn.running_mean
            buffers[f"enc{i}.bn.running_var"] = bn.running_var
        for i, stage in enumerate(self.decoder, start=1):
            if isinstance(stage, tuple):
                buffers[f"dec{i}.bn.running_mean"] = stage[1].running_mean
                buffers[f"dec{i}.bn.running_var"] = stage[1].running_var
        return buffers

    def zero_grad(self):
        for t in self.named_parameters().values():
            t.zero_grad()

    def n_parameters(self):
        return sum(t.size for t in self.named_parameters().values())


def init_network(spec: NetworkSpec, seed: int = 0, dtype=np.float32) -> NetworkState:
    rng = np.random.default_rng(seed)
    chans = spec.scaled_channels()
    enc_pads = spec.encoder_paddings()
    dec_pads = spec.decoder_paddings()

    encoder = []
    c_prev = 1
    for i, c in enumerate(chans):
        k, s = (3, 1) if i in (0, 4) else (4, 2)
        encoder.append(
            (conv_params(c_prev, c, k, s, enc_pads[i], rng, dtype), bn_params(c, dtype))
        )
        c_prev = c

    attention = init_attention(spec.attention_config(), rng, dtype)

    decoder = []
    rev = chans[::-1]  # e.g. 1024, 512, 256, 128, 64
    for i in range(4):
        k, s = (3, 1) if i == 0 else (4, 2)
        decoder.append(
            (tconv_params(rev[i], rev[i + 1], k, s, dec_pads[i], rng, dtype), bn_params(rev[i + 1], dtype))
        )
    decoder.append(tconv_params(rev[4], 1, 3, 1, dec_pads[4], rng, dtype))

    return NetworkState(spec=spec, encoder=encoder, attention=attention, decoder=decoder)


def encode(y: Tensor, state: NetworkState):
    """Run the encoder; returns (bottleneck, per-stage skip activations)."""
    spec = state.spec
    if y.ndim != 4 or y.shape[1] != 1:
        raise ValueError(f"encoder expects [B,1,H,W], got {y.shape}")
    if y.shape[2] != spec.patch or y.shape[3] != spec.patch:
        raise ValueError(f"encoder expects {spec.patch}x{spec.patch} input, got {y.shape}")
    x = y
    skips = []
    for conv, bn in state.encoder:
        x = batchnorm2d(conv2d(x, conv), bn, state.training, state.update_running).relu()
        skips.append(x)
    return x, skips[:4]


def decode(f: Tensor, skips, state: NetworkState) -> Tensor:
    """Run the decoder over the bottleneck features plus skip activations."""
    use_skips = state.spec.skip_mode == "add" and skips is not None
    x = f
    for i, stage in enumerate(state.decoder):
        if isinstance(stage, tuple):
            tconv, bn = stage
            x = batchnorm2d(
                transposed_conv2d(x, tconv), bn, state.training, state.update_running
            ).relu()
            if use_skips:
                skip = skips[3 - i]
                if skip.shape != x.shape:
                    raise ValueError(f"skip shape {skip.shape} != decoder shape {x.shape}")
                x = x + skip
        else:
            x = transposed_conv2d(x, stage).sigmoid()
    return x


def forward(y: Tensor, state: NetworkState) -> Tensor:
    """Full denoising pass: encode, attend at the bottleneck, decode."""
    bottleneck, skips = encode(y, state)
    attended = attention_block(bottleneck, state.attention, state.spec.attention_config())
    return decode(attended, skips, state)


def to_mode(state: NetworkState, mode: str) -> NetworkState:
    """View of ``state`` with the attention mode switched, weights shared.

    Switching noise_aware -> standard detaches the noise-query path;
    the reverse requires noise-query parameters to exist already.
    """
    if mode == state.spec.attention_mode:
        return state
    if mode == MODE_NOISE_AWARE and state.attention.noise_q_proj is None:
        raise ValueError("state has no noise-query parameters to re-enable")
    spec = replace(state.spec, attention_mode=mode)
    attention = state.attention
    if mode == MODE_STANDARD:
        attention = AttentionParams(
            q_proj=attention.q_proj,
            k_proj=attention.k_proj,
            v_proj=attention.v_proj,
            out_proj=attention.out_proj,
        )
    return NetworkState(
        spec=spec,
        encoder=state.encoder,
        attention=attention,
        decoder=state.decoder,
        training=state.training,
        update_running=state.update_running,
    )


def summary(spec: NetworkSpec) -> str:
    """Layer table: name, operation, weight shape, output shape, params."""
    chans = spec.scaled_channels()
    res = spec.resolutions()
    enc_pads = spec.encoder_paddings()
    dec_pads = spec.decoder_paddings()
    rows = [("layer", "op", "weights", "output", "params")]
    n_total = 0

    def add(name, op, wshape, out, n):
        nonlocal n_total
        n_total += n
        rows.append((name, op, str(list(wshape)), str(list(out)), f"{n:,}"))

    c_prev = 1
    for i, c in enumerate(chans):
        k, s = (3, 1) if i in (0, 4) else (4, 2)
        add(f"enc{i+1}", f"conv {k}x{k}/s{s}/p{enc_pads[i]} +bn +relu", (c, c_prev, k, k),
            ("B", c, res[i], res[i]), c * c_prev * k * k + c + 2 * c)
        c_prev = c

    m = chans[-1]
    n_attn = 4 * (m * m + m)  # q, k, v, out projections
    label = "standard"
    if spec.attention_mode == MODE_NOISE_AWARE:
        n_attn += m * m + m + 1  # noise query and gamma
        label = "noise_aware"
    add("attn", f"{label} mhsa h={spec.heads}", (m, m, 1, 1), ("B", m, res[4], res[4]), n_attn)

    rev = chans[::-1]
    dec_res = (res[4], res[2], res[1], res[0], res[0])
    for i in range(4):
        k, s = (3, 1) if i == 0 else (4, 2)
        skip = " +skip" if spec.skip_mode == "add" else ""
        add(f"dec{i+1}", f"tconv {k}x{k}/s{s}/p{dec_pads[i]} +bn +relu{skip}",
            (rev[i], rev[i + 1], k, k), ("B", rev[i + 1], dec_res[i], dec_res[i]),
            rev[i] * rev[i + 1] * k * k + rev[i + 1] + 2 * rev[i + 1])
    add("dec5", f"tconv 3x3/s1/p{dec_pads[4]} +sigmoid", (rev[4], 1, 3, 3),
        ("B", 1, res[0], res[0]), rev[4] * 9 + 1)

    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = ["  ".join(r[i].ljust(widths[i]) for i in range(5)) for r in rows]
    lines.append(f"total trainable parameters: {n_total:,}")
    return "\n".join(lines)
