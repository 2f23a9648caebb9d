"""Procedural panoramic-radiograph-like phantoms.

Purely synthetic stand-ins for real radiographs, used by the test suite
and by the demo-data CLI path so the whole pipeline can be exercised
without any clinical data. Each phantom has the gross structure of a
panoramic view: dark air background, a bright curved arch of "bone",
periodic tooth-like blocks along the arch, a few elliptical opacities
and a smooth illumination field, lightly blurred.
"""

from __future__ import annotations

import numpy as np

from naada.images import DOMAIN_GRAY255, GrayImage


def _box_blur(a: np.ndarray, k: int) -> np.ndarray:
    """Separable box blur via cumulative sums, edge-padded."""
    if k <= 1:
        return a
    pad = k // 2
    for axis in (0, 1):
        ap = np.concatenate(
            [np.repeat(a.take([0], axis=axis), pad, axis=axis), a,
             np.repeat(a.take([-1], axis=axis), pad, axis=axis)],
            axis=axis,
        )
        cs = np.cumsum(ap, axis=axis)
        zero = np.zeros_like(cs.take([0], axis=axis))
        cs = np.concatenate([zero, cs], axis=axis)
        n = a.shape[axis]
        a = (cs.take(range(k, k + n), axis=axis) - cs.take(range(n), axis=axis)) / k
    return a


def synth_radiograph(height: int, width: int, seed: int = 0) -> GrayImage:
    """One deterministic phantom in the gray255 domain."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    u = xx / max(width - 1, 1)  # 0..1 across
    v = yy / max(height - 1, 1)

    img = np.full((height, width), 20.0)

    # curved arch of bright bone, thicker near the middle
    arch_center = 0.55 + 0.18 * np.cos((u - 0.5) * np.pi) + 0.02 * np.sin(
        2 * np.pi * u * rng.uniform(1.5, 3.0)
    )
    arch_half = 0.10 + 0.05 * np.cos((u - 0.5) * np.pi)
    in_arch = np.abs(v - arch_center) < arch_half
    depth = 1.0 - np.abs(v - arch_center) / np.maximum(arch_half, 1e-9)
    img += in_arch * (75.0 + 45.0 * depth)

    # periodic tooth-like blocks straddling the arch centerline
    n_teeth = rng.integers(8, 14)
    phase = rng.uniform(0, 2 * np.pi)
    teeth = 0.5 * (1 + np.cos(2 * np.pi * n_teeth * u + phase)) > 0.55
    near_line = np.abs(v - arch_center) < 0.65 * arch_half
    img += (teeth & near_line) * rng.uniform(25.0, 40.0)

    # a few elliptical opacities (condyles, sinus walls)
    for _ in range(int(rng.integers(2, 5))):
        cy, cx = rng.uniform(0.2, 0.8), rng.uniform(0.1, 0.9)
        ry, rx = rng.uniform(0.04, 0.12), rng.uniform(0.03, 0.10)
        blob = ((v - cy) / ry) ** 2 + ((u - cx) / rx) ** 2 < 1.0
        img += blob * rng.uniform(15.0, 35.0)

    # smooth illumination falloff toward the borders
    img *= 0.85 + 0.15 * np.sin(np.pi * u) * np.sin(np.pi * np.clip(v * 1.2, 0, 1))

    img = _box_blur(img, max(3, min(height, width) // 40))
    img += rng.normal(0.0, 1.5, size=img.shape)  # faint texture
    return GrayImage(np.clip(img, 0.0, 255.0), DOMAIN_GRAY255)


def phantom_corpus(n: int, height: int, width: int, seed: int = 0):
    """List of ``n`` phantoms with per-image seeds derived from ``seed``."""
    base = np.random.SeedSequence(seed).generate_state(n, np.uint32)
    return [synth_radiograph(height, width, int(s)) for s in base]
