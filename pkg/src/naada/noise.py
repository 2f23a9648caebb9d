"""Sequential radiographic noise synthesis.

Five stages degrade a clean gray255 radiograph into a unit-domain noisy
one, deterministically under a seed:

  quantum      gray -> intensity I = 10^(-X/c), photon counts
               Poisson(rho * I), back to gray X' = -c*log10(count/rho)
  poisson      X'' = Poisson(X') elementwise (rate = gray value)
  (normalize to [0, 1] by 1/255)
  gaussian     additive N(0, sigma_g^2); sigma_g either fixed or drawn
               once per image from U(0, sigma_g_max)
  speckle      multiplicative x + x * N(0, sigma_s^2)
  salt_pepper  exactly round(fraction * N) distinct sites, floor(n/2)
               set to 1.0 (salt), the rest to 0.0 (pepper)

The quantum and poisson stages operate in the gray255 domain where the
intensity transform is meaningful; the remaining stages operate in the
unit domain. Values are clamped to the valid range after every stage.
Zero photon counts are floored at 1 before the log, i.e. gray clamps at
the no-signal limit c*log10(rho).

The prose ordering (speckle, then impulse) is the default; the
alternative nesting with impulse before speckle is a config switch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from naada.images import DOMAIN_GRAY255, DOMAIN_UNIT, GrayImage

ALL_STAGES = ("quantum", "poisson", "gaussian", "speckle", "salt_pepper")


@dataclass
class NoiseConfig:
    c: float = 50.0  # exposure constant
    rho: float = 200.0  # photon scaling, "a few hundreds"
    sigma_g: float | None = None  # None: draw once per image from U(0, sigma_g_max)
    sigma_g_max: float = 0.35
    sigma_s: float = 0.1
    sp_fraction: float = 0.05
    seed: int = 0
    stages: tuple = ALL_STAGES
    impulse_before_speckle: bool = False

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.rho < 1:
            raise ValueError("rho must be >= 1")
        if (self.sigma_g is not None and self.sigma_g < 0) or self.sigma_g_max < 0:
            raise ValueError("sigma_g must be >= 0")
        if self.sigma_s < 0:
            raise ValueError("sigma_s must be >= 0")
        if not 0.0 <= self.sp_fraction <= 1.0:
            raise ValueError("sp_fraction must be in [0, 1]")
        unknown = set(self.stages) - set(ALL_STAGES)
        if unknown:
            raise ValueError(f"unknown stages {sorted(unknown)}")


@dataclass
class AppliedParams:
    """Concrete parameters sampled for one image, for reproducibility."""

    RECORD_FIELDS: ClassVar[tuple] = (
        "seed", "c", "rho", "sigma_g", "sigma_s", "sp_fraction", "n_salt", "n_pepper"
    )

    seed: int
    c: float
    rho: float
    sigma_g: float
    sigma_s: float
    sp_fraction: float
    n_salt: int = 0
    n_pepper: int = 0
    stages: tuple = ALL_STAGES

    def record(self):
        """One sidecar text record: space-separated key=value pairs."""
        parts = [f"{k}={getattr(self, k)}" for k in self.RECORD_FIELDS]
        parts.append("stages=" + ",".join(self.stages))
        return " ".join(parts)


def gray_to_intensity(x: GrayImage, c: float) -> np.ndarray:
    """Eq. gray -> intensity: I = 10^(-X/c), in (0, 1] for X in [0, 255]."""
    x.require(DOMAIN_GRAY255)
    return np.power(10.0, -x.values / c)


def quantum_noise(x: GrayImage, c: float, rho: float, rng) -> GrayImage:
    """Photon-count noise: Poisson counts at rate rho * I, mapped back to gray."""
    intensity = gray_to_intensity(x, c)
    counts = rng.poisson(rho * intensity).astype(np.float64)
    np.maximum(counts, 1.0, out=counts)  # no-signal limit: gray clamps at c*log10(rho)
    gray = -c * np.log10(counts / rho)
    return GrayImage(np.clip(gray, 0.0, 255.0), DOMAIN_GRAY255)


def gray_poisson(x: GrayImage, rng) -> GrayImage:
    """Poisson redraw with the gray value itself as the rate."""
    x.require(DOMAIN_GRAY255)
    noisy = rng.poisson(x.values).astype(np.float64)
    return GrayImage(np.clip(noisy, 0.0, 255.0), DOMAIN_GRAY255)


def awgn_unclamped(values: np.ndarray, sigma_g: float, rng) -> np.ndarray:
    """Pre-clamp additive noise field; may leave [0, 1]."""
    if sigma_g == 0.0:
        return values.copy()
    return values + rng.normal(0.0, sigma_g, size=values.shape)


def awgn(x: GrayImage, sigma_g: float, rng) -> GrayImage:
    """Additive zero-mean Gaussian noise in the unit domain, clamped."""
    x.require(DOMAIN_UNIT)
    if sigma_g == 0.0:
        return x
    return GrayImage(np.clip(awgn_unclamped(x.values, sigma_g, rng), 0.0, 1.0), DOMAIN_UNIT)


def speckle_unclamped(values: np.ndarray, sigma_s: float, rng) -> np.ndarray:
    """Pre-clamp multiplicative noise: x + x * N(0, sigma_s^2)."""
    if sigma_s == 0.0:
        return values.copy()
    return values + values * rng.normal(0.0, sigma_s, size=values.shape)


def speckle(x: GrayImage, sigma_s: float, rng) -> GrayImage:
    """Multiplicative speckle noise in the unit domain, clamped."""
    x.require(DOMAIN_UNIT)
    if sigma_s == 0.0:
        return x
    return GrayImage(np.clip(speckle_unclamped(x.values, sigma_s, rng), 0.0, 1.0), DOMAIN_UNIT)


def salt_pepper(x: GrayImage, fraction: float, rng):
    """Impulse noise on exactly round(fraction * N) distinct sites.

    floor(n/2) sites become salt (1.0), the remainder pepper (0.0).
    Returns (image, n_salt, n_pepper).
    """
    x.require(DOMAIN_UNIT)
    n_pixels = x.values.size
    n = int(np.rint(fraction * n_pixels))
    if n == 0:
        return x, 0, 0
    flat = x.values.copy().reshape(-1)
    sites = rng.choice(n_pixels, size=n, replace=False)
    n_salt = n // 2
    flat[sites[:n_salt]] = 1.0
    flat[sites[n_salt:]] = 0.0
    return GrayImage(flat.reshape(x.values.shape), DOMAIN_UNIT), n_salt, n - n_salt


def synthesize_noise(x: GrayImage, cfg: NoiseConfig, seed: int | None = None):
    """Run the full pipeline on a clean gray255 radiograph.

    Returns (noisy unit-domain image, AppliedParams). ``seed`` overrides
    cfg.seed for per-image streams. The random draws happen in a fixed
    stage order regardless of which stages are enabled, except that the
    per-image sigma_g draw always comes first.
    """
    x.require(DOMAIN_GRAY255)
    used_seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(used_seed)

    if cfg.sigma_g is None:
        sigma_g = float(rng.uniform(0.0, cfg.sigma_g_max))
    else:
        sigma_g = cfg.sigma_g

    img = x
    if "quantum" in cfg.stages:
        img = quantum_noise(img, cfg.c, cfg.rho, rng)
    if "poisson" in cfg.stages:
        img = gray_poisson(img, rng)
    img = img.to_unit()

    if "gaussian" in cfg.stages:
        img = awgn(img, sigma_g, rng)

    n_salt = n_pepper = 0
    tail = ("salt_pepper", "speckle") if cfg.impulse_before_speckle else ("speckle", "salt_pepper")
    for stage in tail:
        if stage not in cfg.stages:
            continue
        if stage == "speckle":
            img = speckle(img, cfg.sigma_s, rng)
        else:
            img, n_salt, n_pepper = salt_pepper(img, cfg.sp_fraction, rng)

    params = AppliedParams(
        seed=used_seed,
        c=cfg.c,
        rho=cfg.rho,
        sigma_g=sigma_g,
        sigma_s=cfg.sigma_s,
        sp_fraction=cfg.sp_fraction,
        n_salt=n_salt,
        n_pepper=n_pepper,
        stages=cfg.stages,
    )
    return img, params
