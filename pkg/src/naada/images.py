"""Single-channel image type and PNG/PGM file handling.

A ``GrayImage`` is a float64 matrix in one of two declared domains:
"gray255" (values in [0, 255], the acquisition domain) or "unit"
(values in [0, 1], the network domain). Conversions are explicit.

Files: 8- and 16-bit single-channel PNG and PGM via Pillow. 16-bit
values are mapped onto the gray255 domain on read (x * 255 / 65535)
and back on write, so the rest of the toolkit only ever sees the two
declared domains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

DOMAIN_GRAY255 = "gray255"
DOMAIN_UNIT = "unit"

_BOUNDS = {DOMAIN_GRAY255: 255.0, DOMAIN_UNIT: 1.0}


class ImageDomainError(ValueError):
    pass


@dataclass
class GrayImage:
    values: np.ndarray  # float64, [H, W]
    domain: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ImageDomainError(f"expected a 2-D matrix, got shape {self.values.shape}")
        if self.domain not in _BOUNDS:
            raise ImageDomainError(f"unknown domain {self.domain!r}")
        if not np.all(np.isfinite(self.values)):
            raise ImageDomainError("non-finite pixel values")
        hi = _BOUNDS[self.domain]
        if self.values.min() < 0.0 or self.values.max() > hi:
            raise ImageDomainError(
                f"values outside [0, {hi:g}] for domain {self.domain!r}"
            )

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    def require(self, domain):
        if self.domain != domain:
            raise ImageDomainError(f"expected domain {domain!r}, got {self.domain!r}")
        return self

    def to_unit(self) -> "GrayImage":
        if self.domain == DOMAIN_UNIT:
            return self
        return GrayImage(self.values / 255.0, DOMAIN_UNIT)

    def to_gray255(self) -> "GrayImage":
        if self.domain == DOMAIN_GRAY255:
            return self
        return GrayImage(self.values * 255.0, DOMAIN_GRAY255)

    def mirrored(self) -> "GrayImage":
        return GrayImage(self.values[:, ::-1].copy(), self.domain)


def read_gray(path) -> GrayImage:
    """Read an 8- or 16-bit single-channel PNG/PGM into the gray255 domain."""
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.float64)
            if arr.max() > 255.0 or im.mode != "I":
                arr = arr * (255.0 / 65535.0)
        elif im.mode == "L":
            arr = np.asarray(im, dtype=np.float64)
        else:
            arr = np.asarray(im.convert("L"), dtype=np.float64)
    return GrayImage(np.clip(arr, 0.0, 255.0), DOMAIN_GRAY255)


def write_gray(img: GrayImage, path, bit_depth: int = 8):
    """Write to PNG or PGM (by extension) at the requested bit depth."""
    g = img.to_gray255().values
    path = str(path)
    if bit_depth == 8:
        data = np.clip(np.rint(g), 0, 255).astype(np.uint8)
        Image.fromarray(data, mode="L").save(path)
    elif bit_depth == 16:
        data = np.clip(np.rint(g * (65535.0 / 255.0)), 0, 65535).astype("<u2")
        Image.fromarray(data).save(path)  # uint16 -> 16-bit grayscale
    else:
        raise ValueError(f"unsupported bit depth {bit_depth}")
