"""Dataset preparation and patch-based image handling.

Corpus building mirrors every source image horizontally (doubling the
sample count), assigns 70/15/15 train/val/test splits by *source* image
so a mirror pair never straddles splits, and synthesizes the noisy
counterpart of every record from a per-record seed. The manifest is a
line-delimited text file with a fixed field order:

    path<TAB>split<TAB>mirror<TAB>seed<TAB>sigma_g

Patching covers an image with overlapping fixed-size patches whose
anchors are spread evenly from edge to edge. At the canonical
1424x2668 panoramic resolution with 224 patches and the default nominal
strides (200 rows, 203 cols) this yields exactly 7 x 13 = 91 patches.
Reassembly averages overlapping contributions with uniform weights and
inverts extraction exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from naada.images import GrayImage, read_gray, write_gray
from naada.noise import NoiseConfig, synthesize_noise

DEFAULT_ROW_STRIDE = 200
DEFAULT_COL_STRIDE = 203
SPLITS = ("train", "val", "test")


class DataError(ValueError):
    pass


def _axis_anchors(dim: int, patch: int, stride: int):
    """Evenly spread anchor offsets, first at 0, last flush at dim - patch.

    The anchor count comes from the nominal stride; it is raised when
    needed so that no gap between consecutive anchors exceeds the patch
    size (full coverage for any image dimension).
    """
    span = dim - patch
    if span < 0:
        raise DataError(f"image dimension {dim} smaller than patch {patch}")
    if span == 0:
        return (0,)
    n = span // stride + 1
    n = max(n, -(-span // patch) + 1)
    return tuple(int(round(i * span / (n - 1))) for i in range(n))


@dataclass(frozen=True)
class PatchGrid:
    height: int
    width: int
    patch: int
    row_anchors: tuple
    col_anchors: tuple

    @property
    def n_patches(self):
        return len(self.row_anchors) * len(self.col_anchors)

    def offsets(self):
        for r in self.row_anchors:
            for c in self.col_anchors:
                yield r, c


def make_grid(height: int, width: int, patch: int = 224,
              row_stride: int = DEFAULT_ROW_STRIDE,
              col_stride: int = DEFAULT_COL_STRIDE) -> PatchGrid:
    return PatchGrid(
        height=height,
        width=width,
        patch=patch,
        row_anchors=_axis_anchors(height, patch, row_stride),
        col_anchors=_axis_anchors(width, patch, col_stride),
    )


def extract_patches(img: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """[H,W] -> [N, patch, patch] in grid offset order."""
    if img.shape != (grid.height, grid.width):
        raise DataError(f"image shape {img.shape} != grid {(grid.height, grid.width)}")
    p = grid.patch
    out = np.empty((grid.n_patches, p, p), dtype=img.dtype)
    for i, (r, c) in enumerate(grid.offsets()):
        out[i] = img[r : r + p, c : c + p]
    return out


def coverage_counts(grid: PatchGrid) -> np.ndarray:
    """How many patches cover each pixel; >= 1 everywhere by construction."""
    counts = np.zeros((grid.height, grid.width), dtype=np.int64)
    p = grid.patch
    for r, c in grid.offsets():
        counts[r : r + p, c : c + p] += 1
    return counts


def reassemble(patches: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """Average overlapping patches back into a full [H,W] image."""
    if patches.shape[0] != grid.n_patches:
        raise DataError(f"{patches.shape[0]} patches != grid count {grid.n_patches}")
    p = grid.patch
    acc = np.zeros((grid.height, grid.width), dtype=np.float64)
    for i, (r, c) in enumerate(grid.offsets()):
        acc[r : r + p, c : c + p] += patches[i]
    return acc / coverage_counts(grid)


@dataclass
class ManifestRecord:
    path: str
    split: str
    mirror: bool
    seed: int
    sigma_g: float

    def line(self):
        return f"{self.path}\t{self.split}\t{int(self.mirror)}\t{self.seed}\t{self.sigma_g!r}"

    @staticmethod
    def parse(line: str) -> "ManifestRecord":
        path, split, mirror, seed, sigma_g = line.rstrip("\n").split("\t")
        return ManifestRecord(path, split, bool(int(mirror)), int(seed), float(sigma_g))


def write_manifest(records, path):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.line() + "\n")


def read_manifest(path):
    with open(path) as fh:
        return [ManifestRecord.parse(line) for line in fh if line.strip()]


def split_counts(n: int, fractions=(0.70, 0.15, 0.15)):
    """Source-image counts per split; train and val round, test absorbs."""
    n_train = int(np.rint(fractions[0] * n))
    n_val = int(np.rint(fractions[1] * n))
    return n_train, n_val, n - n_train - n_val


def assign_splits(names, seed: int, fractions=(0.70, 0.15, 0.15)):
    """Seeded shuffle of source names -> {name: split}."""
    names = sorted(names)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(names))
    n_train, n_val, _ = split_counts(len(names), fractions)
    assignment = {}
    for rank, idx in enumerate(order):
        if rank < n_train:
            split = "train"
        elif rank < n_train + n_val:
            split = "val"
        else:
            split = "test"
        assignment[names[idx]] = split
    return assignment


def record_seed(master_seed: int, index: int) -> int:
    """Stable per-record noise seed derived from the run seed."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint64)[0])


def build_dataset(src_dir, out_dir, cfg: NoiseConfig, seed: int,
                  fractions=(0.70, 0.15, 0.15), warn=None):
    """Mirror, split and noise a source corpus; returns the manifest records.

    Produces out_dir/clean/<stem>[_m].png, out_dir/noisy/<stem>[_m].png
    and out_dir/manifest.tsv. Unreadable files are skipped with a
    warning (via ``warn`` when given).
    """
    src_dir, out_dir = str(src_dir), str(out_dir)
    names = sorted(
        f for f in os.listdir(src_dir)
        if f.lower().endswith((".png", ".pgm"))
    )
    if not names:
        raise DataError(f"no PNG/PGM images found in {src_dir}")

    sources = {}
    for name in names:
        try:
            sources[name] = read_gray(os.path.join(src_dir, name))
        except Exception as exc:  # corrupt file: skip, keep building
            if warn:
                warn(f"skipping unreadable image {name}: {exc}")
    if not sources:
        raise DataError(f"no readable images in {src_dir}")

    assignment = assign_splits(sources.keys(), seed, fractions)
    clean_dir = os.path.join(out_dir, "clean")
    noisy_dir = os.path.join(out_dir, "noisy")
    os.makedirs(clean_dir, exist_ok=True)
    os.makedirs(noisy_dir, exist_ok=True)

    records = []
    index = 0
    for name in sorted(sources):
        split = assignment[name]
        stem = os.path.splitext(name)[0]
        for mirror in (False, True):
            img = sources[name].mirrored() if mirror else sources[name]
            rec_seed = record_seed(seed, index)
            noisy, params = synthesize_noise(img, cfg, seed=rec_seed)
            rel = f"{stem}_m.png" if mirror else f"{stem}.png"
            write_gray(img, os.path.join(clean_dir, rel))
            write_gray(noisy, os.path.join(noisy_dir, rel), bit_depth=16)
            records.append(ManifestRecord(rel, split, mirror, rec_seed, params.sigma_g))
            index += 1

    write_manifest(records, os.path.join(out_dir, "manifest.tsv"))
    return records


def load_patch_pairs(out_dir, records, split: str, patch: int,
                     row_stride: int = DEFAULT_ROW_STRIDE,
                     col_stride: int = DEFAULT_COL_STRIDE,
                     dtype=np.float32):
    """Stack (noisy, clean) unit-domain patches for one split.

    Returns arrays of shape [N, 1, patch, patch]; patching happens at
    load time with the same grid used at inference.
    """
    noisy_list, clean_list = [], []
    for rec in records:
        if rec.split != split:
            continue
        clean = read_gray(os.path.join(out_dir, "clean", rec.path)).to_unit()
        noisy = read_gray(os.path.join(out_dir, "noisy", rec.path)).to_unit()
        grid = make_grid(clean.height, clean.width, patch, row_stride, col_stride)
        clean_list.append(extract_patches(clean.values, grid))
        noisy_list.append(extract_patches(noisy.values, grid))
    if not clean_list:
        raise DataError(f"no records in split {split!r}")
    clean_arr = np.concatenate(clean_list)[:, None].astype(dtype)
    noisy_arr = np.concatenate(noisy_list)[:, None].astype(dtype)
    return noisy_arr, clean_arr
