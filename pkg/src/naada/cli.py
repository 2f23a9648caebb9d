"""Command-line interface.

Subcommands cover the whole toolkit: synthetic demo data, corpus
building, noise synthesis, training, denoising, evaluation and debug
dumps (network summary, noise maps, attention scores). Every
subcommand that produces files writes them under --out together with a
resolved-config snapshot and a MANIFEST listing the produced files.

Config handling: an optional flat key=value file (--config) supplies
defaults; explicit command-line flags win. Exit codes: 0 success,
1 usage error, 2 data/I-O error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from naada import __version__
from naada.attention import attention_score_matrices
from naada.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from naada.data import (
    DataError,
    build_dataset,
    extract_patches,
    load_patch_pairs,
    make_grid,
    read_manifest,
    reassemble,
)
from naada.images import DOMAIN_UNIT, GrayImage, ImageDomainError, read_gray, write_gray
from naada.metrics import MetricReport, psnr, ssim
from naada.network import NetworkSpec, encode, forward, init_network, summary
from naada.noise import NoiseConfig, synthesize_noise
from naada.noisemap import noise_map
from naada.phantom import synth_radiograph
from naada.tensor import Tensor, no_grad
from naada.training import TrainConfig, TrainingDiverged, train, write_history_csv

MODE_MAP = {"ada": "standard", "naada": "noise_aware"}

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


class OutputDir:
    """Collects produced files; writes MANIFEST and the resolved config."""

    def __init__(self, root):
        self.root = str(root)
        os.makedirs(self.root, exist_ok=True)
        self.files = []

    def path(self, *parts, track=True):
        p = os.path.join(self.root, *parts)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        if track:
            rel = os.path.relpath(p, self.root)
            if rel not in self.files:
                self.files.append(rel)
        return p

    def track_tree(self, subdir):
        base = os.path.join(self.root, subdir)
        for dirpath, _, names in os.walk(base):
            for name in sorted(names):
                rel = os.path.relpath(os.path.join(dirpath, name), self.root)
                if rel not in self.files:
                    self.files.append(rel)

    def finish(self, resolved: dict):
        with open(os.path.join(self.root, "config.resolved"), "w") as fh:
            for key in sorted(resolved):
                fh.write(f"{key}={resolved[key]}\n")
        with open(os.path.join(self.root, "MANIFEST"), "w") as fh:
            for rel in sorted(self.files):
                fh.write(rel + "\n")
            fh.write("config.resolved\n")


def read_config_file(path):
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise _UsageError(f"bad config line: {raw.rstrip()}")
            key, val = line.split("=", 1)
            values[key.strip()] = val.strip()
    return values


def _resolve(args, file_cfg, name, default, cast):
    """CLI flag > config file > default."""
    cli = getattr(args, name.replace("-", "_"), None)
    if cli is not None:
        return cli
    if name in file_cfg:
        return cast(file_cfg[name])
    return default


def _noise_config(args, file_cfg):
    sigma_g = _resolve(args, file_cfg, "sigma-g", None, float)
    return NoiseConfig(
        c=_resolve(args, file_cfg, "c", 50.0, float),
        rho=_resolve(args, file_cfg, "rho", 200.0, float),
        sigma_g=sigma_g,
        sigma_g_max=_resolve(args, file_cfg, "sigma-g-max", 0.35, float),
        sigma_s=_resolve(args, file_cfg, "sigma-s", 0.1, float),
        sp_fraction=_resolve(args, file_cfg, "sp-fraction", 0.05, float),
        seed=_resolve(args, file_cfg, "seed", 0, int),
    )


def _network_spec(args, file_cfg):
    mode = _resolve(args, file_cfg, "mode", "naada", str)
    if mode not in MODE_MAP:
        raise _UsageError(f"--mode must be one of {sorted(MODE_MAP)}")
    return NetworkSpec(
        width_mult=_resolve(args, file_cfg, "width-mult", 1.0, float),
        patch=_resolve(args, file_cfg, "patch", 224, int),
        heads=_resolve(args, file_cfg, "heads", 8, int),
        attention_mode=MODE_MAP[mode],
    )


def _add_common(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int, help="run seed (default 0)")
    p.add_argument("--out", required=True, help="output directory")


def _add_noise_flags(p):
    p.add_argument("--c", type=float, help="exposure constant (default 50)")
    p.add_argument("--rho", type=float, help="photon scaling (default 200)")
    p.add_argument("--sigma-g", type=float,
                   help="fixed additive-noise std; omit to draw U(0, sigma-g-max) per image")
    p.add_argument("--sigma-g-max", type=float, help="upper bound of the per-image draw (default 0.35)")
    p.add_argument("--sigma-s", type=float, help="speckle std (default 0.1)")
    p.add_argument("--sp-fraction", type=float, help="salt-and-pepper fraction (default 0.05)")


def _add_spec_flags(p):
    p.add_argument("--mode", choices=sorted(MODE_MAP), help="ada (standard) or naada (noise aware)")
    p.add_argument("--heads", type=int, help="attention heads (default 8)")
    p.add_argument("--width-mult", type=float, help="channel width multiplier (default 1.0)")
    p.add_argument("--patch", type=int, help="patch size (default 224)")


def build_parser():
    parser = _Parser(prog="naada", description=__doc__)
    parser.add_argument("--version", action="version", version=f"naada {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo-data", help="generate synthetic radiograph phantoms")
    _add_common(p)
    p.add_argument("--n", type=int, help="number of phantoms (default 12)")
    p.add_argument("--height", type=int, help="phantom height (default 176)")
    p.add_argument("--width", type=int, help="phantom width (default 320)")

    p = sub.add_parser("build", help="mirror, split and noise a source corpus")
    p.add_argument("src_dir", help="directory of clean source images")
    _add_common(p)
    _add_noise_flags(p)

    p = sub.add_parser("noise", help="synthesize noisy counterparts of a corpus")
    p.add_argument("in_dir", help="directory of clean images")
    _add_common(p)
    _add_noise_flags(p)
    p.add_argument("--order", choices=["speckle-first", "impulse-first"],
                   help="tail stage order (default speckle-first)")

    p = sub.add_parser("train", help="train a denoiser from a built dataset")
    p.add_argument("data_dir", help="directory produced by 'build' (contains manifest.tsv)")
    _add_common(p)
    _add_spec_flags(p)
    p.add_argument("--lr", type=float, help="learning rate (default 0.01)")
    p.add_argument("--batch-size", type=int, help="default 16 (32 when width-mult < 1)")
    p.add_argument("--epochs", type=int, help="max epochs (default 100)")
    p.add_argument("--patience", type=int, help="early-stop patience (default 5)")

    p = sub.add_parser("denoise", help="denoise full-resolution images with a checkpoint")
    p.add_argument("in_dir", help="directory of noisy images")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--batch-size", type=int, help="patches per forward pass (default 16)")

    p = sub.add_parser("eval", help="PSNR/SSIM of a denoised corpus against clean references")
    _add_common(p)
    p.add_argument("--clean", required=True, help="directory of clean references")
    p.add_argument("--denoised", required=True, help="directory of denoised images")
    p.add_argument("--label", help="method label for the aggregate row (default 'method')")

    p = sub.add_parser("summary", help="print the network layer table")
    p.add_argument("--config", help="flat key=value config file")
    _add_spec_flags(p)

    p = sub.add_parser("noisemap", help="export the noise map of an image as a normalized PNG")
    p.add_argument("image", help="input image")
    _add_common(p)
    p.add_argument("--k", type=int, help="window size (default 3)")

    p = sub.add_parser("attention-dump", help="dump per-head attention score matrices as CSV")
    p.add_argument("image", help="input image (one patch is taken at --row/--col)")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--row", type=int, help="patch row anchor (default 0)")
    p.add_argument("--col", type=int, help="patch col anchor (default 0)")

    return parser


def _list_images(path):
    try:
        names = sorted(
            f for f in os.listdir(path) if f.lower().endswith((".png", ".pgm"))
        )
    except OSError as exc:
        raise DataError(f"cannot list {path}: {exc}") from exc
    if not names:
        raise DataError(f"no PNG/PGM images in {path}")
    return names


def cmd_demo_data(args, file_cfg):
    out = OutputDir(args.out)
    seed = _resolve(args, file_cfg, "seed", 0, int)
    n = _resolve(args, file_cfg, "n", 12, int)
    height = _resolve(args, file_cfg, "height", 176, int)
    width = _resolve(args, file_cfg, "width", 320, int)
    seeds = np.random.SeedSequence(seed).generate_state(n, np.uint32)
    for i, s in enumerate(seeds):
        img = synth_radiograph(height, width, int(s))
        write_gray(img, out.path(f"phantom_{i:04d}.png"))
    out.finish({"command": "demo-data", "seed": seed, "n": n,
                "height": height, "width": width})
    print(f"wrote {n} phantoms to {out.root}")
    return EXIT_OK


def _noise_resolved(cfg: NoiseConfig):
    return {
        "c": cfg.c, "rho": cfg.rho,
        "sigma_g": "uniform" if cfg.sigma_g is None else cfg.sigma_g,
        "sigma_g_max": cfg.sigma_g_max, "sigma_s": cfg.sigma_s,
        "sp_fraction": cfg.sp_fraction, "seed": cfg.seed,
    }


def cmd_build(args, file_cfg):
    out = OutputDir(args.out)
    cfg = _noise_config(args, file_cfg)
    records = build_dataset(args.src_dir, out.root, cfg, cfg.seed,
                            warn=lambda m: print(f"warning: {m}", file=sys.stderr))
    out.track_tree("clean")
    out.track_tree("noisy")
    out.files.append("manifest.tsv")
    counts = {s: sum(1 for r in records if r.split == s) for s in ("train", "val", "test")}
    resolved = {"command": "build", "src_dir": args.src_dir, **_noise_resolved(cfg)}
    out.finish(resolved)
    print(f"built {len(records)} records (train/val/test = "
          f"{counts['train']}/{counts['val']}/{counts['test']}) in {out.root}")
    return EXIT_OK


def cmd_noise(args, file_cfg):
    out = OutputDir(args.out)
    cfg = _noise_config(args, file_cfg)
    if _resolve(args, file_cfg, "order", "speckle-first", str) == "impulse-first":
        cfg.impulse_before_speckle = True
    names = _list_images(args.in_dir)
    log_lines = []
    psnrs = []
    for i, name in enumerate(names):
        clean = read_gray(os.path.join(args.in_dir, name))
        seed_i = int(np.random.SeedSequence([cfg.seed, i]).generate_state(1, np.uint64)[0])
        noisy, params = synthesize_noise(clean, cfg, seed=seed_i)
        stem = os.path.splitext(name)[0]
        write_gray(noisy, out.path(f"{stem}.png"), bit_depth=16)
        psnrs.append(psnr(noisy.values, clean.to_unit().values))
        log_lines.append(f"{name} {params.record()} psnr_db={psnrs[-1]:.4f}")
    with open(out.path("noise_log.txt"), "w") as fh:
        fh.write("\n".join(log_lines) + "\n")
    mean_psnr = float(np.mean(psnrs))
    out.finish({"command": "noise", "in_dir": args.in_dir,
                "order": "impulse-first" if cfg.impulse_before_speckle else "speckle-first",
                "mean_input_psnr_db": f"{mean_psnr:.4f}", **_noise_resolved(cfg)})
    print(f"noised {len(names)} images; mean input PSNR {mean_psnr:.2f} dB")
    return EXIT_OK


def cmd_train(args, file_cfg):
    out = OutputDir(args.out)
    spec = _network_spec(args, file_cfg)
    mode = _resolve(args, file_cfg, "mode", "naada", str)
    seed = _resolve(args, file_cfg, "seed", 0, int)
    default_batch = 32 if spec.width_mult < 1.0 else 16
    cfg = TrainConfig(
        lr=_resolve(args, file_cfg, "lr", 0.01, float),
        batch_size=_resolve(args, file_cfg, "batch-size", default_batch, int),
        max_epochs=_resolve(args, file_cfg, "epochs", 100, int),
        patience=_resolve(args, file_cfg, "patience", 5, int),
        seed=seed,
    )
    manifest_path = os.path.join(args.data_dir, "manifest.tsv")
    if not os.path.exists(manifest_path):
        raise DataError(f"no manifest.tsv in {args.data_dir} (run 'naada build' first)")
    records = read_manifest(manifest_path)
    train_pairs = load_patch_pairs(args.data_dir, records, "train", spec.patch)
    val_pairs = load_patch_pairs(args.data_dir, records, "val", spec.patch)

    state = init_network(spec, seed=seed)
    result = train(state, train_pairs, val_pairs, cfg, log=print)

    save_checkpoint(result.state, out.path("checkpoint.naada"))
    write_history_csv(result.history, out.path("history.csv"))
    out.finish({
        "command": "train", "data_dir": args.data_dir, "mode": mode,
        "width_mult": spec.width_mult, "patch": spec.patch, "heads": spec.heads,
        "lr": cfg.lr, "batch_size": cfg.batch_size, "epochs": cfg.max_epochs,
        "patience": cfg.patience, "seed": seed,
        "best_epoch": result.best_epoch, "best_val_loss": f"{result.best_val_loss:.8f}",
    })
    print(f"best epoch {result.best_epoch} (val loss {result.best_val_loss:.6f}); "
          f"checkpoint in {out.root}")
    return EXIT_OK


def denoise_image(img: GrayImage, state, batch_size=16) -> GrayImage:
    """Patch, run the network in eval mode, reassemble."""
    unit = img.to_unit()
    patch = state.spec.patch
    grid = make_grid(unit.height, unit.width, patch)
    patches = extract_patches(unit.values, grid)[:, None].astype(np.float32)
    state.eval()
    outs = []
    with no_grad():
        for start in range(0, patches.shape[0], batch_size):
            pred = forward(Tensor(patches[start : start + batch_size]), state)
            outs.append(pred.data[:, 0])
    merged = reassemble(np.concatenate(outs), grid)
    return GrayImage(np.clip(merged, 0.0, 1.0), DOMAIN_UNIT)


def cmd_denoise(args, file_cfg):
    out = OutputDir(args.out)
    state = load_checkpoint(args.checkpoint)
    batch = _resolve(args, file_cfg, "batch-size", 16, int)
    names = _list_images(args.in_dir)
    for name in names:
        img = read_gray(os.path.join(args.in_dir, name))
        restored = denoise_image(img, state, batch)
        write_gray(restored, out.path(f"{os.path.splitext(name)[0]}.png"), bit_depth=16)
    out.finish({"command": "denoise", "in_dir": args.in_dir,
                "checkpoint": args.checkpoint, "batch_size": batch,
                "patch": state.spec.patch})
    print(f"denoised {len(names)} images into {out.root}")
    return EXIT_OK


def cmd_eval(args, file_cfg):
    out = OutputDir(args.out)
    label = _resolve(args, file_cfg, "label", "method", str)
    names = _list_images(args.denoised)
    clean_names = set(_list_images(args.clean))
    report = MetricReport(label=label, names=[], psnr_values=[], ssim_values=[])
    for name in names:
        if name not in clean_names:
            raise DataError(f"no clean reference for {name}")
        a = read_gray(os.path.join(args.clean, name)).to_unit().values
        b = read_gray(os.path.join(args.denoised, name)).to_unit().values
        report.names.append(name)
        report.psnr_values.append(psnr(a, b))
        report.ssim_values.append(ssim(a, b))
    with open(out.path("per_image.csv"), "w") as fh:
        fh.write("\n".join(report.per_image_rows()) + "\n")
    with open(out.path("aggregate.csv"), "w") as fh:
        fh.write(MetricReport.aggregate_header() + "\n")
        fh.write(report.aggregate_row() + "\n")
    out.finish({"command": "eval", "clean": args.clean, "denoised": args.denoised,
                "label": label, "n": report.n})
    pm, ph = report.psnr_aggregate()
    sm, sh = report.ssim_aggregate()
    print(f"{label}: PSNR {pm:.2f} ± {ph:.2f} dB, SSIM {sm:.4f} ± {sh:.4f} (n={report.n})")
    return EXIT_OK


def cmd_summary(args, file_cfg):
    print(summary(_network_spec(args, file_cfg)))
    return EXIT_OK


def cmd_noisemap(args, file_cfg):
    out = OutputDir(args.out)
    k = _resolve(args, file_cfg, "k", 3, int)
    img = read_gray(args.image).to_unit()
    z = Tensor(img.values[None, None].astype(np.float32))
    with no_grad():
        psi = noise_map(z, k=k).data[0, 0]
    peak = psi.max()
    normalized = psi / peak if peak > 0 else psi
    write_gray(GrayImage(normalized.astype(np.float64), DOMAIN_UNIT), out.path("noisemap.png"))
    out.finish({"command": "noisemap", "image": args.image, "k": k,
                "peak_value": f"{peak:.8f}"})
    print(f"noise map (peak {peak:.6f}) written to {out.root}")
    return EXIT_OK


def cmd_attention_dump(args, file_cfg):
    out = OutputDir(args.out)
    state = load_checkpoint(args.checkpoint)
    state.eval()
    patch = state.spec.patch
    row = _resolve(args, file_cfg, "row", 0, int)
    col = _resolve(args, file_cfg, "col", 0, int)
    img = read_gray(args.image).to_unit()
    if img.height < row + patch or img.width < col + patch:
        raise DataError(f"image too small for a {patch} patch at ({row}, {col})")
    tile = img.values[row : row + patch, col : col + patch]
    with no_grad():
        bottleneck, _ = encode(Tensor(tile[None, None].astype(np.float32)), state)
        scores, attn = attention_score_matrices(
            bottleneck, state.attention, state.spec.attention_config()
        )
    for h in range(scores.shape[1]):
        np.savetxt(out.path(f"scores_head{h}.csv"), scores[0, h], delimiter=",")
        np.savetxt(out.path(f"attn_head{h}.csv"), attn[0, h], delimiter=",")
    out.finish({"command": "attention-dump", "image": args.image,
                "checkpoint": args.checkpoint, "row": row, "col": col,
                "heads": scores.shape[1], "tokens": scores.shape[2]})
    print(f"dumped {scores.shape[1]} head score matrices to {out.root}")
    return EXIT_OK


_HANDLERS = {
    "demo-data": cmd_demo_data,
    "build": cmd_build,
    "noise": cmd_noise,
    "train": cmd_train,
    "denoise": cmd_denoise,
    "eval": cmd_eval,
    "summary": cmd_summary,
    "noisemap": cmd_noisemap,
    "attention-dump": cmd_attention_dump,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        file_cfg = read_config_file(args.config) if getattr(args, "config", None) else {}
        return _HANDLERS[args.command](args, file_cfg)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ImageDomainError, CheckpointError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDiverged, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
