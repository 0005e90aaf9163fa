"""Command-line orchestration.  No interactive UI; every command writes files.

Exit codes: 0 success, 1 configuration error, 2 partial per-image failures,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import nnet
from .config import ExperimentConfig
from .container import load_hex_image, save_distance_matrix, save_hex_image
from .errors import ConfigError, DatasetError, HexsrError
from .metrics import MetricReport
from .observe import HexImage, load_png, save_png, save_png_with_sidecar
from .optics import export_otf_csv, export_psf_csv, otf_volume_fraction_beyond
from .pipeline import (
    MetricRow,
    build_setup,
    emit_report,
    ingest_dataset,
    fit_nsr_from_config,
    run_pipeline,
    simulate_lr,
    synthetic_dataset,
    train_from_config,
    _sr_grid,
)
from .resample import bicubic_upsample, distance_matrix, nonuniform_interpolate
from .sampling import (
    HexGrid,
    RectGrid,
    enumerate_samples,
    export_packing_csv,
    export_samples_csv,
    frequency_packing_report,
    nyquist_density_comparison,
)
from .wiener import WienerFilterSpec, wiener_restore
from .observe import RasterImage


def _dataset_root(args) -> str | None:
    if getattr(args, "data", None):
        return args.data
    return os.environ.get("HEXSR_DATA")


def _gather_images(args, config: ExperimentConfig, which: str):
    """Test/train images: a dataset directory when given, else synthetics."""
    root = _dataset_root(args)
    if root:
        handles = ingest_dataset(root, config.split)[which]
        return [(str(h.image_id), h.load(config.hr_pitch)) for h in handles]
    return synthetic_dataset(args.synthetic_count, args.synthetic_size, config.seed)


def _add_synth_args(p):
    p.add_argument("--synthetic-count", type=int, default=6, dest="synthetic_count")
    p.add_argument("--synthetic-size", type=int, default=96, dest="synthetic_size")
    p.add_argument("--data", help="dataset directory of numbered PNGs (or $HEXSR_DATA)")


def cmd_simulate(args) -> int:
    config = ExperimentConfig.load(args.config)
    setup = build_setup(config)
    if args.input:
        hr = load_png(args.input, config.hr_pitch)
        name = Path(args.input).stem
    else:
        from .synthetic import make_image

        hr = make_image(args.synthetic, size=args.size, seed=config.seed)
        name = args.synthetic
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    kind = "hex" if config.uses_hex else "rect"
    lr = simulate_lr(hr, config, setup, kind)
    meta = {
        "seed": config.seed,
        "sigma": config.noise_sigma,
        "f_number": config.f_number,
        "wavelengths_um": "red=0.620 green=0.540 blue=0.460"
        if config.wavelengths is None
        else " ".join(f"{k}={v}" for k, v in sorted(config.wavelengths.items())),
    }
    if kind == "hex":
        save_hex_image(lr, out / f"{name}_lr_hex.hexraw", {k: str(v) for k, v in meta.items()})
    else:
        save_png_with_sidecar(lr, out / f"{name}_lr_rect.png", meta)
    save_png(hr, out / f"{name}_hr.png")
    print(f"wrote LR {kind} simulation of {name!r} to {out}")
    return 0


def cmd_resample(args) -> int:
    if args.mode == "ni":
        img, _ = load_hex_image(args.input)
        grid = RectGrid(args.pitch, args.rows, args.cols)
        sr = nonuniform_interpolate(img, grid)
        if args.export_distance:
            dm = distance_matrix(img.grid.coordinates(), grid)
            save_distance_matrix(dm.values, grid, args.export_distance)
    else:
        src = load_png(args.input, args.pitch)
        sr = bicubic_upsample(src, args.factor)
    save_png(sr, args.output)
    print(f"wrote {args.output}")
    return 0


def cmd_restore_wiener(args) -> int:
    config = ExperimentConfig.load(args.config)
    if not config.nsr:
        raise ConfigError("config has no fitted nsr; run fit-nsr first")
    setup = build_setup(config)
    img = load_png(args.input, config.hr_pitch)
    psfs = setup.psfs_hex if config.uses_hex else setup.psfs_rect
    from .pipeline import _wiener_per_channel

    restored = _wiener_per_channel(img, psfs, config.nsr)
    save_png(restored, args.output)
    print(f"wrote {args.output}")
    return 0


def cmd_fit_nsr(args) -> int:
    config = ExperimentConfig.load(args.config)
    images = _gather_images(args, config, "train")
    nsr = fit_nsr_from_config(config, images)
    updated = ExperimentConfig.from_json(config.to_json())
    d = updated.to_json()
    import json

    raw = json.loads(d)
    raw["nsr"] = {k: float(v) for k, v in sorted(nsr.items())}
    out = args.update_config or args.config
    with open(out, "w") as fh:
        fh.write(json.dumps(raw, sort_keys=True, indent=2) + "\n")
    print(f"fitted nsr {nsr}; wrote {out}")
    return 0


def cmd_train(args) -> int:
    config = ExperimentConfig.load(args.config)
    if not config.needs_model:
        raise ConfigError(f"variant {config.variant} has no learned stage to train")
    train_images = _gather_images(args, config, "train")
    val_images = train_images[: max(1, len(train_images) // 5)] if not _dataset_root(args) else [
        (str(h.image_id), h.load(config.hr_pitch))
        for h in ingest_dataset(_dataset_root(args), config.split)["val"]
    ]
    if not _dataset_root(args):
        train_images = train_images[len(val_images):]
    result = train_from_config(
        config, train_images, val_images, checkpoint_path=args.checkpoint, curve_path=args.curve
    )
    print(
        f"trained {config.variant}: best val PSNR-Y {result.best_val_psnr:.3f} dB "
        f"at step {result.best_step}; checkpoint {args.checkpoint}"
    )
    return 0


def cmd_evaluate(args) -> int:
    config = ExperimentConfig.load(args.config)
    images = _gather_images(args, config, "test")
    rows, outputs, failures = run_pipeline(config, images)
    if not rows and failures:
        for image_id, msg in failures:
            print(f"FAILED {image_id}: {msg}", file=sys.stderr)
        return 2
    emit = emit_report(rows, args.report, args.summary)
    print(emit)
    if args.save_images:
        outdir = Path(args.save_images)
        outdir.mkdir(parents=True, exist_ok=True)
        for image_id, sr in outputs.items():
            save_png(sr, outdir / f"{image_id}_{config.variant}.png")
    if failures:
        for image_id, msg in failures:
            print(f"FAILED {image_id}: {msg}", file=sys.stderr)
        return 2
    return 0


def cmd_analyze_otf(args) -> int:
    config = ExperimentConfig.load(args.config)
    setup = build_setup(config)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    from .optics import combined_otf, frequency_grid

    lines = []
    for i, name in enumerate(("red", "green", "blue")):
        ch = setup.channels[name]
        grid = frequency_grid(ch.cutoff_frequency, args.grid_points)
        for det_name, det in (("rect", setup.detector_rect), ("hex", setup.detector_hex)):
            otf = combined_otf(ch, det, grid)
            export_otf_csv(otf, out / f"otf_{name}_{det_name}.csv")
            frac = otf_volume_fraction_beyond(otf, ch.folding_frequency)
            lines.append(
                f"{name} {det_name}: cutoff {ch.cutoff_frequency:.4f} cyc/um, "
                f"volume fraction beyond folding {frac:.3e}"
            )
        export_psf_csv(setup.psfs_rect[i], out / f"psf_{name}_rect.csv")
        export_psf_csv(setup.psfs_hex[i], out / f"psf_{name}_hex.csv")
    (out / "otf_report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def cmd_analyze_grid(args) -> int:
    config = ExperimentConfig.load(args.config)
    setup = build_setup(config)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    green = setup.channels["green"]
    rep = nyquist_density_comparison(green.cutoff_frequency)
    with open(out / "density_report.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rect_density", "hex_density", "density_saving_pct", "cutoff_gain_pct"])
        w.writerow([f"{rep.rect_density:.9g}", f"{rep.hex_density:.9g}",
                    f"{rep.density_saving_pct:.9g}", f"{rep.cutoff_gain_pct:.9g}"])
    fov = (0.0, 0.0, args.window, args.window)
    rect = RectGrid(config.lr_pitch, 1, 1)
    hexg = HexGrid.ideal(setup.t1, 1, 1)
    export_samples_csv(enumerate_samples(rect, fov), out / "samples_rect.csv")
    export_samples_csv(enumerate_samples(hexg, fov), out / "samples_hex.csv")
    from .optics import combined_otf, frequency_grid

    grid = frequency_grid(green.cutoff_frequency, 65)
    otf_r = combined_otf(green, setup.detector_rect, grid)
    otf_h = combined_otf(green, setup.detector_hex, grid)
    export_packing_csv(frequency_packing_report(rect, otf_r), out / "packing_rect.csv")
    export_packing_csv(frequency_packing_report(hexg, otf_h), out / "packing_hex.csv")
    print(
        f"density saving {rep.density_saving_pct:.2f}%, cutoff gain {rep.cutoff_gain_pct:.2f}%; "
        f"wrote grid analyses to {out}"
    )
    return 0


def cmd_report(args) -> int:
    rows = []
    with open(args.input, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            if rec["image"] == "mean":
                continue
            rows.append(
                MetricRow(
                    rec["system"],
                    rec["image"],
                    MetricReport(
                        psnr_y=float(rec["psnr_y"]),
                        ssim_y=float(rec["ssim_y"]),
                        psnr_rgb=float(rec["psnr_rgb"]),
                        ssim_rgb=float(rec["ssim_rgb"]),
                    ),
                )
            )
    summary = emit_report(rows, args.output, args.summary)
    print(summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hexsr",
        description="Hexagonal-sampling camera simulation and super-resolution",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the observation model on an image")
    p.add_argument("--config", required=True)
    p.add_argument("--input", help="HR PNG input")
    p.add_argument("--synthetic", default="blobs", help="built-in image name")
    p.add_argument("--size", type=int, default=96)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("resample", help="hex-to-rect NI or rect bicubic upsampling")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=("ni", "bicubic"), required=True)
    p.add_argument("--pitch", type=float, default=1.0)
    p.add_argument("--rows", type=int, default=96)
    p.add_argument("--cols", type=int, default=96)
    p.add_argument("--factor", type=int, default=4)
    p.add_argument("--export-distance", dest="export_distance")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("restore-wiener", help="Wiener-restore an HR-pitch image")
    p.add_argument("--config", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_restore_wiener)

    p = sub.add_parser("fit-nsr", help="fit per-channel Wiener NSR on training data")
    p.add_argument("--config", required=True)
    p.add_argument("--update-config", dest="update_config")
    _add_synth_args(p)
    p.set_defaults(func=cmd_fit_nsr)

    p = sub.add_parser("train", help="train the learned restorer for the config variant")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--curve")
    _add_synth_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run the full pipeline and report metrics")
    p.add_argument("--config", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--summary")
    p.add_argument("--save-images", dest="save_images")
    _add_synth_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze-otf", help="export OTF/PSF curves and volume fractions")
    p.add_argument("--config", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--grid-points", dest="grid_points", type=int, default=257)
    p.set_defaults(func=cmd_analyze_otf)

    p = sub.add_parser("analyze-grid", help="export density, sample, and packing reports")
    p.add_argument("--config", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--window", type=float, default=60.0)
    p.set_defaults(func=cmd_analyze_grid)

    p = sub.add_parser("report", help="aggregate a per-image metrics CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--summary")
    p.set_defaults(func=cmd_report)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError,) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (DatasetError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except HexsrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
