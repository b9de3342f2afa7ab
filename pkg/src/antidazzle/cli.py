"""Command-line entry point.

Data goes to files, a JSON summary to stdout, progress to stderr. On failure
a single line ``error code=<name> exit=<n> message=<json string>`` is printed
to stderr and the process exits with 2 (config), 3 (I/O) or 4 (numerical
guard).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import calib, config as cfgmod, io as aio, metrics, restore, synthesis
from .errors import AntiDazzleError, ConfigError, DataIOError, NumericalGuardError
from .optics import PsfPair, crop_psf, focal_psf_pair, psf_support, resample_psf

log = logging.getLogger("antidazzle")


def _emit(summary: dict) -> None:
    sys.stdout.write(json.dumps(summary, sort_keys=True, allow_nan=True) + "\n")


def _sha256(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def _load(args) -> cfgmod.RunConfig:
    return cfgmod.load_config(getattr(args, "config", None))


def _sensor_pair(run: cfgmod.RunConfig, wavelength: float, mask: bool) -> tuple[PsfPair, PsfPair]:
    """Focal-grid pair and the same pair on the sensor pitch, cropped to support."""
    focal = focal_psf_pair(run.optics, wavelength, mask)
    coded = resample_psf(focal.coded, run.sensor.pixel_pitch)
    uncoded = resample_psf(focal.uncoded, run.sensor.pixel_pitch)
    side = max(psf_support(coded), psf_support(uncoded))
    return focal, PsfPair(crop_psf(coded, side), crop_psf(uncoded, side))


def _psfs_for(run: cfgmod.RunConfig, mask: bool) -> tuple[PsfPair, PsfPair]:
    _, psfs_b = _sensor_pair(run, run.optics.lambda_b, mask)
    if run.optics.lambda_l == run.optics.lambda_b:
        return psfs_b, psfs_b
    _, psfs_l = _sensor_pair(run, run.optics.lambda_l, mask)
    return psfs_b, psfs_l


def cmd_gen_psf(args) -> dict:
    run = _load(args)
    mask = args.mask == "five-half-ring"
    wl = run.optics.lambda_b if args.wavelength == "background" else run.optics.lambda_l
    t0 = time.perf_counter()
    focal, sensor_pair = _sensor_pair(run, wl, mask)
    log.info("PSF pair computed in %.2f s", time.perf_counter() - t0)
    out = Path(args.out)
    psf = focal.coded if args.grid == "focal" else sensor_pair.coded
    blob = aio.encode_adpf(psf.values, psf.pitch[0], wl)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(blob)
    except OSError as exc:
        raise DataIOError(f"cannot write {out}: {exc}") from exc
    summary = {
        "mask": args.mask,
        "lsr": focal.lsr,
        "energy_coded": focal.coded.raw_energy,
        "energy_uncoded": focal.uncoded.raw_energy,
        "energy_rel_diff": abs(focal.coded.raw_energy - focal.uncoded.raw_energy) / focal.uncoded.raw_energy,
        "support_px": sensor_pair.coded.shape[0],
        "grid": args.grid,
        "pitch_m": psf.pitch[0],
        "wavelength_m": wl,
        "shape": list(psf.shape),
        "adpf": str(out),
        "sha256": _sha256(blob),
    }
    Path(str(out) + ".json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _centre_crop_rect(scene: np.ndarray, sensor) -> tuple[int, int, int, int]:
    w_s, h_s = sensor.resolution
    rows, cols = scene.shape
    if rows < h_s or cols < w_s:
        raise DataIOError(f"scene {cols}x{rows} smaller than sensor {w_s}x{h_s}")
    return ((cols - w_s) // 2, (rows - h_s) // 2, w_s, h_s)


def cmd_simulate(args) -> dict:
    run = _load(args)
    scene_path = Path(args.scene)
    scene = aio.read_radiance(scene_path)
    seed = run.master_seed if args.seed is None else args.seed
    rect = _centre_crop_rect(scene, run.sensor) if args.crop is None else (
        args.crop[0], args.crop[1], *run.sensor.resolution)
    spec = synthesis.SampleSpec(
        scene_id=scene_path.stem,
        crop_rect=rect,
        alpha_b=args.alpha_b,
        alpha_l=args.alpha_l,
        direction=tuple(args.direction),
        exposure=args.exposure,
        c1=run.photon.c1,
        c2=run.photon.c2,
        read_noise_mean=run.sensor.read_noise_mean,
        read_noise_std=run.sensor.read_noise_std,
        dark_current_mean=run.sensor.dark_current_mean,
        seed=seed,
    )
    if args.preset:
        spec = synthesis.apply_preset(spec, args.preset)
    psfs_b, psfs_l = _psfs_for(run, args.mask == "five-half-ring")
    result = synthesis.synthesize_sample(
        spec, psfs_b, psfs_l, run.sensor, run.optics, scene, run.dataset.work_dims,
        photon_law=run.photon.law,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    work_pitch = run.sensor.pixel_pitch * run.sensor.resolution[0] / run.dataset.work_dims[1]
    psf_work = synthesis.downsample_psf(psfs_b.coded, run.dataset.work_dims[1] / run.sensor.resolution[0])
    pad = synthesis.restoration_pad(psf_work.shape[0], run.dataset.work_dims, run.dataset.padded_dims)
    record = synthesis.write_sample(
        result, 0, out, work_pitch, run.optics.lambda_b,
        {"pad_per_side": pad, "work_pitch": work_pitch}, stem="sample",
    )
    psf_blob = aio.encode_adpf(psf_work.values, work_pitch, run.optics.lambda_b)
    (out / "psf_coded.adpf").write_bytes(psf_blob)
    record["files"]["psf_coded"] = {"path": "psf_coded.adpf", "sha256": _sha256(psf_blob)}
    record["laser_energy"] = result.meta["laser_energy"]
    return record


def cmd_synth_dataset(args) -> dict:
    run = _load(args)
    scenes = args.scenes or run.paths.scenes
    if not scenes:
        raise ConfigError("no scene directory: pass --scenes or set paths.scenes")
    store = synthesis.SceneStore(scenes)
    seed = run.master_seed if args.seed is None else args.seed
    dataset = run.dataset if args.preset is None else replace(run.dataset, preset=args.preset)
    t0 = time.perf_counter()
    psfs_b, psfs_l = _psfs_for(run, args.mask == "five-half-ring")
    log.info("PSFs ready in %.2f s", time.perf_counter() - t0)
    manifest, digest = synthesis.synthesize_dataset(
        args.count, seed, args.out, store, run.optics, run.sensor, dataset, psfs_b, psfs_l,
        jobs=args.jobs, photon_law=run.photon.law,
    )
    log.info("wrote %d samples in %.2f s", args.count, time.perf_counter() - t0)
    return {"manifest": str(manifest), "manifest_sha256": digest, "count": args.count, "seed": seed}


def _read_image(path) -> np.ndarray:
    """PNG as [0, 1] radiance, or ADPF values as stored."""
    path = Path(path)
    if path.suffix.lower() == ".adpf":
        return aio.read_adpf(path)[0].astype(np.float64)
    return aio.read_radiance(path)


def _write_image(path, img: np.ndarray) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".adpf":
        blob = aio.encode_adpf(img, 0.0, 0.0)
    else:
        blob = aio.encode_png16(np.rint(np.clip(img, 0, 1) * 65535).astype(np.uint16))
    try:
        path.write_bytes(blob)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc
    return _sha256(blob)


def _manifest_records(path) -> tuple[dict, list[dict], bytes]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataIOError(f"cannot read manifest {path}: {exc}") from exc
    lines = [json.loads(line) for line in blob.decode().splitlines() if line.strip()]
    if not lines or lines[0].get("kind") != "header":
        raise DataIOError(f"{path} is not a dataset manifest")
    return lines[0], lines[1:], blob


def _dataset_pairs(manifest_path):
    """(normalised coded input, normalised truth, psf, sidecar) per sample."""
    header, records, blob = _manifest_records(manifest_path)
    root = Path(manifest_path).parent
    psf = aio.read_adpf(root / header["files"]["psf_coded"]["path"])[0].astype(np.float64)
    pad = int(header["pad_per_side"])
    out = []
    for rec in records:
        side = json.loads((root / rec["files"]["sidecar"]["path"]).read_text())
        counts = aio.read_png(root / rec["files"]["coded"]["path"])
        truth = aio.read_radiance(root / rec["files"]["truth"]["path"])
        s_sat = int(np.iinfo(counts.dtype).max)
        meta = side["meta"]
        x = restore.normalize_counts(counts, s_sat, meta["dark_offset_counts"])
        truth_n = truth * meta["counts_per_radiance"] / s_sat
        out.append((np.pad(x, pad), truth_n, psf, rec, meta, s_sat))
    return out, blob


def cmd_restore(args) -> dict:
    run = _load(args)
    if args.manifest:
        return _restore_dataset(args, run)
    if not (args.input and args.psf):
        raise ConfigError("restore needs --manifest or both --input and --psf")
    gamma = _gamma_from(args, run)
    psf = aio.read_adpf(args.psf)[0].astype(np.float64)
    src = Path(args.input)
    if src.suffix.lower() == ".adpf":
        img = aio.read_adpf(src)[0].astype(np.float64)
    else:
        counts = aio.read_png(src)
        img = restore.normalize_counts(counts, int(np.iinfo(counts.dtype).max), args.offset)
    pad = psf.shape[0] if args.pad is None else args.pad
    out = restore.restore_padded(img, psf, replace(run.restore, gamma=gamma), pad)
    digest = _write_image(args.out, out)
    return {"output": str(args.out), "sha256": digest, "gamma": gamma, "pad_per_side": pad}


def _gamma_from(args, run) -> float:
    if args.gamma is not None:
        return args.gamma
    if args.model:
        try:
            return float(json.loads(Path(args.model).read_text())["gamma"])
        except (OSError, KeyError, ValueError) as exc:
            raise DataIOError(f"cannot read model card {args.model}: {exc}") from exc
    return run.restore.gamma


def _restore_dataset(args, run) -> dict:
    pairs, blob = _dataset_pairs(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {"manifest_sha256": _sha256(blob), "count": len(pairs)}
    if args.fit:
        gamma = restore.fit_gamma([(x, t, psf) for x, t, psf, *_ in pairs], tuple(args.search))
        card = {"gamma": gamma, "search": list(args.search), "manifest_sha256": summary["manifest_sha256"],
                "domain": "offset-free counts / s_sat"}
        (out_dir / "model_card.json").write_text(json.dumps(card, indent=2, sort_keys=True) + "\n")
    else:
        gamma = _gamma_from(args, run)
    cfg = replace(run.restore, gamma=gamma)
    files = []
    for x, truth_n, psf, rec, meta, s_sat in pairs:
        y = restore.crop_like(restore.wiener_deconvolve(x, psf, cfg), truth_n.shape)
        radiance = restore.counts_to_radiance(y, s_sat, meta["counts_per_radiance"])
        name = f"{rec['index']:06d}_restored.png"
        files.append({"index": rec["index"], "path": name, "sha256": _write_image(out_dir / name, radiance)})
    summary.update(gamma=gamma, files=files)
    return summary


def _pairs_for_eval(pred, truth) -> list[tuple[str, Path, Path]]:
    pred, truth = Path(pred), Path(truth)
    if pred.is_dir() != truth.is_dir():
        raise ConfigError("--pred and --truth must both be files or both directories")
    if not pred.is_dir():
        return [(pred.name, pred, truth)]
    out = []
    for p in sorted(pred.iterdir()):
        if p.suffix.lower() not in (".png", ".adpf"):
            continue
        # same name, else the dataset layout: <stem>_restored.png vs <stem>_truth.png
        stem = p.stem.removesuffix("_restored").removesuffix("_coded")
        for cand in (truth / p.name, truth / f"{stem}_truth{p.suffix}"):
            if cand.exists() and cand != p:
                out.append((p.name, p, cand))
                break
    if not out:
        raise DataIOError("no matching file names between --pred and --truth")
    return out


def cmd_evaluate(args) -> dict:
    report = metrics.QualityReport()
    for name, p, t in _pairs_for_eval(args.pred, args.truth):
        x, y = _read_image(p), _read_image(t)
        if args.border:
            b = args.border
            x, y = x[b:-b, b:-b], y[b:-b, b:-b]
        report.add(name, x, y)
    if args.out_json:
        Path(args.out_json).write_text(report.to_json())
    if args.out_csv:
        Path(args.out_csv).write_text(report.to_csv())
    return {"schema_version": metrics.SCHEMA_VERSION, "images": report.rows, "aggregate": report.aggregate()}


def cmd_calibrate(args) -> dict:
    run = _load(args)
    if args.simulate:
        frames = calib.simulate_dark_frames(run.sensor, tuple(args.shape), args.frames_per_exposure, args.seed)
        calib.write_dark_frames(args.frames, frames)
    frames = calib.load_dark_frames(args.frames)
    result = calib.estimate_read_noise(frames, run.sensor, per_frame=args.per_frame)
    calib.validate(result, frames, run.sensor, args.seed, args.bins)
    text = result.to_json()
    if args.out:
        Path(args.out).write_text(text)
    return json.loads(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="antidazzle", description="Wavefront-coded anti-dazzle imaging simulator")
    parser.add_argument("--print-defaults", action="store_true", help="print the default config JSON and exit")
    parser.add_argument("--print-schema", action="store_true", help="print config keys, types and defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON run config")
        p.set_defaults(func=func)
        return p

    p = add("gen-psf", cmd_gen_psf, "compute a PSF and its suppression summary")
    p.add_argument("--mask", choices=("none", "five-half-ring"), default="five-half-ring")
    p.add_argument("--wavelength", choices=("background", "laser"), default="background")
    p.add_argument("--grid", choices=("sensor", "focal"), default="sensor")
    p.add_argument("--out", required=True, help="ADPF output; summary goes to <out>.json and stdout")

    p = add("simulate", cmd_simulate, "simulate one coded sensor frame")
    p.add_argument("--scene", required=True)
    p.add_argument("--alpha-l", type=float, default=0.0)
    p.add_argument("--alpha-b", type=float, default=0.5)
    p.add_argument("--preset", choices=sorted(synthesis.PRESETS))
    p.add_argument("--seed", type=int)
    p.add_argument("--direction", type=float, nargs=2, default=(0.0, 0.0), metavar=("N_U", "N_V"))
    p.add_argument("--exposure", type=float, default=0.1)
    p.add_argument("--crop", type=int, nargs=2, metavar=("X0", "Y0"))
    p.add_argument("--mask", choices=("none", "five-half-ring"), default="five-half-ring")
    p.add_argument("--out", required=True, help="output directory")

    p = add("synth-dataset", cmd_synth_dataset, "synthesize a dataset with a manifest")
    p.add_argument("--scenes")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--preset", choices=sorted(synthesis.PRESETS))
    p.add_argument("--mask", choices=("none", "five-half-ring"), default="five-half-ring")
    p.add_argument("--out", required=True)

    p = add("restore", cmd_restore, "Wiener restoration of one image or a dataset")
    p.add_argument("--input")
    p.add_argument("--psf")
    p.add_argument("--manifest")
    p.add_argument("--gamma", type=float)
    p.add_argument("--model", help="model card JSON holding gamma")
    p.add_argument("--fit", action="store_true", help="fit gamma on the manifest and write model_card.json")
    p.add_argument("--search", type=float, nargs=2, default=(1e-8, 1e2), metavar=("LO", "HI"))
    p.add_argument("--pad", type=int)
    p.add_argument("--offset", type=float, default=0.0, help="dark offset in counts for PNG input")
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "quality metrics between predictions and truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--border", type=int, default=0)
    p.add_argument("--out-json")
    p.add_argument("--out-csv")

    p = add("calibrate", cmd_calibrate, "read-noise calibration from dark frames")
    p.add_argument("--frames", required=True, help="directory of {exposure}_{index}.png")
    p.add_argument("--out")
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-frame", action="store_true")
    p.add_argument("--simulate", action="store_true", help="first write simulated dark frames into --frames")
    p.add_argument("--frames-per-exposure", type=int, default=20)
    p.add_argument("--shape", type=int, nargs=2, default=(256, 256), metavar=("ROWS", "COLS"))
    return parser


def _fail(exc: BaseException, code: str, exit_code: int) -> int:
    msg = json.dumps(str(exc))
    sys.stderr.write(f"error code={code} exit={exit_code} message={msg}\n")
    return exit_code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        if args.print_defaults:
            sys.stdout.write(cfgmod.RunConfig().to_json())
            return 0
        if args.print_schema:
            sys.stdout.write(json.dumps(cfgmod.schema(), indent=2) + "\n")
            return 0
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 2
        _emit(args.func(args))
        return 0
    except AntiDazzleError as exc:
        return _fail(exc, exc.code, exc.exit_code)
    except ValueError as exc:
        return _fail(exc, ConfigError.code, ConfigError.exit_code)
    except OSError as exc:
        return _fail(exc, DataIOError.code, DataIOError.exit_code)
    except (ArithmeticError, FloatingPointError) as exc:
        return _fail(exc, NumericalGuardError.code, NumericalGuardError.exit_code)


if __name__ == "__main__":
    sys.exit(main())
