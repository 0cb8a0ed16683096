"""Command-line surface: ``tiltview synth | analyze | reconstruct``.

Runs are driven by a single JSON config document; command-line flags win
over config values. Unknown config keys are rejected so that fixture
configs stay honest.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import manifest as manifest_io
from .optics import OpticalSystemConfig, PlaneGrid, TiltedPlaneSpec
from .pgm import MAXVAL_16, read_pgm, write_pgm16
from .reconstruction import reconstruct
from .resolution import extract_fov, scan_resolution, write_curve_csv, write_fov_json
from .scene import PointEmitter, Scene, TexturedPlane, capture_with_report

log = logging.getLogger("tiltview")


class ConfigError(ValueError):
    pass


def _strict(doc: dict, allowed: set[str], context: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {', '.join(sorted(unknown))}")


@dataclass
class ScanConfig:
    axis: str = "x"
    theta_min_deg: float = -40.0
    theta_max_deg: float = 40.0
    steps: int = 81
    threshold_ratio: float = 1.5


@dataclass
class RunConfig:
    optical_system: OpticalSystemConfig
    z_i_override_mm: float | None = None
    plane: TiltedPlaneSpec | None = None
    scan: ScanConfig | None = None
    out_dir: str | None = None

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            doc = json.load(fh)
        _strict(doc, {"optical_system", "plane", "scan", "io"}, "config")
        if "optical_system" not in doc:
            raise ConfigError("config is missing the optical_system block")
        opt = dict(doc["optical_system"])
        _strict(opt, {"m", "n", "pitch_x_mm", "pitch_y_mm", "gap_mm", "focal_length_mm",
                      "wavelength_nm", "aperture_shape", "focus_epsilon",
                      "z_i_override_mm"}, "optical_system")
        z_i_override = opt.pop("z_i_override_mm", None)
        cfg = OpticalSystemConfig(**opt)
        plane = None
        if "plane" in doc:
            pl = dict(doc["plane"])
            _strict(pl, {"theta_x_deg", "theta_y_deg", "D_mm", "grid"}, "plane")
            grid = dict(pl["grid"])
            _strict(grid, {"half_width_x_mm", "half_width_y_mm", "sample_pitch_mm"}, "plane.grid")
            plane = TiltedPlaneSpec(
                theta_x_deg=pl.get("theta_x_deg", 0.0),
                theta_y_deg=pl.get("theta_y_deg", 0.0),
                axial_offset_mm=pl["D_mm"],
                grid=PlaneGrid(**grid),
            )
        scan = None
        if "scan" in doc:
            sc = dict(doc["scan"])
            _strict(sc, {"axis", "theta_min_deg", "theta_max_deg", "steps", "threshold_ratio"},
                    "scan")
            scan = ScanConfig(**sc)
        out_dir = None
        if "io" in doc:
            io_block = dict(doc["io"])
            _strict(io_block, {"out_dir"}, "io")
            out_dir = io_block.get("out_dir")
        return cls(optical_system=cfg, z_i_override_mm=z_i_override,
                   plane=plane, scan=scan, out_dir=out_dir)


def load_scene(path) -> Scene:
    base = Path(path).parent
    with open(path) as fh:
        doc = json.load(fh)
    _strict(doc, {"points", "planes"}, "scene")
    points = []
    for entry in doc.get("points", []):
        _strict(entry, {"x_mm", "y_mm", "z_mm", "intensity"}, "scene point")
        points.append(PointEmitter(
            x_mm=entry.get("x_mm", 0.0), y_mm=entry.get("y_mm", 0.0),
            z_mm=entry["z_mm"], intensity=entry.get("intensity", 1.0)))
    planes = []
    for entry in doc.get("planes", []):
        _strict(entry, {"z_mm", "half_width_x_mm", "half_width_y_mm", "texture_file",
                        "intensity_scale"}, "scene plane")
        texture = read_pgm(base / entry["texture_file"]).astype(float)
        planes.append(TexturedPlane(
            z_mm=entry["z_mm"],
            half_width_x_mm=entry["half_width_x_mm"],
            half_width_y_mm=entry["half_width_y_mm"],
            texture=texture,
            intensity_scale=entry.get("intensity_scale", 1.0)))
    return Scene(points=points, planes=planes)


def cmd_synth(args) -> int:
    run = RunConfig.from_file(args.config)
    scene = load_scene(args.scene)
    eis, report = capture_with_report(
        scene, run.optical_system, args.pixels_x, args.pixels_y,
        pixel_pitch_mm=args.pixel_pitch_mm)
    out = Path(args.out or run.out_dir or ".")
    path = manifest_io.save_elemental_set(eis, out)
    log.info("wrote %s (%d images, %d point projections vignetted)",
             path, run.optical_system.m * run.optical_system.n, report.vignetted)
    return 0


def cmd_analyze(args) -> int:
    run = RunConfig.from_file(args.config)
    scan = run.scan or ScanConfig()
    if args.steps is not None:
        scan.steps = args.steps
    D = args.D_mm if args.D_mm is not None else (
        run.plane.axial_offset_mm if run.plane else None)
    if D is None:
        raise ConfigError("analyze needs a depth: set plane.D_mm or pass --D-mm")
    if scan.steps < 3:
        raise UsageError(f"scan needs at least 3 steps, got {scan.steps}")
    curve = scan_resolution(
        run.optical_system, D, scan.axis, scan.theta_min_deg, scan.theta_max_deg,
        scan.steps, z_i_override_mm=run.z_i_override_mm, workers=args.workers)
    fov = extract_fov(curve, threshold_ratio=scan.threshold_ratio)
    out = Path(args.out or run.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_curve_csv(curve, out / "curve.csv")
    write_fov_json(fov, out / "fov.json")
    log.info("wrote %s and %s", out / "curve.csv", out / "fov.json")
    return 0


def cmd_reconstruct(args) -> int:
    run = RunConfig.from_file(args.config)
    eis = manifest_io.load_elemental_set(
        args.manifest, aperture_shape=run.optical_system.aperture_shape)
    plane = run.plane
    if plane is None:
        raise ConfigError("reconstruct needs a plane block in the config")
    theta_x = args.theta_x_deg if args.theta_x_deg is not None else plane.theta_x_deg
    theta_y = args.theta_y_deg if args.theta_y_deg is not None else plane.theta_y_deg
    D = args.D_mm if args.D_mm is not None else plane.axial_offset_mm
    plane = TiltedPlaneSpec(theta_x, theta_y, D, plane.grid)
    recon = reconstruct(
        eis, plane, mode=args.mode, strip_width_mm=args.strip_width_mm,
        z_i_override_mm=run.z_i_override_mm, impulse_psf=args.impulse_psf,
        workers=args.workers)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    peak = float(recon.field.values.max())
    scale = MAXVAL_16 / peak if peak > 0 else 1.0
    # field is [ix, iy]; image rows run top-down along -y
    raster = np.round(recon.field.values.T[::-1] * scale).astype(np.uint16)
    write_pgm16(out, raster)
    sidecar = {
        "theta_x_deg": plane.theta_x_deg,
        "theta_y_deg": plane.theta_y_deg,
        "D_mm": plane.axial_offset_mm,
        "sample_pitch_mm": plane.grid.sample_pitch_mm,
        "mode": recon.mode,
        "normalization_max": peak,
    }
    with open(out.with_suffix(".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    log.info("wrote %s", out)
    return 0


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiltview",
        description="Lenslet-array integral-imaging analysis and free-view reconstruction")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="capture a synthetic scene into elemental images")
    synth.add_argument("--config", required=True)
    synth.add_argument("--scene", required=True)
    synth.add_argument("--out", default=None)
    synth.add_argument("--pixels-x", type=int, default=64)
    synth.add_argument("--pixels-y", type=int, default=64)
    synth.add_argument("--pixel-pitch-mm", type=float, default=None)
    synth.set_defaults(func=cmd_synth)

    analyze = sub.add_parser("analyze", help="tilt-angle resolution scan and field of view")
    analyze.add_argument("--config", required=True)
    analyze.add_argument("--out", default=None)
    analyze.add_argument("--D-mm", dest="D_mm", type=float, default=None)
    analyze.add_argument("--steps", type=int, default=None)
    analyze.add_argument("--workers", type=int, default=1)
    analyze.set_defaults(func=cmd_analyze)

    recon = sub.add_parser("reconstruct", help="back-project elemental images onto a plane")
    recon.add_argument("--config", required=True)
    recon.add_argument("--manifest", required=True)
    recon.add_argument("--mode", choices=("geometric", "diffraction"), default="geometric")
    recon.add_argument("--theta-x-deg", dest="theta_x_deg", type=float, default=None)
    recon.add_argument("--theta-y-deg", dest="theta_y_deg", type=float, default=None)
    recon.add_argument("--D-mm", dest="D_mm", type=float, default=None)
    recon.add_argument("--out", required=True)
    recon.add_argument("--impulse-psf", action="store_true",
                       help="debug: replace the defocus PSF with a discrete delta")
    recon.add_argument("--strip-width-mm", type=float, default=None)
    recon.add_argument("--workers", type=int, default=1)
    recon.set_defaults(func=cmd_reconstruct)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("TILTVIEW_LOG_LEVEL", "INFO"))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.exit(2, f"tiltview: {exc}\n")
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
