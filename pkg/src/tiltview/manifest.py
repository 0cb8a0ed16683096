"""Manifest-based storage of elemental-image sets.

A set is saved as ``manifest.json`` plus one 16-bit PGM per lenslet,
``e_{p:02d}_{q:02d}.pgm``, all normalized by the set-wide maximum so
relative intensities survive quantization.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .optics import OpticalSystemConfig
from .pgm import MAXVAL_16, read_pgm, write_pgm16
from .reconstruction import ElementalImageSet

MANIFEST_NAME = "manifest.json"


def save_elemental_set(eis: ElementalImageSet, out_dir) -> Path:
    """Write the manifest and PGM files; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = eis.capture_config
    peak = float(eis.images.max())
    scale = MAXVAL_16 / peak if peak > 0 else 1.0
    entries = []
    for p in range(cfg.m):
        for q in range(cfg.n):
            name = f"e_{p:02d}_{q:02d}.pgm"
            write_pgm16(out / name, np.round(eis.images[p, q] * scale).astype(np.uint16))
            entries.append({"p": p, "q": q, "file": name})
    manifest = {
        "m": cfg.m,
        "n": cfg.n,
        "pitch_x_mm": cfg.pitch_x_mm,
        "pitch_y_mm": cfg.pitch_y_mm,
        "g_mm": cfg.gap_mm,
        "f_mm": cfg.focal_length_mm,
        "wavelength_nm": cfg.wavelength_nm,
        "pixel_pitch_mm": eis.pixel_pitch_mm,
        "pixels_x": eis.pixels_x,
        "pixels_y": eis.pixels_y,
        "images": entries,
    }
    path = out / MANIFEST_NAME
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def load_manifest(manifest_path) -> dict:
    with open(manifest_path) as fh:
        return json.load(fh)


def load_elemental_set(manifest_path, aperture_shape: str = "ellipse") -> ElementalImageSet:
    """Load a saved set; intensities come back in 16-bit units (0..65535)."""
    path = Path(manifest_path)
    man = load_manifest(path)
    cfg = OpticalSystemConfig(
        m=man["m"],
        n=man["n"],
        pitch_x_mm=man["pitch_x_mm"],
        pitch_y_mm=man["pitch_y_mm"],
        gap_mm=man["g_mm"],
        focal_length_mm=man["f_mm"],
        wavelength_nm=man["wavelength_nm"],
        aperture_shape=aperture_shape,
    )
    shape = (man["pixels_y"], man["pixels_x"])
    images = np.zeros((cfg.m, cfg.n) + shape)
    seen = set()
    for entry in man["images"]:
        p, q = entry["p"], entry["q"]
        img = read_pgm(path.parent / entry["file"]).astype(float)
        if img.shape != shape:
            raise ValueError(
                f"{entry['file']}: image shape {img.shape} does not match manifest {shape}"
            )
        images[p, q] = img
        seen.add((p, q))
    missing = {(p, q) for p in range(cfg.m) for q in range(cfg.n)} - seen
    if missing:
        raise ValueError(f"manifest is missing {len(missing)} elemental images, e.g. {sorted(missing)[0]}")
    return ElementalImageSet(images=images, pixel_pitch_mm=man["pixel_pitch_mm"], capture_config=cfg)
