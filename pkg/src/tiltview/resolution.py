"""Spot-size and field-of-view analysis of an on-axis point source.

The visualized point source on a tilted plane is the sum of one tilted
Gaussian contribution per lenslet; the spot size is the normalized radial
second moment of that intensity, and the field of view is the tilt range
over which the spot stays below ``threshold_ratio`` times its minimum.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .optics import (
    BeamParameters,
    OpticalSystemConfig,
    PlaneGrid,
    ScalarField2D,
    TiltedPlaneSpec,
    UnderResolvedGridError,
)


class DegenerateFieldError(ValueError):
    """Raised when a moment is requested of an all-zero field."""


@dataclass
class SpotProfile:
    """Intensity of the visualized on-axis point source on a tilted plane."""

    plane: TiltedPlaneSpec
    intensity: ScalarField2D
    source_depth_mm: float


@dataclass(frozen=True)
class ResolutionCurve:
    """Radial spot extent versus tilt angle for one optical configuration."""

    samples: tuple[tuple[float, float, float], ...]  # (theta_x_deg, theta_y_deg, extent_mm)
    config_digest: str

    def swept_angles(self) -> np.ndarray:
        tx = np.array([s[0] for s in self.samples])
        ty = np.array([s[1] for s in self.samples])
        return tx if np.ptp(tx) >= np.ptp(ty) else ty

    def extents(self) -> np.ndarray:
        return np.array([s[2] for s in self.samples])


@dataclass(frozen=True)
class FovResult:
    """Tilt range within which the spot stays below threshold_ratio x minimum.

    ``fov_negative_deg`` / ``fov_positive_deg`` are ``None`` when the curve
    never crosses the threshold on that side (open-ended).
    """

    threshold_ratio: float
    min_extent_mm: float
    fov_negative_deg: float | None
    fov_positive_deg: float | None


def lenslet_tilt(p: int, q: int, D_mm: float, theta_x_deg: float, theta_y_deg: float,
                 cfg: OpticalSystemConfig) -> tuple[float, float]:
    """Tilt of lenslet (p, q)'s beam relative to the viewing direction, degrees."""
    if D_mm <= 0:
        raise ValueError("source depth must be positive")
    cx, cy = cfg.lenslet_center(p, q)
    tpx = theta_x_deg - math.degrees(math.atan(cx / D_mm))
    tpy = theta_y_deg - math.degrees(math.atan(cy / D_mm))
    return tpx, tpy


def lenslet_pixel_distance(p: int, q: int, D_mm: float, g_mm: float,
                           cfg: OpticalSystemConfig) -> float:
    """Distance from the on-axis image point to lenslet (p, q)'s elemental pixel."""
    cx, cy = cfg.lenslet_center(p, q)
    scale = (D_mm + g_mm) / D_mm
    return math.sqrt((D_mm + g_mm) ** 2 + scale**2 * (cx**2 + cy**2))


def point_source_intensity(x_t, y_t, p: int, q: int, D_mm: float,
                           cfg: OpticalSystemConfig, beam: BeamParameters,
                           theta_x_deg: float = 0.0, theta_y_deg: float = 0.0):
    """Contribution of lenslet (p, q) to the spot intensity at (x_t, y_t).

    A tilted Gaussian centered on the image point, weighted by the
    inverse-square pixel distance so that the central lenslet reproduces the
    untilted on-axis beam intensity exactly. Broadcasts over array inputs.
    """
    tpx_deg, tpy_deg = lenslet_tilt(p, q, D_mm, theta_x_deg, theta_y_deg, cfg)
    tpx, tpy = math.radians(tpx_deg), math.radians(tpy_deg)
    x_t = np.asarray(x_t, dtype=float)
    y_t = np.asarray(y_t, dtype=float)
    z_loc = D_mm + x_t * math.sin(tpx) + y_t * math.sin(tpy)
    wx = beam.width_x(z_loc)
    wy = beam.width_y(z_loc)
    d = lenslet_pixel_distance(p, q, D_mm, cfg.gap_mm, cfg)
    weight = (D_mm + cfg.gap_mm) ** 2 / d**2
    amp = 2.0 * beam.power / (math.pi * wx * wy) * weight
    arg = (x_t * math.cos(tpx)) ** 2 / wx**2 + (y_t * math.cos(tpy)) ** 2 / wy**2
    out = amp * np.exp(-2.0 * arg)
    return float(out) if out.ndim == 0 else out


def required_sample_pitch(cfg: OpticalSystemConfig, beam: BeamParameters) -> float:
    """Coarsest grid pitch that still resolves the narrowest beam."""
    if beam.is_collimated:
        return min(cfg.pitch_x_mm, cfg.pitch_y_mm) / 8.0
    return min(beam.waist_x_mm, beam.waist_y_mm) / 4.0


def aggregate_spot(plane: TiltedPlaneSpec, D_mm: float, cfg: OpticalSystemConfig,
                   beam: BeamParameters, workers: int = 1) -> SpotProfile:
    """Sum the per-lenslet contributions over the whole array.

    The reduction runs in fixed lexicographic (p, q) order regardless of
    ``workers``, so results are bit-identical across thread counts.
    """
    limit = required_sample_pitch(cfg, beam)
    pitch = plane.grid.sample_pitch_mm
    if pitch > limit * (1.0 + 1e-12):
        raise UnderResolvedGridError(
            f"plane sample pitch {pitch:.6g} mm under-resolves the beam; "
            f"required sample_pitch <= {limit:.6g} mm",
            required_pitch_mm=limit,
        )
    xs, ys = plane.grid.xs(), plane.grid.ys()
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    indices = [(p, q) for p in range(cfg.m) for q in range(cfg.n)]

    def one(pq):
        p, q = pq
        return point_source_intensity(X, Y, p, q, D_mm, cfg, beam,
                                      plane.theta_x_deg, plane.theta_y_deg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, indices))
    else:
        parts = [one(pq) for pq in indices]
    total = np.zeros_like(X)
    for part in parts:  # fixed order regardless of completion order
        total += part
    field = ScalarField2D(total, xs, ys, pitch)
    return SpotProfile(plane=plane, intensity=field, source_depth_mm=D_mm)


def radial_extent(spot) -> float:
    """Normalized radial second moment sqrt(<x^2 + y^2>) of an intensity field.

    Accepts a SpotProfile or a bare ScalarField2D; invariant under uniform
    intensity rescaling.
    """
    field = spot.intensity if isinstance(spot, SpotProfile) else spot
    total = field.values.sum()
    if total <= 0:
        raise DegenerateFieldError("radial extent is undefined for an all-zero field")
    X, Y = field.meshgrid()
    return float(np.sqrt(((X**2 + Y**2) * field.values).sum() / total))


def default_plane_grid(cfg: OpticalSystemConfig, beam: BeamParameters, D_mm: float,
                       max_theta_deg: float) -> PlaneGrid:
    """Grid that resolves the waist and spans 6x the widest beam in the scan."""
    pitch = required_sample_pitch(cfg, beam)
    cx, cy = cfg.lenslet_centers()
    spread_x = math.degrees(math.atan(np.abs(cx).max() / D_mm)) if cfg.m > 1 else 0.0
    spread_y = math.degrees(math.atan(np.abs(cy).max() / D_mm)) if cfg.n > 1 else 0.0
    tmax = min(89.0, abs(max_theta_deg) + max(spread_x, spread_y))
    sin_t = math.sin(math.radians(tmax))
    half_width = 6.0 * max(beam.waist_x_mm, beam.waist_y_mm)
    for _ in range(16):
        z_span = D_mm + np.array([-1.0, 1.0]) * half_width * sin_t
        w = max(float(np.max(beam.width_x(z_span))), float(np.max(beam.width_y(z_span))))
        new_hw = 6.0 * w
        if abs(new_hw - half_width) <= 1e-9 * half_width:
            break
        half_width = new_hw
    return PlaneGrid(half_width, half_width, pitch)


def scan_resolution(cfg: OpticalSystemConfig, D_mm: float, axis: str,
                    theta_min_deg: float, theta_max_deg: float, steps: int,
                    z_i_override_mm: float | None = None,
                    plane_grid: PlaneGrid | None = None,
                    workers: int = 1) -> ResolutionCurve:
    """Radial spot extent versus tilt angle along one scan axis."""
    if steps < 3:
        raise ValueError(f"scan needs at least 3 steps, got {steps}")
    if theta_min_deg >= theta_max_deg:
        raise ValueError("scan range must satisfy theta_min < theta_max")
    if max(abs(theta_min_deg), abs(theta_max_deg)) > 60.0:
        raise ValueError("scan range must stay within +/-60 degrees")
    if axis not in ("x", "y", "diagonal"):
        raise ValueError(f"scan axis must be 'x', 'y' or 'diagonal', got {axis!r}")
    beam = BeamParameters.from_config(cfg, z_i_override_mm=z_i_override_mm)
    extreme = max(abs(theta_min_deg), abs(theta_max_deg))
    grid = plane_grid or default_plane_grid(cfg, beam, D_mm, extreme)
    thetas = np.linspace(theta_min_deg, theta_max_deg, steps)
    samples = []
    for theta in thetas:
        tx = float(theta) if axis in ("x", "diagonal") else 0.0
        ty = float(theta) if axis in ("y", "diagonal") else 0.0
        plane = TiltedPlaneSpec(tx, ty, D_mm, grid)
        spot = aggregate_spot(plane, D_mm, cfg, beam, workers=workers)
        samples.append((tx, ty, radial_extent(spot)))
    return ResolutionCurve(samples=tuple(samples), config_digest=cfg.digest())


def extract_fov(curve: ResolutionCurve, threshold_ratio: float = 1.5) -> FovResult:
    """First outward crossings of threshold_ratio x the curve minimum.

    Crossings are located by linear interpolation between bracketing
    samples; a side that never crosses is reported as open-ended (None).
    """
    if not curve.samples:
        raise ValueError("cannot extract a field of view from an empty curve")
    angles = curve.swept_angles()
    extents = curve.extents()
    i_min = int(np.argmin(extents))
    threshold = threshold_ratio * extents[i_min]

    def first_crossing(order) -> float | None:
        prev = i_min
        for j in order:
            if extents[j] >= threshold and extents[j] > extents[prev]:
                t = (threshold - extents[prev]) / (extents[j] - extents[prev])
                return float(angles[prev] + t * (angles[j] - angles[prev]))
            prev = j
        return None

    pos = first_crossing(range(i_min + 1, len(extents)))
    neg = first_crossing(range(i_min - 1, -1, -1))
    return FovResult(
        threshold_ratio=threshold_ratio,
        min_extent_mm=float(extents[i_min]),
        fov_negative_deg=neg,
        fov_positive_deg=pos,
    )


def write_curve_csv(curve: ResolutionCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta_x_deg", "theta_y_deg", "radial_extent_mm"])
        for tx, ty, ext in curve.samples:
            writer.writerow([f"{tx:.9e}", f"{ty:.9e}", f"{ext:.9e}"])


def write_fov_json(fov: FovResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(
            {
                "threshold_ratio": fov.threshold_ratio,
                "min_extent_mm": fov.min_extent_mm,
                "fov_negative_deg": fov.fov_negative_deg,
                "fov_positive_deg": fov.fov_positive_deg,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
