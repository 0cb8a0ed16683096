"""System geometry and Gaussian-beam primitives for lenslet-array imaging.

All lengths are millimetres and all interface angles are degrees; trig is
done in radians internally. The one deliberate unit exception is the config
wavelength, which is nanometres because that is how visible-light sources
are quoted.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

NM_PER_MM = 1e6

#: Sentinel for a collimated (focused-mode) beam whose focus is at infinity.
INFINITE_FOCUS = math.inf


class FocusedModeError(ValueError):
    """Raised when a finite-focus formula is evaluated on a collimated beam."""


class UnderResolvedGridError(ValueError):
    """Raised when a sampling grid is too coarse for the narrowest beam."""

    def __init__(self, message: str, required_pitch_mm: float):
        super().__init__(message)
        self.required_pitch_mm = required_pitch_mm


def image_distance(f_mm: float, g_mm: float, focus_epsilon: float = 1e-6) -> float:
    """Conjugate distance from the lens law 1/z = 1/f - 1/g.

    Returns ``INFINITE_FOCUS`` when g is within ``focus_epsilon`` (relative
    to 1/f) of the focal length, and a negative value (virtual focus) when
    g < f outside that band.
    """
    if f_mm <= 0 or g_mm <= 0:
        raise ValueError(f"focal length and gap must be positive, got f={f_mm}, g={g_mm}")
    inv = 1.0 / f_mm - 1.0 / g_mm
    if abs(inv) < focus_epsilon / f_mm:
        return INFINITE_FOCUS
    return 1.0 / inv


def waist_at_focus(wavelength_mm: float, z_i_mm: float, pitch_mm: float) -> float:
    """Diffraction-limited beam waist of a lenslet of the given pitch.

    Airy-scaled: w0 = 2.44 * lambda * z_i / pitch. A virtual (negative)
    focus distance gives the same waist magnitude.
    """
    if wavelength_mm <= 0 or pitch_mm <= 0:
        raise ValueError("wavelength and pitch must be positive")
    if not math.isfinite(z_i_mm):
        raise FocusedModeError(
            "waist is undefined for a collimated beam; use the pitch/2 fallback width"
        )
    if z_i_mm == 0:
        raise ValueError("focus distance must be nonzero")
    return 2.44 * wavelength_mm * abs(z_i_mm) / pitch_mm


def rayleigh_range(waist_mm: float, wavelength_mm: float) -> float:
    """Rayleigh range b = pi * w0^2 / (2 * lambda)."""
    if waist_mm <= 0 or wavelength_mm <= 0:
        raise ValueError("waist and wavelength must be positive")
    return math.pi * waist_mm**2 / (2.0 * wavelength_mm)


def beam_width(z_mm, z_focus_mm: float, waist_mm: float, rayleigh_mm: float):
    """Gaussian half-width w(z) = w0 * sqrt(1 + 4 ((z - z_focus)/b)^2).

    For a collimated beam (infinite focus) the width is the constant
    ``waist_mm`` fallback. Accepts scalars or arrays for ``z_mm``.
    """
    if not math.isfinite(z_focus_mm):
        return waist_mm * np.ones_like(np.asarray(z_mm, dtype=float)) if np.ndim(z_mm) else waist_mm
    return waist_mm * np.sqrt(1.0 + 4.0 * ((np.asarray(z_mm, dtype=float) - z_focus_mm) / rayleigh_mm) ** 2)


@dataclass(frozen=True)
class OpticalSystemConfig:
    """Geometry of an m x n lenslet array in front of an ideal display."""

    m: int
    n: int
    pitch_x_mm: float
    pitch_y_mm: float
    gap_mm: float
    focal_length_mm: float
    wavelength_nm: float = 550.0
    aperture_shape: str = "ellipse"
    focus_epsilon: float = 1e-6
    strict_wavelength: bool = True

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(f"lenslet counts must be >= 1, got {self.m} x {self.n}")
        for name in ("pitch_x_mm", "pitch_y_mm", "gap_mm", "focal_length_mm", "wavelength_nm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.aperture_shape not in ("ellipse", "rectangle"):
            raise ValueError(f"aperture_shape must be 'ellipse' or 'rectangle', got {self.aperture_shape!r}")
        if self.strict_wavelength and not 380.0 <= self.wavelength_nm <= 780.0:
            raise ValueError(
                f"wavelength {self.wavelength_nm} nm outside the visible band [380, 780]; "
                "pass strict_wavelength=False to override"
            )
        if self.focus_epsilon <= 0:
            raise ValueError("focus_epsilon must be positive")

    @property
    def wavelength_mm(self) -> float:
        return self.wavelength_nm / NM_PER_MM

    def image_distance_mm(self) -> float:
        return image_distance(self.focal_length_mm, self.gap_mm, self.focus_epsilon)

    @property
    def is_focused(self) -> bool:
        return not math.isfinite(self.image_distance_mm())

    @property
    def mode(self) -> str:
        return "focused" if self.is_focused else "real_virtual"

    def lenslet_center(self, p: int, q: int) -> tuple[float, float]:
        """Lateral center of lenslet (p, q); lenslet (m/2, n/2) is on axis."""
        if not (0 <= p < self.m and 0 <= q < self.n):
            raise IndexError(f"lenslet index ({p}, {q}) outside {self.m} x {self.n} array")
        return ((p - self.m / 2) * self.pitch_x_mm, (q - self.n / 2) * self.pitch_y_mm)

    def lenslet_centers(self) -> tuple[np.ndarray, np.ndarray]:
        cx = (np.arange(self.m) - self.m / 2) * self.pitch_x_mm
        cy = (np.arange(self.n) - self.n / 2) * self.pitch_y_mm
        return cx, cy

    def digest(self) -> str:
        blob = json.dumps(
            {k: getattr(self, k) for k in self.__dataclass_fields__}, sort_keys=True
        ).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def lenslet_center(p: int, q: int, cfg: OpticalSystemConfig) -> tuple[float, float]:
    return cfg.lenslet_center(p, q)


@dataclass(frozen=True)
class BeamParameters:
    """Per-lenslet Gaussian-beam constants.

    In focused mode ``z_focus_mm`` is infinite, the Rayleigh ranges are
    infinite and the waists hold the collimated pitch/2 fallback width.
    """

    z_focus_mm: float
    waist_x_mm: float
    waist_y_mm: float
    rayleigh_x_mm: float
    rayleigh_y_mm: float
    power: float = 1.0

    def __post_init__(self):
        if self.power <= 0:
            raise ValueError("beam power must be positive")
        if self.waist_x_mm <= 0 or self.waist_y_mm <= 0:
            raise ValueError("waists must be positive")
        finite_focus = math.isfinite(self.z_focus_mm)
        if finite_focus != (math.isfinite(self.rayleigh_x_mm) and math.isfinite(self.rayleigh_y_mm)):
            raise ValueError("Rayleigh ranges must be finite exactly when the focus is finite")

    @classmethod
    def from_config(cls, cfg: OpticalSystemConfig, z_i_override_mm: float | None = None,
                    power: float = 1.0) -> "BeamParameters":
        z_i = cfg.image_distance_mm() if z_i_override_mm is None else float(z_i_override_mm)
        if not math.isfinite(z_i):
            # Focused mode: each pixel maps to a collimated bundle as wide as
            # the lenslet pupil, modelled as a constant pitch/2 half-width.
            return cls(
                z_focus_mm=INFINITE_FOCUS,
                waist_x_mm=cfg.pitch_x_mm / 2.0,
                waist_y_mm=cfg.pitch_y_mm / 2.0,
                rayleigh_x_mm=math.inf,
                rayleigh_y_mm=math.inf,
                power=power,
            )
        lam = cfg.wavelength_mm
        w0x = waist_at_focus(lam, z_i, cfg.pitch_x_mm)
        w0y = waist_at_focus(lam, z_i, cfg.pitch_y_mm)
        return cls(
            z_focus_mm=z_i,
            waist_x_mm=w0x,
            waist_y_mm=w0y,
            rayleigh_x_mm=rayleigh_range(w0x, lam),
            rayleigh_y_mm=rayleigh_range(w0y, lam),
            power=power,
        )

    @property
    def is_collimated(self) -> bool:
        return not math.isfinite(self.z_focus_mm)

    def width_x(self, z_mm):
        return beam_width(z_mm, self.z_focus_mm, self.waist_x_mm, self.rayleigh_x_mm)

    def width_y(self, z_mm):
        return beam_width(z_mm, self.z_focus_mm, self.waist_y_mm, self.rayleigh_y_mm)


@dataclass(frozen=True)
class PlaneGrid:
    """Symmetric midpoint sampling grid on a reconstruction plane."""

    half_width_x_mm: float
    half_width_y_mm: float
    sample_pitch_mm: float

    def __post_init__(self):
        if min(self.half_width_x_mm, self.half_width_y_mm, self.sample_pitch_mm) <= 0:
            raise ValueError("grid spans and sample pitch must be positive")

    def _axis(self, half_width: float) -> np.ndarray:
        count = max(1, round(2.0 * half_width / self.sample_pitch_mm))
        return (np.arange(count) - (count - 1) / 2.0) * self.sample_pitch_mm

    def xs(self) -> np.ndarray:
        return self._axis(self.half_width_x_mm)

    def ys(self) -> np.ndarray:
        return self._axis(self.half_width_y_mm)


@dataclass(frozen=True)
class TiltedPlaneSpec:
    """A sampled rectangular plane tilted about the lateral axes.

    The plane is centered on the longitudinal axis at depth
    ``axial_offset_mm`` and rotated by ``theta_x_deg`` / ``theta_y_deg``.
    """

    theta_x_deg: float
    theta_y_deg: float
    axial_offset_mm: float
    grid: PlaneGrid

    def __post_init__(self):
        if not (abs(self.theta_x_deg) < 90.0 and abs(self.theta_y_deg) < 90.0):
            raise ValueError("tilt angles must satisfy |theta| < 90 degrees")
        if self.axial_offset_mm <= 0:
            raise ValueError("axial offset must be positive")

    @property
    def theta_x_rad(self) -> float:
        return math.radians(self.theta_x_deg)

    @property
    def theta_y_rad(self) -> float:
        return math.radians(self.theta_y_deg)


def tilted_to_global(x_t, y_t, plane: TiltedPlaneSpec):
    """Map tilted-plane coordinates (x_t, y_t) to global (x, y, z)."""
    tx, ty = plane.theta_x_rad, plane.theta_y_rad
    x_t = np.asarray(x_t, dtype=float)
    y_t = np.asarray(y_t, dtype=float)
    x = x_t * math.cos(tx)
    y = y_t * math.cos(ty)
    z = x_t * math.sin(tx) + y_t * math.sin(ty) + plane.axial_offset_mm
    if x.ndim == 0:
        return float(x), float(y), float(z)
    return x, y, z


@dataclass
class ScalarField2D:
    """Nonnegative intensity sampled on a uniform physical grid.

    ``values`` is indexed ``[ix, iy]`` with ``xs``/``ys`` the sample-center
    coordinates along each axis.
    """

    values: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    sample_pitch_mm: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        if self.values.shape != (self.xs.size, self.ys.size):
            raise ValueError(
                f"field shape {self.values.shape} does not match grid "
                f"({self.xs.size}, {self.ys.size})"
            )
        if np.any(self.values < 0):
            raise ValueError("intensity field must be nonnegative")

    @classmethod
    def zeros(cls, xs: np.ndarray, ys: np.ndarray, sample_pitch_mm: float) -> "ScalarField2D":
        return cls(np.zeros((len(xs), len(ys))), xs, ys, sample_pitch_mm)

    def integral(self) -> float:
        """Midpoint-rule integral over the grid."""
        return float(self.values.sum()) * self.sample_pitch_mm**2

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs, self.ys, indexing="ij")
