"""Tests for the spot-profile / radial-extent / field-of-view analyzer."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiltview.optics import (
    BeamParameters,
    OpticalSystemConfig,
    PlaneGrid,
    ScalarField2D,
    TiltedPlaneSpec,
    UnderResolvedGridError,
)
from tiltview.resolution import (
    DegenerateFieldError,
    FovResult,
    ResolutionCurve,
    aggregate_spot,
    extract_fov,
    lenslet_pixel_distance,
    lenslet_tilt,
    point_source_intensity,
    radial_extent,
    scan_resolution,
    write_curve_csv,
    write_fov_json,
)


def rv_config(m=16, n=16):
    return OpticalSystemConfig(
        m=m, n=n, pitch_x_mm=10.0, pitch_y_mm=10.0, gap_mm=50.0, focal_length_mm=35.0
    )


def rv_beam(cfg):
    return BeamParameters.from_config(cfg, z_i_override_mm=360.0)


# ---------------------------------------------------------------------------
# per-lenslet geometry


def test_lenslet_tilt_central_is_view_angle():
    cfg = rv_config()
    assert lenslet_tilt(8, 8, 360.0, 12.5, -3.0, cfg) == (12.5, -3.0)


def test_lenslet_tilt_offsets():
    cfg = rv_config()
    tpx, _ = lenslet_tilt(9, 8, 360.0, 0.0, 0.0, cfg)  # c_p = +10 mm
    assert tpx == pytest.approx(-1.5911403, abs=1e-6)
    tpx, _ = lenslet_tilt(0, 8, 360.0, 15.0, 0.0, cfg)  # c_p = -80 mm
    assert tpx == pytest.approx(15.0 + math.degrees(math.atan(80.0 / 360.0)), rel=1e-12)
    tpx, _ = lenslet_tilt(15, 8, 360.0, 15.0, 0.0, cfg)  # c_p = +70 mm
    assert tpx == pytest.approx(15.0 - math.degrees(math.atan(70.0 / 360.0)), rel=1e-12)


def test_lenslet_tilt_eighty_mm_offset_value():
    # a lenslet 80 mm off axis seen from 360 mm away under a 15 degree view
    cfg = OpticalSystemConfig(m=17, n=17, pitch_x_mm=10.0, pitch_y_mm=10.0,
                              gap_mm=50.0, focal_length_mm=35.0)
    tpx, _ = lenslet_tilt(16, 8, 360.0, 15.0, 0.0, cfg)  # c_p = (16 - 8.5)*10 = 75
    assert tpx == pytest.approx(15.0 - math.degrees(math.atan(75.0 / 360.0)), rel=1e-12)
    assert 15.0 - math.degrees(math.atan(80.0 / 360.0)) == pytest.approx(2.4711923, abs=1e-6)


def test_lenslet_pixel_distance_central_is_axial():
    cfg = rv_config()
    assert lenslet_pixel_distance(8, 8, 360.0, 50.0, cfg) == pytest.approx(410.0, rel=1e-12)


def test_lenslet_pixel_distance_offset_value():
    cfg = rv_config()
    assert lenslet_pixel_distance(9, 8, 360.0, 50.0, cfg) == pytest.approx(
        410.1581485, abs=1e-6
    )


def test_lenslet_pixel_distance_monotone_in_offset():
    cfg = rv_config()
    dists = [lenslet_pixel_distance(p, 8, 360.0, 50.0, cfg) for p in range(8, 16)]
    assert all(b > a for a, b in zip(dists, dists[1:]))


# ---------------------------------------------------------------------------
# point_source_intensity


def test_central_peak_matches_on_axis_formula():
    cfg = rv_config()
    beam = rv_beam(cfg)
    peak = point_source_intensity(0.0, 0.0, 8, 8, 360.0, cfg, beam)
    assert peak == pytest.approx(2.0 / (math.pi * beam.waist_x_mm**2), rel=1e-12)


def test_gaussian_falloff_one_over_e():
    cfg = rv_config()
    beam = rv_beam(cfg)
    peak = point_source_intensity(0.0, 0.0, 8, 8, 360.0, cfg, beam)
    x = beam.waist_x_mm / math.sqrt(2.0)
    val = point_source_intensity(x, 0.0, 8, 8, 360.0, cfg, beam)
    assert val == pytest.approx(peak / math.e, rel=1e-12)


@given(
    x=st.floats(min_value=-0.5, max_value=0.5),
    y=st.floats(min_value=-0.5, max_value=0.5),
    p=st.integers(min_value=0, max_value=15),
    q=st.integers(min_value=0, max_value=15),
)
@settings(max_examples=60)
def test_intensity_strictly_positive(x, y, p, q):
    cfg = rv_config()
    beam = rv_beam(cfg)
    assert point_source_intensity(x, y, p, q, 360.0, cfg, beam, 10.0, 0.0) > 0.0


def test_intensity_broadcasts():
    cfg = rv_config()
    beam = rv_beam(cfg)
    xs = np.linspace(-0.1, 0.1, 7)
    out = point_source_intensity(xs, 0.0, 8, 8, 360.0, cfg, beam)
    assert out.shape == (7,)
    assert np.all(out > 0)


# ---------------------------------------------------------------------------
# aggregate_spot


def spot_plane(hw=0.3, pitch=0.006, tx=0.0):
    return TiltedPlaneSpec(tx, 0.0, 360.0, PlaneGrid(hw, hw, pitch))


def test_single_lenslet_spot_equals_lone_contribution():
    cfg = OpticalSystemConfig(m=1, n=1, pitch_x_mm=10.0, pitch_y_mm=10.0,
                              gap_mm=50.0, focal_length_mm=35.0)
    beam = rv_beam(cfg)
    plane = spot_plane()
    spot = aggregate_spot(plane, 360.0, cfg, beam)
    X, Y = spot.intensity.meshgrid()
    expected = point_source_intensity(X, Y, 0, 0, 360.0, cfg, beam)
    np.testing.assert_array_equal(spot.intensity.values, expected)


def test_array_spot_dominates_central_lenslet():
    cfg = rv_config()
    beam = rv_beam(cfg)
    plane = spot_plane()
    spot = aggregate_spot(plane, 360.0, cfg, beam)
    X, Y = spot.intensity.meshgrid()
    central = point_source_intensity(X, Y, 8, 8, 360.0, cfg, beam)
    assert spot.intensity.values.sum() >= central.sum()
    assert np.all(spot.intensity.values >= central)


def test_spot_nearly_even_at_normal_view():
    # the centered indexing puts one extra lenslet on the negative side
    # (centers -80..+70 mm), so evenness holds to the far-tail level only
    cfg = rv_config()
    beam = rv_beam(cfg)
    spot = aggregate_spot(spot_plane(), 360.0, cfg, beam)
    v = spot.intensity.values
    peak = v.max()
    np.testing.assert_allclose(v, v[::-1, :], atol=1e-5 * peak)
    np.testing.assert_allclose(v, v[:, ::-1], atol=1e-5 * peak)


def test_under_resolved_grid_rejected_with_required_pitch():
    cfg = rv_config()
    beam = rv_beam(cfg)
    plane = spot_plane(pitch=0.2)
    with pytest.raises(UnderResolvedGridError) as err:
        aggregate_spot(plane, 360.0, cfg, beam)
    assert err.value.required_pitch_mm == pytest.approx(beam.waist_x_mm / 4.0, rel=1e-12)
    assert "required sample_pitch" in str(err.value)


def test_aggregate_spot_deterministic_across_workers():
    cfg = rv_config(m=6, n=6)
    beam = rv_beam(cfg)
    plane = spot_plane()
    serial = aggregate_spot(plane, 360.0, cfg, beam, workers=1)
    threaded = aggregate_spot(plane, 360.0, cfg, beam, workers=4)
    np.testing.assert_array_equal(serial.intensity.values, threaded.intensity.values)


# ---------------------------------------------------------------------------
# radial_extent


def _field_from(values, xs, ys, pitch):
    return ScalarField2D(values, xs, ys, pitch)


def test_radial_extent_gaussian_oracle():
    w0 = 0.05
    xs = np.linspace(-0.4, 0.4, 513)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    gauss = np.exp(-2.0 * (X**2 + Y**2) / w0**2)
    ext = radial_extent(_field_from(gauss, xs, xs, xs[1] - xs[0]))
    assert ext == pytest.approx(w0 / math.sqrt(2.0), rel=0.01)


def test_radial_extent_disk_oracle():
    R = 0.2
    xs = np.linspace(-0.5, 0.5, 1025)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    disk = (X**2 + Y**2 <= R**2).astype(float)
    ext = radial_extent(_field_from(disk, xs, xs, xs[1] - xs[0]))
    assert ext == pytest.approx(R / math.sqrt(2.0), rel=0.01)


@given(scale=st.floats(min_value=1e-6, max_value=1e6))
@settings(max_examples=40)
def test_radial_extent_scale_invariant(scale):
    xs = np.linspace(-1.0, 1.0, 33)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    base = np.exp(-(X**2 + Y**2))
    e1 = radial_extent(_field_from(base, xs, xs, xs[1] - xs[0]))
    e2 = radial_extent(_field_from(base * scale, xs, xs, xs[1] - xs[0]))
    assert e2 == pytest.approx(e1, rel=1e-9)


def test_radial_extent_rejects_zero_field():
    xs = np.linspace(-1.0, 1.0, 9)
    with pytest.raises(DegenerateFieldError):
        radial_extent(_field_from(np.zeros((9, 9)), xs, xs, 0.25))


# ---------------------------------------------------------------------------
# scan_resolution


def test_scan_validation():
    cfg = rv_config()
    with pytest.raises(ValueError):
        scan_resolution(cfg, 360.0, "x", -40, 40, 2)
    with pytest.raises(ValueError):
        scan_resolution(cfg, 360.0, "x", -70, 40, 5)
    with pytest.raises(ValueError):
        scan_resolution(cfg, 360.0, "z", -40, 40, 5)
    with pytest.raises(ValueError):
        scan_resolution(cfg, 360.0, "x", 40, -40, 5)


def test_scan_curve_nearly_even():
    # mirror symmetry is broken only by the one-lenslet centering offset
    cfg = rv_config()
    curve = scan_resolution(cfg, 360.0, "x", -30, 30, 7, z_i_override_mm=360.0)
    ext = curve.extents()
    np.testing.assert_allclose(ext, ext[::-1], rtol=0.02)


def test_scan_focus_is_global_minimum_within_step():
    cfg = rv_config()
    curve = scan_resolution(cfg, 360.0, "x", -40, 40, 17, z_i_override_mm=360.0)
    ext = curve.extents()
    angles = curve.swept_angles()
    step = angles[1] - angles[0]
    assert abs(angles[int(np.argmin(ext))]) <= step + 1e-9


def test_scan_extent_at_normal_view_frozen():
    cfg = rv_config()
    curve = scan_resolution(cfg, 360.0, "x", -1, 1, 3, z_i_override_mm=360.0)
    assert curve.extents()[1] == pytest.approx(0.0344422, abs=2e-6)


def test_scan_axes():
    cfg = rv_config(m=5, n=5)
    cy = scan_resolution(cfg, 360.0, "y", -10, 10, 3, z_i_override_mm=360.0)
    assert all(s[0] == 0.0 for s in cy.samples)
    cd = scan_resolution(cfg, 360.0, "diagonal", -10, 10, 3, z_i_override_mm=360.0)
    assert all(s[0] == s[1] for s in cd.samples)


def test_tail_truncation_controlled():
    # doubling the grid half-width moves the extent by well under 1%
    cfg = rv_config()
    beam = rv_beam(cfg)
    pitch = beam.waist_x_mm / 4.0
    e = []
    for hw in (0.3, 0.6):
        grid = PlaneGrid(hw, hw, pitch)
        curve = scan_resolution(cfg, 360.0, "x", -1, 1, 3,
                                z_i_override_mm=360.0, plane_grid=grid)
        e.append(curve.extents()[1])
    assert abs(e[1] - e[0]) / e[0] < 0.01


# ---------------------------------------------------------------------------
# extract_fov


def _curve(samples):
    return ResolutionCurve(samples=tuple(samples), config_digest="test")


def test_fov_linear_interpolation_example():
    curve = _curve([(0.0, 0.0, 1.0), (10.0, 0.0, 1.2), (20.0, 0.0, 1.6)])
    fov = extract_fov(curve)
    assert fov.fov_positive_deg == pytest.approx(17.5, rel=1e-12)
    assert fov.fov_negative_deg is None
    assert fov.min_extent_mm == 1.0


def test_fov_flat_curve_open_ended():
    curve = _curve([(t, 0.0, 2.0) for t in np.linspace(-30, 30, 7)])
    fov = extract_fov(curve)
    assert fov.fov_negative_deg is None
    assert fov.fov_positive_deg is None


def test_fov_symmetric_crossings():
    angles = np.linspace(-20, 20, 41)
    curve = _curve([(t, 0.0, 1.0 + (t / 10.0) ** 2) for t in angles])
    fov = extract_fov(curve)
    # 1 + (t/10)^2 = 1.5 at t = sqrt(0.5)*10
    expect = math.sqrt(0.5) * 10.0
    assert fov.fov_positive_deg == pytest.approx(expect, abs=0.2)
    assert fov.fov_negative_deg == pytest.approx(-expect, abs=0.2)


def test_fov_threshold_ratio_respected():
    curve = _curve([(0.0, 0.0, 1.0), (10.0, 0.0, 3.0)])
    fov = extract_fov(curve, threshold_ratio=2.0)
    assert fov.threshold_ratio == 2.0
    assert fov.fov_positive_deg == pytest.approx(5.0, rel=1e-12)


# ---------------------------------------------------------------------------
# serialization


def test_curve_csv_format(tmp_path):
    curve = _curve([(0.0, 0.0, 1.0), (10.0, 0.0, 1.23456789012)])
    path = tmp_path / "curve.csv"
    write_curve_csv(curve, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "theta_x_deg,theta_y_deg,radial_extent_mm"
    assert len(lines) == 3
    # values carry >= 9 significant digits
    assert float(lines[2].split(",")[2]) == pytest.approx(1.23456789012, rel=1e-9)


def test_fov_json_nulls(tmp_path):
    import json

    fov = FovResult(threshold_ratio=1.5, min_extent_mm=0.5,
                    fov_negative_deg=None, fov_positive_deg=12.5)
    path = tmp_path / "fov.json"
    write_fov_json(fov, path)
    doc = json.loads(path.read_text())
    assert doc == {
        "threshold_ratio": 1.5,
        "min_extent_mm": 0.5,
        "fov_negative_deg": None,
        "fov_positive_deg": 12.5,
    }
