import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scorepath.errors import PoseOutsideCorridor
from scorepath.sensor import Corridor, Perturbation, SensorConfig, render_batch, render_depth, sensor_map

C = Corridor()
CFG = SensorConfig()


def test_centered_scan_mirror_symmetric():
    scan = render_depth(C, CFG, (0.0, 0.0))
    assert np.allclose(scan, scan[::-1], rtol=0, atol=1e-12)


def test_perpendicular_ray():
    cfg = SensorConfig(n_rays=3, fov=3.0)
    # rotate the pose so the outer ray points straight at the left wall
    scan = render_depth(C, cfg, (math.pi / 2 - 1.5, 0.0))
    assert scan[-1] == pytest.approx(1.22, abs=1e-12)


def test_oblique_ray():
    # a ray at world angle 0.2 + 0.3 from d = 0.5
    cfg = SensorConfig(n_rays=3, fov=0.6)
    scan = render_depth(C, cfg, (0.2, 0.5))
    assert scan[-1] == pytest.approx((1.22 - 0.5) / math.sin(0.5), abs=1e-12)


def test_range_clamped():
    scan = render_depth(C, SensorConfig(n_rays=5), (0.0, 0.0))
    assert scan[2] == CFG.max_range


def test_outside_corridor():
    with pytest.raises(PoseOutsideCorridor):
        render_depth(C, CFG, (0.0, 1.3))


def test_noise_is_seeded():
    cfg = SensorConfig(noise_sigma=0.05)
    a = render_depth(C, cfg, (0.1, 0.2), seed=3)
    b = render_depth(C, cfg, (0.1, 0.2), seed=3)
    c = render_depth(C, cfg, (0.1, 0.2), seed=4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.all(a >= 1e-6) and np.all(a <= cfg.max_range)


def test_sensor_map_strips_noise_by_default():
    H = sensor_map(C, SensorConfig(noise_sigma=0.1))
    assert H.deterministic


@given(st.floats(-1.4, 1.4), st.floats(-1.2, 1.2), st.floats(0, 100), st.floats(0, 100))
def test_translation_invariant(th, d, s1, s2):
    H = sensor_map(C, CFG)
    assert np.array_equal(H(th, d, s1), H(th, d, s2))


@given(st.floats(-1.4, 1.4), st.floats(-1.2, 1.2))
def test_reflection_reverses_scan(th, d):
    H = sensor_map(C, CFG)
    assert np.allclose(H(th, d), H(-th, -d)[::-1], rtol=1e-12, atol=1e-12)


def test_range_derivative_in_d():
    # ray at world angle psi hits the left wall at (w_half - d)/sin(psi)
    H = sensor_map(C, CFG)
    psi = CFG.ray_angles[-1]
    h = 1e-5
    fd = (H(0.0, h)[-1] - H(0.0, -h)[-1]) / (2 * h)
    assert fd == pytest.approx(-1.0 / math.sin(psi), rel=1e-8)


def test_perturbation_blanks_one_side():
    c = Corridor(perturbations=(Perturbation(1.0, 2.0, side=1),))
    th = np.zeros(2)
    d = np.zeros(2)
    out = render_batch(c, CFG, th, d, s=np.array([0.5, 1.5]))
    left = CFG.ray_angles > 0
    assert np.array_equal(out[0], render_batch(C, CFG, th[:1], d[:1])[0])
    assert np.all(out[1, left] == CFG.max_range)
    assert np.array_equal(out[1, ~left], out[0, ~left])


def test_config_validation():
    with pytest.raises(ValueError):
        SensorConfig(n_rays=1)
    with pytest.raises(ValueError):
        SensorConfig(fov=4.0)


def test_monotone_cue_near_alignment():
    # left-minus-right mean range falls strictly with d; with ranges capped at max_range
    # this holds for headings up to about 0.27 rad, not across the whole field of view
    ds = np.linspace(-0.8 * C.w_half, 0.8 * C.w_half, 201)
    half = CFG.n_rays // 2
    for th in np.linspace(-0.25, 0.25, 21):
        scans = render_batch(C, CFG, np.full(ds.size, th), ds)
        cue = scans[:, half:].mean(axis=1) - scans[:, :half].mean(axis=1)
        assert np.all(np.diff(cue) < 0)


@settings(max_examples=50)
@given(st.floats(-1.5, 1.5), st.floats(-1.2, 1.2))
def test_ranges_within_bounds(th, d):
    scan = render_depth(C, CFG, (th, d))
    assert np.all(scan > 0) and np.all(scan <= CFG.max_range)
