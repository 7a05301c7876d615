import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

import linescan as ls
from linescan.dsp import find_peak_apex, plateau_levels
from linescan.model import (
    FlatFieldError,
    MeasurementError,
    PeakBoundaryError,
    ValidationError,
)

from conftest import synth_frame


def ramp_frame(high=216, low=2, p1=20, width=8, p2=20):
    """Plateau, linear ramp over ``width`` px, plateau. The transition hits
    ``high`` at index p1-1 and ``low`` at p1-1+width."""
    step = (high - low) / width
    ramp = [high - k * step for k in range(1, width)]
    return synth_frame([high] * p1 + ramp + [low] * p2)


class TestDetectEdges:
    def test_pure_step(self):
        frame = synth_frame([200] * 20 + [0] * 20)
        edges = ls.detect_edges(frame)
        assert len(edges) == 1
        edge = edges[0]
        assert edge.polarity == "falling"
        assert edge.position == pytest.approx(19.5, abs=1e-9)
        assert edge.width <= 1.0

    def test_eight_pixel_ramp_exact(self):
        frame = ramp_frame(high=200, low=0, p1=20, width=8, p2=20)
        (edge,) = ls.detect_edges(frame)
        assert edge.position == pytest.approx(19 + 4.0, abs=1e-9)
        assert edge.width == pytest.approx(6.4, abs=1e-9)

    def test_rendered_wire_has_two_ordered_edges(self, sensor, wire_scene,
                                                 quiet_cfg):
        frame = ls.render_lensless(wire_scene(), ls.IdealTelecentric(),
                                   sensor, quiet_cfg(2000))
        edges = ls.detect_edges(frame)
        assert [e.polarity for e in edges] == ["falling", "rising"]
        assert edges[0].position < edges[1].position

    def test_low_contrast_yields_no_edges(self):
        frame = synth_frame([100, 101, 100, 99, 100, 101] * 10)
        assert ls.detect_edges(frame) == []

    def test_tiny_frame_rejected(self):
        with pytest.raises(ValidationError):
            ls.detect_edges(synth_frame([1, 2]))

    def test_nondefault_threshold_on_linear_ramp(self):
        frame = ramp_frame(high=200, low=0, p1=20, width=10, p2=20)
        cfg = ls.EdgeDetectConfig(threshold_fraction=0.3)
        (edge,) = ls.detect_edges(frame, cfg)
        # falling ramp crosses the 30% level at 70% of its extent
        assert edge.position == pytest.approx(19 + 7.0, abs=1e-9)

    @given(width=st.integers(1, 20), step=st.integers(1, 12),
           p1=st.integers(12, 40), p2=st.integers(12, 40),
           low=st.integers(0, 30))
    @settings(max_examples=60, deadline=None)
    def test_exact_on_integer_ramps(self, width, step, p1, p2, low):
        assume(width * step >= 20)
        high = low + width * step
        assume(high <= 255)
        frame = ramp_frame(high=high, low=low, p1=p1, width=width, p2=p2)
        (edge,) = ls.detect_edges(frame)
        assert edge.position == pytest.approx(p1 - 1 + width / 2, abs=1e-9)
        assert edge.width == pytest.approx(0.8 * width, abs=1e-9)

    def test_rising_edge_mirror(self):
        frame = synth_frame([0] * 20 + [50, 100, 150] + [200] * 20)
        (edge,) = ls.detect_edges(frame)
        assert edge.polarity == "rising"
        assert edge.position == pytest.approx(19 + 2.0, abs=1e-9)
        assert edge.width == pytest.approx(0.8 * 4, abs=1e-9)


class TestBackgroundCorrect:
    def test_self_subtraction_is_dark_frame(self, sensor):
        rng = np.random.default_rng(0)
        frame = synth_frame(rng.integers(0, 255, sensor.pixel_count))
        out = ls.background_correct(frame, frame, "subtract", sensor=sensor)
        assert np.all(out.values == int(sensor.dark_level))

    def test_length_mismatch(self, sensor):
        with pytest.raises(ValidationError, match="length"):
            ls.background_correct(synth_frame([1, 2, 3]),
                                  synth_frame([1, 2]), sensor=sensor)

    def test_normalize_flags_dead_reference_pixel(self, sensor):
        frame = synth_frame([100] * 5)
        reference = synth_frame([200, 200, 1, 200, 200])
        with pytest.raises(FlatFieldError, match="pixel 2"):
            ls.background_correct(frame, reference, "normalize",
                                  sensor=sensor)

    def test_normalize_cancels_speckle_on_edge_position(self, sensor,
                                                        wire_scene):
        speckle = ls.SpeckleParams(contrast=0.2, correlation_length=3, seed=8)
        speckled = ls.CollimatedLaser(telecentric_slope_alpha=0.5,
                                      speckle=speckle)
        clean = ls.CollimatedLaser(telecentric_slope_alpha=0.5)
        cfg = ls.RenderConfig(rays_per_pixel=4000, rng_seed=1,
                              add_sensor_noise=True)
        truth_cfg = ls.RenderConfig(rays_per_pixel=4000, rng_seed=2,
                                    add_sensor_noise=False)
        scene = wire_scene(center=0.2)
        reference_scene = ls.SceneSetup(object_distance=scene.object_distance)

        truth = ls.detect_edges(
            ls.render_lensless(scene, clean, sensor, truth_cfg))
        raw = ls.render_lensless(scene, speckled, sensor, cfg)
        reference = ls.render_lensless(
            reference_scene, speckled, sensor,
            ls.RenderConfig(rays_per_pixel=4000, rng_seed=3,
                            add_sensor_noise=True))
        corrected = ls.background_correct(raw, reference, "normalize",
                                          sensor=sensor)
        got = ls.detect_edges(corrected)
        assert len(got) == len(truth) == 2
        for a, b in zip(got, truth):
            assert abs(a.position - b.position) <= 0.2

    def test_correction_reduces_variance(self, sensor):
        speckle = ls.SpeckleParams(contrast=0.2, correlation_length=3, seed=8)
        light = ls.CollimatedLaser(telecentric_slope_alpha=0.5,
                                   speckle=speckle)
        flat = ls.SceneSetup(object_distance=20.0)
        raw = ls.render_lensless(
            flat, light, sensor,
            ls.RenderConfig(rays_per_pixel=2000, rng_seed=4))
        reference = ls.render_lensless(
            flat, light, sensor,
            ls.RenderConfig(rays_per_pixel=2000, rng_seed=5))
        corrected = ls.background_correct(raw, reference, "normalize",
                                          sensor=sensor)
        assert np.var(corrected.values.astype(float)) < \
            np.var(raw.values.astype(float))


class TestSharpnessRate:
    def test_step_of_200_counts(self):
        frame = synth_frame([202] * 30 + [2] * 30)
        edge = ls.EdgeEstimate(position=29.5, width=1.0, polarity="falling")
        assert ls.sharpness_rate(frame, edge) == pytest.approx(200.0)

    def test_inverse_linear_in_width(self):
        frame = synth_frame([202] * 30 + [2] * 30)
        edge = ls.EdgeEstimate(position=29.5, width=8.0, polarity="falling")
        assert ls.sharpness_rate(frame, edge) == pytest.approx(25.0)


class TestMeasureDiameter:
    def make_cfg(self, sensor, lo=2.5, hi=4.0):
        return ls.DiameterConfig(nominal_range=(lo, hi),
                                 pixel_pitch=sensor.pixel_pitch)

    def test_ideal_render_within_tenth_pixel(self, sensor, wire_scene,
                                             quiet_cfg):
        cfg = self.make_cfg(sensor)
        result = ls.measure_diameter(
            ls.render_lensless(wire_scene(3.0), ls.IdealTelecentric(),
                               sensor, quiet_cfg()), cfg)
        assert abs(result.diameter - 3.0) < sensor.pixel_pitch * 1e-3 / 10
        assert not result.alarm

    def test_position_invariance(self, sensor, wire_scene, quiet_cfg):
        cfg = self.make_cfg(sensor)
        diameters = []
        for center in (-1.0, 0.0, 1.0):
            frame = ls.render_lensless(wire_scene(3.0, center=center),
                                       ls.IdealTelecentric(), sensor,
                                       quiet_cfg())
            diameters.append(ls.measure_diameter(frame, cfg).diameter)
        assert max(diameters) - min(diameters) <= 0.005

    def test_out_of_range_raises_alarm(self, sensor, wire_scene, quiet_cfg):
        cfg = self.make_cfg(sensor)
        frame = ls.render_lensless(wire_scene(4.2), ls.IdealTelecentric(),
                                   sensor, quiet_cfg(2000))
        result = ls.measure_diameter(frame, cfg)
        assert result.alarm
        assert result.diameter == pytest.approx(4.2, abs=0.01)

    def test_no_object_raises(self, sensor, quiet_cfg):
        cfg = self.make_cfg(sensor)
        frame = ls.render_lensless(ls.SceneSetup(object_distance=20.0),
                                   ls.IdealTelecentric(), sensor,
                                   quiet_cfg(500))
        with pytest.raises(MeasurementError, match="no object"):
            ls.measure_diameter(frame, cfg)

    def test_multi_shadow_picks_deepest_and_flags(self, sensor):
        # fully dark wide shadow plus a shallower (but threshold-crossing) dip
        values = ([216] * 30 + [2] * 25 + [216] * 40 + [40] * 10
                  + [216] * 37)
        frame = synth_frame(values)
        cfg = self.make_cfg(sensor, lo=0.5, hi=4.0)
        result = ls.measure_diameter(frame, cfg)
        assert result.ambiguous
        assert result.diameter == pytest.approx(
            25 * sensor.pixel_pitch * 1e-3, abs=0.05)


class TestFindPeakApex:
    def test_symmetric_triple(self):
        frame = synth_frame([0, 0, 0, 0, 0, 1, 3, 1, 0, 0])
        assert find_peak_apex(frame) == (6.0, False)

    def test_worked_triple_against_polyfit_oracle(self):
        frame = synth_frame([0, 0, 0, 0, 20, 30, 25, 0, 0, 0])
        fit = find_peak_apex(frame)
        coeffs = np.polyfit([4, 5, 6], [20, 30, 25], 2)
        oracle = -coeffs[1] / (2 * coeffs[0])
        assert fit.apex == pytest.approx(oracle, abs=1e-9)
        assert fit.apex == pytest.approx(5 + 1 / 6, abs=1e-9)

    def test_exact_on_integer_parabola(self):
        # y = -10x^2 + 146x - 316 has its apex exactly at 7.30 and integer
        # samples, so quantization does not disturb the fit
        x = np.arange(15)
        y = np.clip(-10 * x * x + 146 * x - 316, 0, None)
        fit = find_peak_apex(synth_frame(y))
        assert fit.apex == pytest.approx(7.30, abs=1e-9)
        assert not fit.degenerate

    def test_boundary_peak_raises(self):
        with pytest.raises(PeakBoundaryError):
            find_peak_apex(synth_frame([9, 3, 1, 0, 0]))

    def test_saturated_plateau_is_flagged_degenerate(self):
        fit = find_peak_apex(synth_frame([0, 255, 255, 255, 0]))
        assert fit.degenerate
        # the fit itself lands mid-plateau, which is still usable
        assert fit.apex == pytest.approx(1.5)

    @given(ym=st.integers(0, 200), yp=st.integers(0, 200),
           bump=st.integers(1, 50), shift=st.integers(0, 500),
           scale=st.integers(1, 20))
    @settings(max_examples=80, deadline=None)
    def test_shift_and_scale_equivariance(self, ym, yp, bump, shift, scale):
        y0 = max(ym, yp) + bump
        base = find_peak_apex(synth_frame([0, ym, y0, yp, 0]))
        shifted = find_peak_apex(
            synth_frame([0 + shift, ym + shift, y0 + shift, yp + shift,
                         0 + shift]))
        scaled = find_peak_apex(
            synth_frame([0, ym * scale, y0 * scale, yp * scale, 0]))
        assert shifted.apex == base.apex
        assert scaled.apex == base.apex


class TestHeightCalibration:
    def test_two_point_linear_map(self):
        cal = ls.calibrate_height([(10, 0.0), (110, 200.0)])
        assert ls.height_from_peak(60.0, cal) == (100.0, False)

    def test_knots_map_to_themselves(self):
        knots = [(5.0, 0.0), (20.0, 50.0), (90.0, 180.0)]
        cal = ls.calibrate_height(knots)
        for idx, height in knots:
            value, flagged = ls.height_from_peak(idx, cal)
            assert value == height
            assert not flagged

    def test_non_monotonic_rejected(self):
        with pytest.raises(ls.LinescanError):
            ls.calibrate_height([(10, 0.0), (5, 10.0), (10, 20.0)])

    def test_clamps_and_flags_out_of_range(self):
        cal = ls.calibrate_height([(10, 0.0), (110, 200.0)])
        assert ls.height_from_peak(3.0, cal) == (0.0, True)
        assert ls.height_from_peak(200.0, cal) == (200.0, True)

    def test_unsorted_input_is_sorted(self):
        cal = ls.calibrate_height([(110, 200.0), (10, 0.0)])
        assert cal.samples[0] == (10.0, 0.0)


def test_plateau_levels_on_wire_frame(sensor, wire_scene, quiet_cfg):
    frame = ls.render_lensless(wire_scene(), ls.IdealTelecentric(), sensor,
                               quiet_cfg(2000))
    low, high = plateau_levels(frame)
    assert low == pytest.approx(sensor.dark_level, abs=1.0)
    assert high == pytest.approx(
        np.floor(sensor.saturation_fraction * sensor.full_scale), abs=1.0)
