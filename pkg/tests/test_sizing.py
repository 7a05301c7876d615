import pytest
from hypothesis import given, strategies as st

import linescan as ls
from linescan.model import ValidationError
from linescan.sizing import SizingRequirement


def test_sizing_requirement_record():
    req = SizingRequirement(field_of_view=6.0, accuracy=0.05,
                                      subpixel_factor=1.0, object_speed=50.0,
                                      sample_interval=7.0)
    assert req.pixel_count() == 120
    assert req.line_rate() == pytest.approx(7142.857, rel=1e-4)
    with pytest.raises(ValidationError, match="subpixel_factor"):
        SizingRequirement(field_of_view=6.0, accuracy=0.05,
                                    subpixel_factor=0.5, object_speed=50.0,
                                    sample_interval=7.0)


class TestRequiredPixelCount:
    def test_wire_application(self):
        # 4 mm max diameter + 2 mm peak-to-peak vibration, 50 um accuracy
        assert ls.required_pixel_count(6.0, 0.05, 1) == 120

    def test_fov_equals_accuracy(self):
        assert ls.required_pixel_count(1.0, 1.0, 1) == 1

    def test_subpixel_factor_divides(self):
        assert ls.required_pixel_count(6.0, 0.05, 10) == 12

    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            ls.required_pixel_count(-1.0, 0.05)
        with pytest.raises(ValidationError):
            ls.required_pixel_count(6.0, 0.0)

    @given(fov=st.floats(0.1, 1e3), acc=st.floats(1e-3, 10),
           sub=st.floats(1, 100))
    def test_monotonicity(self, fov, acc, sub):
        base = ls.required_pixel_count(fov, acc, sub)
        assert ls.required_pixel_count(fov * 2, acc, sub) >= base
        assert ls.required_pixel_count(fov, acc * 2, sub) <= base
        assert ls.required_pixel_count(fov, acc, sub * 2) <= base


class TestLineRateAndSpeed:
    def test_wire_line_rate(self):
        # 50 m/s with 7 mm flaws
        assert ls.required_line_rate(50, 7) == pytest.approx(7142.857, rel=1e-4)

    def test_trivial_rate(self):
        assert ls.required_line_rate(1, 1000) == pytest.approx(1.0)

    def test_slow_prototype_rate(self):
        assert ls.required_line_rate(20, 7) == pytest.approx(2857.1, rel=1e-4)

    def test_speed_at_spi_limit(self):
        assert ls.max_transport_speed(3500, 7) == pytest.approx(24.5, abs=0.5)

    def test_trivial_speed(self):
        assert ls.max_transport_speed(1, 1000) == pytest.approx(1.0)

    def test_speed_round_trip(self):
        assert ls.max_transport_speed(7142.857142857143, 7) == \
            pytest.approx(50.0, rel=1e-9)

    @given(v=st.floats(1e-3, 1e3), d=st.floats(1e-3, 1e4))
    def test_rate_speed_inverse(self, v, d):
        assert ls.max_transport_speed(ls.required_line_rate(v, d), d) == \
            pytest.approx(v, rel=1e-9)


class TestLedEnergy:
    def test_unit_inputs(self):
        assert ls.led_electrical_energy(1, 1, 1, 1) == 1.0

    def test_worked_example(self):
        # 1e-6 J/cm^2 = 0.01 J/m^2 overs 1e-3 m^2 at 30%/50% efficiency
        got = ls.led_electrical_energy(0.01, 1e-3, 0.3, 0.5)
        assert got == pytest.approx(0.01 * 1e-3 / (0.3 * 0.5), rel=1e-12)
        assert got == pytest.approx(6.667e-5, rel=1e-3)

    def test_rejects_bad_efficiency(self):
        with pytest.raises(ValidationError):
            ls.led_electrical_energy(1, 1, 0.0, 0.5)
        with pytest.raises(ValidationError):
            ls.led_electrical_energy(1, 1, 0.5, 1.5)

    @given(es=st.floats(1e-6, 1e3), area=st.floats(1e-9, 10),
           eta1=st.floats(0.01, 1), eta2=st.floats(0.01, 1))
    def test_linearity(self, es, area, eta1, eta2):
        base = ls.led_electrical_energy(es, area, eta1, eta2)
        assert ls.led_electrical_energy(es, 2 * area, eta1, eta2) == \
            pytest.approx(2 * base, rel=1e-12)
        assert ls.led_electrical_energy(2 * es, area, eta1, eta2) == \
            pytest.approx(2 * base, rel=1e-12)


class TestAchievableLineRate:
    def test_mlx_fit(self):
        rate = ls.achievable_line_rate(ls.mlx75306_timing())
        assert rate == pytest.approx(1 / (50e-6 + 55.5e-6), rel=1e-12)
        assert rate == pytest.approx(9479, abs=1)

    def test_integration_limited_either_mode(self):
        for overlapped in (False, True):
            t = ls.TimingModel(integration_time=100e-6, readout_time=0.0,
                               overlapped_readout=overlapped)
            assert ls.achievable_line_rate(t) == pytest.approx(10_000.0)

    def test_spi_fit(self):
        rate = ls.achievable_line_rate(ls.spi_limited_timing())
        assert rate == pytest.approx(3500, abs=3500 * 0.01)

    def test_compute_hides_under_integration_when_not_overlapped(self):
        t = ls.TimingModel(integration_time=100e-6, readout_time=50e-6,
                           compute_time=80e-6, overlapped_readout=False)
        assert ls.achievable_line_rate(t) == pytest.approx(1 / 150e-6)

    @given(ti=st.floats(1e-6, 1e-2), tr=st.floats(1e-6, 1e-2),
           tc=st.floats(0, 1e-2))
    def test_overlapped_never_slower(self, ti, tr, tc):
        non = ls.achievable_line_rate(ls.TimingModel(ti, tr, tc, False))
        over = ls.achievable_line_rate(ls.TimingModel(ti, tr, tc, True))
        assert over >= non * (1 - 1e-12)
