import json
import subprocess
import sys

import numpy as np
import pytest

import linescan as ls
from linescan import formats
from linescan.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCalc:
    def test_pixels_wire_application(self, capsys):
        code, out, _ = run_cli(capsys, "calc", "pixels", "--fov", "6",
                               "--accuracy", "0.05")
        assert code == 0
        assert out.strip() == "120"

    def test_rate_wire_application(self, capsys):
        code, out, _ = run_cli(capsys, "calc", "rate", "--speed", "50",
                               "--interval", "0.007")
        assert code == 0
        assert float(out.split()[0]) == pytest.approx(7142.86, rel=1e-4)

    def test_energy_unit(self, capsys):
        code, out, _ = run_cli(capsys, "calc", "energy", "--es", "1",
                               "--area", "1", "--eta-led", "1", "--eta-o", "1")
        assert code == 0
        assert float(out.split()[0]) == 1.0

    def test_speed_json(self, capsys):
        code, out, _ = run_cli(capsys, "calc", "speed", "--rate", "3500",
                               "--interval", "0.007", "--json")
        assert code == 0
        assert json.loads(out)["max_speed_m_s"] == pytest.approx(24.5)

    def test_timing_presets(self, capsys):
        code, out, _ = run_cli(capsys, "calc", "timing", "--preset", "mlx",
                               "--json")
        assert code == 0
        assert json.loads(out)["line_rate_hz"] == pytest.approx(9480, rel=0.01)
        code, out, _ = run_cli(capsys, "calc", "timing", "--preset", "spi",
                               "--json")
        assert json.loads(out)["line_rate_hz"] == pytest.approx(3500, rel=0.01)

    def test_usage_error_exit_code_2(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["calc", "pixels", "--fov", "6"])  # missing --accuracy
        assert excinfo.value.code == 2

    def test_validation_error_exit_code_3(self, capsys):
        code, _, err = run_cli(capsys, "calc", "pixels", "--fov", "-6",
                               "--accuracy", "0.05")
        assert code == 3
        assert "fov" in err


class TestSim:
    def test_lensless_shadow(self, capsys, tmp_path, sensor):
        out_path = tmp_path / "frames.csv"
        code, _, _ = run_cli(capsys, "sim", "lensless", "--out",
                             str(out_path), "--seed", "3")
        assert code == 0
        frames, meta = formats.read_frames_csv(str(out_path))
        assert meta["pixel_count"] == 142
        assert len(frames) == 1
        dark = int(np.sum(frames[0].values < 108))
        assert abs(dark - 61) <= 1

    def test_rays_ideal_parallel(self, capsys, tmp_path):
        out_path = tmp_path / "rays.csv"
        code, _, _ = run_cli(capsys, "sim", "rays", "--out", str(out_path),
                             "--rays", "64", "--seed", "1")
        assert code == 0
        segments = formats.parse_rays_csv(out_path.read_text())
        assert len(segments) == 64
        for seg in segments:
            if not seg.blocked:
                assert seg.start[0] == pytest.approx(seg.end[0], abs=1e-6)

    def test_sweep_monotone_width(self, capsys, tmp_path):
        out_path = tmp_path / "sweep.csv"
        cfg_path = tmp_path / "run.ini"
        cfg_path.write_text("[render]\nrays_per_pixel = 3000\n"
                            "add_sensor_noise = false\n"
                            "[occluder]\ncenter_x = 0.0\ndiameter = 3.0\n")
        code, _, _ = run_cli(capsys, "sim", "sweep", "--config", str(cfg_path),
                             "--out", str(out_path),
                             "--light-distances", "200,400",
                             "--object-distances", "10,20")
        assert code == 0
        rows = out_path.read_text().splitlines()
        assert rows[0].startswith("light_distance_mm,object_distance_mm")
        table = {}
        for row in rows[1:]:
            ld, od, wpx, wmm, rate = (float(c) for c in row.split(","))
            table[(ld, od)] = (wpx, rate)
        # width falls with light distance, rises with object distance
        assert table[(400, 10)][0] < table[(200, 10)][0]
        assert table[(200, 20)][0] > table[(200, 10)][0]
        # sharpness rate moves the other way
        assert table[(200, 20)][1] < table[(200, 10)][1]

    def test_config_error_exit_code_3(self, capsys, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[sensor]\nwarp_factor = 9\n")
        code, _, err = run_cli(capsys, "sim", "lensless", "--config",
                               str(bad), "--out", str(tmp_path / "x.csv"))
        assert code == 3
        assert "warp_factor" in err

    def test_lens_frontlit_spot(self, capsys, tmp_path):
        cfg_path = tmp_path / "lens.ini"
        cfg_path.write_text(
            "[scene]\nobject_distance = 250\n"
            "[occluder]\ncenter_x = 20\ndiameter = 2.4\n"
            "[lens]\nprojection_distance = 40\nillumination = frontlit\n")
        out_path = tmp_path / "lens.csv"
        code, _, _ = run_cli(capsys, "sim", "lens", "--config", str(cfg_path),
                             "--out", str(out_path), "--seed", "2")
        assert code == 0
        frames, _ = formats.read_frames_csv(str(out_path))
        peak = int(np.argmax(frames[0].values))
        # spot is imaged left of center (u = -x P / z)
        assert 0 < peak < 71


class TestMeasure:
    def test_simulated_diameter_run(self, capsys, tmp_path):
        cfg_path = tmp_path / "run.ini"
        cfg_path.write_text(
            "[scan]\nduration = 0.02\nline_rate = 1000\n"
            "[occluder]\ncenter_x = 0.0\ndiameter = 3.0\n"
            "[render]\nrays_per_pixel = 500\n")
        out_path = tmp_path / "records.csv"
        code, out, _ = run_cli(capsys, "measure", "diameter", "--simulate",
                               "--config", str(cfg_path), "--out",
                               str(out_path), "--seed", "11")
        assert code == 0
        rows = formats.parse_records_csv(out_path.read_text())
        assert len(rows) == 20
        summary = json.loads((tmp_path / "records.summary.json").read_text())
        assert summary["alarms"] == 0
        assert summary["mean"] == pytest.approx(3.0, abs=0.005)

    def test_input_frames_pixel_count_mismatch_is_data_error(self, capsys,
                                                             tmp_path):
        frames_path = tmp_path / "frames.csv"
        small = ls.SensorSpec(pixel_count=64, pixel_pitch=50.0)
        frame = ls.LineImage(frame_index=0, timestamp=0.0,
                             values=np.full(64, 200, dtype=np.uint16))
        formats.write_frames_csv(str(frames_path), [frame], small)
        code, _, err = run_cli(capsys, "measure", "diameter", "--input",
                               str(frames_path), "--out",
                               str(tmp_path / "r.csv"))
        assert code == 4
        assert "64" in err

    def test_malformed_input_names_line(self, capsys, tmp_path):
        frames_path = tmp_path / "frames.csv"
        frames_path.write_text("# sensor: pixel_count=142, pitch_um=49.3, "
                               "bit_depth=8\n0,0.0,1,2\n")
        code, _, err = run_cli(capsys, "measure", "diameter", "--input",
                               str(frames_path), "--out",
                               str(tmp_path / "r.csv"))
        assert code == 4
        assert "line 2" in err

    def test_calibrate_echoes_knots(self, capsys, tmp_path):
        knots = tmp_path / "knots.csv"
        knots.write_text("pixel_index,height_mm\n10,0\n60,100\n110,200\n")
        out_path = tmp_path / "cal.csv"
        code, _, _ = run_cli(capsys, "measure", "calibrate", "--input",
                             str(knots), "--out", str(out_path))
        assert code == 0
        cal = formats.parse_calibration_csv(out_path.read_text())
        assert cal.samples == ((10.0, 0.0), (60.0, 100.0), (110.0, 200.0))

    def test_simulated_height_run(self, capsys, tmp_path):
        cfg_path = tmp_path / "run.ini"
        cfg_path.write_text(
            "[staircase]\nstart = 0\nstop = 100\nstep = 25\n"
            "frames_per_height = 2\n")
        out_path = tmp_path / "heights.csv"
        code, out, _ = run_cli(capsys, "measure", "height", "--simulate",
                               "--config", str(cfg_path), "--out",
                               str(out_path), "--seed", "5",
                               "--save-calibration",
                               str(tmp_path / "cal.csv"))
        assert code == 0
        rows = formats.parse_records_csv(out_path.read_text())
        assert len(rows) == 10  # 5 heights x 2 frames
        assert (tmp_path / "cal.csv").exists()
        summary = json.loads((tmp_path / "heights.summary.json").read_text())
        assert 0.0 - 1.0 <= summary["min"] and summary["max"] <= 100.0 + 1.0


class TestBench:
    def test_bench_json_reports_all_backends(self, capsys):
        code, out, _ = run_cli(capsys, "bench", "--frames", "200", "--rays",
                               "50", "--pixels", "64", "--json")
        assert code == 0
        report = json.loads(out)
        assert report["backends_agree"]
        assert "python" in report["backends"]
        for data in report["backends"].values():
            assert data["pipeline_lines_per_second"] > 0


class TestReproducibility:
    def test_same_seed_bit_identical_csv(self, capsys, tmp_path):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"]
        for path, seed in zip(paths, ("9", "9", "10")):
            code, _, _ = run_cli(capsys, "sim", "lensless", "--out",
                                 str(path), "--seed", seed, "--frames", "3")
            assert code == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()
        assert paths[0].read_bytes() != paths[2].read_bytes()

    def test_env_seed_respected(self, capsys, tmp_path, monkeypatch):
        out1 = tmp_path / "env.csv"
        out2 = tmp_path / "flag.csv"
        monkeypatch.setenv("LINESCAN_SEED", "77")
        code, _, _ = run_cli(capsys, "sim", "lensless", "--out", str(out1))
        assert code == 0
        monkeypatch.delenv("LINESCAN_SEED")
        code, _, _ = run_cli(capsys, "sim", "lensless", "--out", str(out2),
                             "--seed", "77")
        assert code == 0
        assert out1.read_bytes() == out2.read_bytes()


def test_console_script_entry_point():
    result = subprocess.run(
        [sys.executable, "-m", "linescan.cli", "calc", "pixels", "--fov",
         "6", "--accuracy", "0.05"],
        capture_output=True, text=True)
    assert result.returncode == 0
    assert result.stdout.strip() == "120"
