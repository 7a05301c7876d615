"""Command-line surface.

Subcommands: ``calc`` (sizing calculators), ``sim`` (renders to CSV),
``measure`` (measurement pipelines to records CSV + summary JSON) and
``bench`` (backend benchmark). Every command honors ``--seed`` (default from
``LINESCAN_SEED``) and produces bit-identical output for identical seeds.

Exit codes: 0 success, 2 usage, 3 config/validation, 4 data error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from typing import List, Optional

from . import bench as bench_mod
from . import sizing
from .backend import active_backend_name
from .dsp import detect_edges, sharpness_rate
from .formats import (
    RunConfig,
    atomic_write_text,
    fmt9,
    frames_to_csv,
    rays_to_csv,
    read_calibration_csv,
    read_config,
    read_frames_csv,
    summarize_records,
    write_calibration_csv,
    write_json,
    write_records_csv,
)
from .model import (
    CalibrationError,
    ConfigError,
    DataFormatError,
    GeometryError,
    LinescanError,
    SensorSpec,
    TimingModel,
    ValidationError,
    led_reflector_preset,
)
from .optics import render_lens, render_lensless, trace_rays
from .stream import (
    ScanProfile,
    calibrate_from_simulation,
    generate_height_frames,
    generate_scan,
    run_diameter_pipeline,
    run_height_pipeline,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4

_CONFIG_ERRORS = (ConfigError, ValidationError, GeometryError,
                  CalibrationError)


def _default_seed() -> int:
    raw = os.environ.get("LINESCAN_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"LINESCAN_SEED must be an integer, got {raw!r}")


def _load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        return read_config(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _emit(args, payload: dict, text: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


# ---------------------------------------------------------------------------
# calc

def _cmd_calc_pixels(args) -> int:
    n = sizing.required_pixel_count(args.fov, args.accuracy,
                                    args.subpixel_factor)
    _emit(args, {"pixels": n}, f"{n}")
    return EXIT_OK


def _cmd_calc_rate(args) -> int:
    rate = sizing.required_line_rate(args.speed, args.interval * 1e3)
    _emit(args, {"line_rate_hz": rate}, f"{fmt9(rate)} Hz")
    return EXIT_OK


def _cmd_calc_speed(args) -> int:
    speed = sizing.max_transport_speed(args.rate, args.interval * 1e3)
    _emit(args, {"max_speed_m_s": speed}, f"{fmt9(speed)} m/s")
    return EXIT_OK


def _cmd_calc_energy(args) -> int:
    energy = sizing.led_electrical_energy(args.es, args.area, args.eta_led,
                                          args.eta_o)
    _emit(args, {"electrical_energy_j": energy}, f"{fmt9(energy)} J")
    return EXIT_OK


def _cmd_calc_timing(args) -> int:
    if args.preset:
        model = (sizing.mlx75306_timing() if args.preset == "mlx"
                 else sizing.spi_limited_timing())
    else:
        if args.integration is None or args.readout is None:
            raise ConfigError(
                "either --preset or --integration/--readout are required")
        model = TimingModel(integration_time=args.integration,
                            readout_time=args.readout,
                            compute_time=args.compute,
                            overlapped_readout=args.overlapped)
    rate = sizing.achievable_line_rate(model)
    _emit(args, {"line_rate_hz": rate}, f"{fmt9(rate)} Hz")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sim

def _scan_frames(cfg: RunConfig, seed: int, n_frames: int):
    rate = cfg.scan.line_rate
    profile = ScanProfile(duration=n_frames / rate, line_rate=rate,
                          scene=cfg.scene, light=cfg.light, sensor=cfg.sensor)
    return generate_scan(profile, seed, cfg.render)


def _cmd_sim_lensless(args) -> int:
    cfg = _load_config(args.config)
    frames = list(_scan_frames(cfg, args.seed, args.frames))
    atomic_write_text(args.out, frames_to_csv(frames, cfg.sensor))
    print(f"wrote {len(frames)} frame(s) to {args.out}")
    return EXIT_OK


def _cmd_sim_lens(args) -> int:
    cfg = _load_config(args.config)
    frames = []
    for k in range(args.frames):
        rc = replace(cfg.render, rng_seed=args.seed + k)
        frames.append(render_lens(cfg.scene, cfg.light, cfg.lens, cfg.sensor,
                                  rc, illumination=cfg.illumination,
                                  frame_index=k,
                                  timestamp=k / cfg.scan.line_rate))
    atomic_write_text(args.out, frames_to_csv(frames, cfg.sensor))
    print(f"wrote {len(frames)} frame(s) to {args.out}")
    return EXIT_OK


def _cmd_sim_rays(args) -> int:
    cfg = _load_config(args.config)
    segments = trace_rays(cfg.light, cfg.scene, args.rays, args.seed)
    atomic_write_text(args.out, rays_to_csv(segments))
    print(f"wrote {len(segments)} ray segment(s) to {args.out}")
    return EXIT_OK


def _parse_grid(raw: str) -> List[float]:
    try:
        vals = [float(v) for v in raw.replace(",", " ").split() if v]
    except ValueError as exc:
        raise ConfigError(f"bad grid {raw!r}: {exc}") from exc
    if not vals:
        raise ConfigError(f"empty grid {raw!r}")
    return vals


def _cmd_sim_sweep(args) -> int:
    cfg = _load_config(args.config)
    light_distances = _parse_grid(args.light_distances)
    object_distances = _parse_grid(args.object_distances)
    sensor = cfg.sensor
    pitch = sensor.pixel_pitch * 1e-3
    lines = ["light_distance_mm,object_distance_mm,"
             "edge_width_px,edge_width_mm,sharpness_rate"]
    for ld in light_distances:
        light = led_reflector_preset(ld)
        for od in object_distances:
            scene = replace(cfg.scene, object_distance=od)
            rc = replace(cfg.render, rng_seed=args.seed)
            frame = render_lensless(scene, light, sensor, rc)
            edges = detect_edges(frame, cfg.edge)
            if edges:
                width_px = edges[0].width
                rate = sharpness_rate(frame, edges[0], cfg.edge)
            else:
                width_px = float("nan")
                rate = float("nan")
            lines.append(",".join([
                fmt9(ld), fmt9(od), fmt9(width_px), fmt9(width_px * pitch),
                fmt9(rate)]))
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"wrote {len(light_distances) * len(object_distances)} sweep "
          f"point(s) to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# measure

def _check_frames(frames, meta, sensor: SensorSpec) -> None:
    if meta["pixel_count"] != sensor.pixel_count:
        raise DataFormatError(
            f"input frames have {meta['pixel_count']} pixels, configured "
            f"sensor has {sensor.pixel_count}")


def _summary_path(out: str) -> str:
    root, _ext = os.path.splitext(out)
    return root + ".summary.json"


def _finish_records(args, records) -> int:
    records = list(records)
    write_records_csv(args.out, records)
    summary = summarize_records(records)
    summary_path = args.summary or _summary_path(args.out)
    write_json(summary_path, summary)
    print(f"wrote {len(records)} record(s) to {args.out}")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _cmd_measure_diameter(args) -> int:
    cfg = _load_config(args.config)
    if args.simulate:
        n_frames = int(math.floor(
            cfg.scan.duration * cfg.scan.line_rate + 1e-9))
        frames = list(_scan_frames(cfg, args.seed, n_frames))
    else:
        frames, meta = read_frames_csv(args.input)
        _check_frames(frames, meta, cfg.sensor)

    reference = None
    if args.background != "none":
        ref_scene = replace(cfg.scene, occluder=None)
        ref_cfg = replace(cfg.render, rng_seed=args.seed + (1 << 32))
        reference = render_lensless(ref_scene, cfg.light, cfg.sensor, ref_cfg)

    records = run_diameter_pipeline(
        frames, cfg.diameter_config(), reference, sensor=cfg.sensor,
        mode=args.background if args.background != "none" else "subtract",
        workers=args.workers)
    return _finish_records(args, records)


def _cmd_measure_height(args) -> int:
    cfg = _load_config(args.config)
    if args.calibration:
        cal = read_calibration_csv(args.calibration)
    else:
        knots = [cfg.staircase.start + 20.0 * k for k in range(
            int(math.floor((cfg.staircase.stop - cfg.staircase.start) / 20.0
                           + 1e-9)) + 1)]
        cal = calibrate_from_simulation(
            cfg.triangulation, cfg.sensor, knots, cfg.render,
            args.seed + (1 << 33), frames_per_height=4)
        if args.save_calibration:
            write_calibration_csv(args.save_calibration, cal)
    if args.simulate:
        heights = cfg.staircase.heights()
        frames = [frame for _h, frame in generate_height_frames(
            heights, cfg.triangulation, cfg.sensor, cfg.render, args.seed,
            frames_per_height=cfg.staircase.frames_per_height)]
    else:
        frames, meta = read_frames_csv(args.input)
        _check_frames(frames, meta, cfg.sensor)
    records = run_height_pipeline(frames, cal, workers=args.workers)
    return _finish_records(args, records)


def _cmd_measure_calibrate(args) -> int:
    cal = read_calibration_csv(args.input)
    write_calibration_csv(args.out, cal)
    print(f"wrote {len(cal.samples)} calibration knot(s) to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench

def _cmd_bench(args) -> int:
    report = bench_mod.run_benchmark(frames=args.frames, rays=args.rays,
                                     pixels=args.pixels)
    if args.json:
        print(json.dumps(report, sort_keys=True))
    else:
        print(bench_mod.format_report(report))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linescan",
        description="Line-scan imaging workbench "
                    f"(kernel backend: {active_backend_name()})")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed(p):
        p.add_argument("--seed", type=int, default=None,
                       help="RNG seed (default: $LINESCAN_SEED or 0)")

    # calc ------------------------------------------------------------------
    calc = sub.add_parser("calc", help="sizing calculators")
    calc_sub = calc.add_subparsers(dest="subcommand", required=True)

    p = calc_sub.add_parser("pixels", help="required pixel count")
    p.add_argument("--fov", type=float, required=True, help="field of view, mm")
    p.add_argument("--accuracy", type=float, required=True,
                   help="required accuracy, mm")
    p.add_argument("--subpixel-factor", type=float, default=1.0,
                   dest="subpixel_factor")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_calc_pixels)

    p = calc_sub.add_parser("rate", help="required line rate")
    p.add_argument("--speed", type=float, required=True,
                   help="object speed, m/s")
    p.add_argument("--interval", type=float, required=True,
                   help="sample interval, m (e.g. 0.007 for 7 mm)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_calc_rate)

    p = calc_sub.add_parser("speed", help="max transport speed")
    p.add_argument("--rate", type=float, required=True, help="line rate, Hz")
    p.add_argument("--interval", type=float, required=True,
                   help="sample interval, m")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_calc_speed)

    p = calc_sub.add_parser("energy", help="illumination electrical energy")
    p.add_argument("--es", type=float, required=True,
                   help="saturation energy density, J/m^2")
    p.add_argument("--area", type=float, required=True,
                   help="illuminated area, m^2")
    p.add_argument("--eta-led", type=float, required=True, dest="eta_led")
    p.add_argument("--eta-o", type=float, required=True, dest="eta_o")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_calc_energy)

    p = calc_sub.add_parser("timing", help="achievable line rate")
    p.add_argument("--preset", choices=["mlx", "spi"])
    p.add_argument("--integration", type=float, help="integration time, s")
    p.add_argument("--readout", type=float, help="readout time, s")
    p.add_argument("--compute", type=float, default=0.0,
                   help="compute time, s")
    p.add_argument("--overlapped", action="store_true",
                   help="readout overlaps the next integration")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_calc_timing)

    # sim -------------------------------------------------------------------
    sim = sub.add_parser("sim", help="render simulations to CSV")
    sim_sub = sim.add_subparsers(dest="subcommand", required=True)

    p = sim_sub.add_parser("lensless", help="lensless shadow frames")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=1)
    add_seed(p)
    p.set_defaults(func=_cmd_sim_lensless)

    p = sim_sub.add_parser("lens", help="pinhole-projected frames")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=1)
    add_seed(p)
    p.set_defaults(func=_cmd_sim_lens)

    p = sim_sub.add_parser("rays", help="ray-path diagram segments")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--rays", type=int, default=200)
    add_seed(p)
    p.set_defaults(func=_cmd_sim_rays)

    p = sim_sub.add_parser("sweep",
                           help="edge width / sharpness over a geometry grid")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--light-distances", default="100,200,300,400,500",
                   dest="light_distances", help="LED distances, mm")
    p.add_argument("--object-distances", default="5,10,20,40",
                   dest="object_distances", help="object distances, mm")
    add_seed(p)
    p.set_defaults(func=_cmd_sim_sweep)

    # measure ---------------------------------------------------------------
    measure = sub.add_parser("measure", help="measurement pipelines")
    measure_sub = measure.add_subparsers(dest="subcommand", required=True)

    p = measure_sub.add_parser("diameter", help="wire diameter with alarms")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="frames CSV")
    src.add_argument("--simulate", action="store_true",
                     help="generate the scan from the config")
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="records CSV")
    p.add_argument("--summary", help="summary JSON (default: <out>.summary.json)")
    p.add_argument("--background", choices=["none", "subtract", "normalize"],
                   default="none",
                   help="background-correct against a simulated reference")
    p.add_argument("--workers", type=int, default=0)
    add_seed(p)
    p.set_defaults(func=_cmd_measure_diameter)

    p = measure_sub.add_parser("height", help="sheet-of-light heights")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="frames CSV")
    src.add_argument("--simulate", action="store_true",
                     help="generate the staircase scan from the config")
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="records CSV")
    p.add_argument("--summary")
    p.add_argument("--calibration",
                   help="calibration CSV (default: auto-calibrate by simulation)")
    p.add_argument("--save-calibration", dest="save_calibration",
                   help="write the auto-calibration to this path")
    p.add_argument("--workers", type=int, default=0)
    add_seed(p)
    p.set_defaults(func=_cmd_measure_height)

    p = measure_sub.add_parser("calibrate",
                               help="validate and echo a calibration table")
    p.add_argument("--input", required=True, help="(pixel_index, height) CSV")
    p.add_argument("--out", required=True)
    add_seed(p)
    p.set_defaults(func=_cmd_measure_calibrate)

    # bench -----------------------------------------------------------------
    p = sub.add_parser("bench", help="compare kernel backends")
    p.add_argument("--frames", type=int, default=20000)
    p.add_argument("--rays", type=int, default=2000)
    p.add_argument("--pixels", type=int, default=142)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "seed", None) is None and hasattr(args, "seed"):
            args.seed = _default_seed()
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except LinescanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
