"""Bit-exact data formats and the run-configuration document.

Formats (owned by the CLI, usable as a library):

* frames CSV   - ``# sensor: pixel_count=<n>, pitch_um=<p>, bit_depth=<b>``
  comment line, then one ``frame_index,timestamp_s,v0,...,v{n-1}`` row per
  frame with integer ADC values.
* rays CSV     - ``ray_id,x0_mm,z0_mm,x1_mm,z1_mm,blocked`` rows.
* records CSV  - ``frame_index,timestamp_s,value_mm,flag_list`` rows, flags
  semicolon-separated.
* calibration CSV - ``pixel_index,height_mm`` rows.
* config       - flat INI document, sections mirroring the domain types, keys
  named exactly like the dataclass fields; unknown keys are rejected and
  missing keys take the documented defaults.

Floats in CSV are serialized with 9 significant digits; config files use
full-precision repr so a parse/write cycle is the identity. All writers are
atomic (write to a temp file, then rename).
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .dsp import DiameterConfig, EdgeDetectConfig
from .model import (
    CollimatedLaser,
    ConfigError,
    DataFormatError,
    ExtendedLed,
    HeightCalibration,
    IdealTelecentric,
    LightModel,
    LineImage,
    Motion,
    Occluder,
    SceneSetup,
    SensorSpec,
    SpeckleParams,
    TriangulationGeometry,
    mlx75306_preset,
)
from .optics import LensModel, RaySegment, RenderConfig
from .stream import MeasurementRecord, RECORD_FLAGS


def fmt9(x: float) -> str:
    """9-significant-digit decimal, the CSV float contract."""
    return format(float(x), ".9g")


def atomic_write_text(path: str, text: str) -> None:
    """Write-temp-then-rename so readers never see a partial file."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# frames CSV

def frames_to_csv(frames: Sequence[LineImage], sensor: SensorSpec) -> str:
    lines = [f"# sensor: pixel_count={sensor.pixel_count}, "
             f"pitch_um={fmt9(sensor.pixel_pitch)}, "
             f"bit_depth={sensor.bit_depth}"]
    for frame in frames:
        if len(frame) != sensor.pixel_count:
            raise DataFormatError(
                f"frame {frame.frame_index} has {len(frame)} pixels, "
                f"sensor has {sensor.pixel_count}")
        row = [str(frame.frame_index), fmt9(frame.timestamp)]
        row.extend(str(int(v)) for v in frame.values)
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_frames_csv(path: str, frames: Sequence[LineImage],
                     sensor: SensorSpec) -> None:
    atomic_write_text(path, frames_to_csv(frames, sensor))


def parse_frames_csv(text: str) -> Tuple[List[LineImage], dict]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# sensor:"):
        raise DataFormatError("line 1: missing '# sensor:' header")
    meta = {}
    try:
        for part in lines[0].split(":", 1)[1].split(","):
            key, val = part.strip().split("=")
            meta[key] = val
        pixel_count = int(meta["pixel_count"])
        meta = {"pixel_count": pixel_count,
                "pitch_um": float(meta["pitch_um"]),
                "bit_depth": int(meta["bit_depth"])}
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"line 1: bad sensor header ({exc})") from exc
    frames = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 2 + pixel_count:
            raise DataFormatError(
                f"line {ln}: expected {2 + pixel_count} columns, "
                f"got {len(cells)}")
        try:
            idx = int(cells[0])
            ts = float(cells[1])
            values = np.array([int(c) for c in cells[2:]], dtype=np.uint16)
        except ValueError as exc:
            raise DataFormatError(f"line {ln}: {exc}") from exc
        frames.append(LineImage(frame_index=idx, timestamp=ts, values=values))
    return frames, meta


def read_frames_csv(path: str) -> Tuple[List[LineImage], dict]:
    with open(path) as handle:
        return parse_frames_csv(handle.read())


# ---------------------------------------------------------------------------
# rays CSV

RAYS_HEADER = "ray_id,x0_mm,z0_mm,x1_mm,z1_mm,blocked"


def rays_to_csv(segments: Sequence[RaySegment]) -> str:
    lines = [RAYS_HEADER]
    for i, seg in enumerate(segments):
        lines.append(",".join([
            str(i), fmt9(seg.start[0]), fmt9(seg.start[1]),
            fmt9(seg.end[0]), fmt9(seg.end[1]), str(int(seg.blocked))]))
    return "\n".join(lines) + "\n"


def write_rays_csv(path: str, segments: Sequence[RaySegment]) -> None:
    atomic_write_text(path, rays_to_csv(segments))


def parse_rays_csv(text: str) -> List[RaySegment]:
    lines = text.splitlines()
    if not lines or lines[0] != RAYS_HEADER:
        raise DataFormatError(f"line 1: expected header '{RAYS_HEADER}'")
    segments = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 6:
            raise DataFormatError(f"line {ln}: expected 6 columns")
        try:
            segments.append(RaySegment(
                start=(float(cells[1]), float(cells[2])),
                end=(float(cells[3]), float(cells[4])),
                blocked=bool(int(cells[5]))))
        except ValueError as exc:
            raise DataFormatError(f"line {ln}: {exc}") from exc
    return segments


# ---------------------------------------------------------------------------
# records CSV

RECORDS_HEADER = "frame_index,timestamp_s,value_mm,flag_list"


def records_to_csv(records: Sequence[MeasurementRecord]) -> str:
    lines = [RECORDS_HEADER]
    for rec in records:
        value = rec.value
        lines.append(",".join([
            str(rec.frame_index),
            fmt9(rec.timestamp),
            "nan" if math.isnan(value) else fmt9(value),
            ";".join(sorted(rec.flags)),
        ]))
    return "\n".join(lines) + "\n"


def write_records_csv(path: str, records: Sequence[MeasurementRecord]) -> None:
    atomic_write_text(path, records_to_csv(records))


def parse_records_csv(text: str) -> List[dict]:
    """Records round-trip as dicts: the CSV intentionally carries only the
    scalar value and flags, not the full edge detail."""
    lines = text.splitlines()
    if not lines or lines[0] != RECORDS_HEADER:
        raise DataFormatError(f"line 1: expected header '{RECORDS_HEADER}'")
    rows = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 4:
            raise DataFormatError(f"line {ln}: expected 4 columns")
        try:
            flags = frozenset(c for c in cells[3].split(";") if c)
            if not flags <= RECORD_FLAGS:
                raise ValueError(f"unknown flags {sorted(flags - RECORD_FLAGS)}")
            rows.append({
                "frame_index": int(cells[0]),
                "timestamp": float(cells[1]),
                "value": float(cells[2]),
                "flags": flags,
            })
        except ValueError as exc:
            raise DataFormatError(f"line {ln}: {exc}") from exc
    return rows


def summarize_records(records: Sequence[MeasurementRecord]) -> dict:
    """Mean/std/min/max over measured values plus alarm and flag counts."""
    values = np.array([r.value for r in records], dtype=np.float64)
    measured = values[~np.isnan(values)]
    flag_counts = {flag: 0 for flag in sorted(RECORD_FLAGS)}
    for rec in records:
        for flag in rec.flags:
            flag_counts[flag] += 1
    summary = {
        "count": len(records),
        "measured": int(measured.size),
        "alarms": flag_counts["alarm"],
        "flag_counts": flag_counts,
    }
    if measured.size:
        summary.update({
            "mean": float(np.mean(measured)),
            "std": float(np.std(measured)),
            "min": float(np.min(measured)),
            "max": float(np.max(measured)),
        })
    return summary


# ---------------------------------------------------------------------------
# calibration CSV

CALIBRATION_HEADER = "pixel_index,height_mm"


def calibration_to_csv(cal: HeightCalibration) -> str:
    lines = [CALIBRATION_HEADER]
    for idx, height in cal.samples:
        lines.append(f"{fmt9(idx)},{fmt9(height)}")
    return "\n".join(lines) + "\n"


def write_calibration_csv(path: str, cal: HeightCalibration) -> None:
    atomic_write_text(path, calibration_to_csv(cal))


def parse_calibration_csv(text: str) -> HeightCalibration:
    lines = text.splitlines()
    if not lines or lines[0] != CALIBRATION_HEADER:
        raise DataFormatError(
            f"line 1: expected header '{CALIBRATION_HEADER}'")
    samples = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 2:
            raise DataFormatError(f"line {ln}: expected 2 columns")
        try:
            samples.append((float(cells[0]), float(cells[1])))
        except ValueError as exc:
            raise DataFormatError(f"line {ln}: {exc}") from exc
    return HeightCalibration(samples=tuple(samples))


def read_calibration_csv(path: str) -> HeightCalibration:
    with open(path) as handle:
        return parse_calibration_csv(handle.read())


# ---------------------------------------------------------------------------
# run configuration

@dataclass(frozen=True)
class ScanParams:
    duration: float = 0.1      # s
    line_rate: float = 1000.0  # Hz


@dataclass(frozen=True)
class StaircaseParams:
    start: float = 0.0     # mm
    stop: float = 200.0    # mm
    step: float = 10.0     # mm
    frames_per_height: int = 4

    def heights(self) -> List[float]:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [self.start + k * self.step for k in range(n)]


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs; sections map 1:1 onto these fields."""

    sensor: SensorSpec = field(default_factory=mlx75306_preset)
    light: LightModel = field(default_factory=IdealTelecentric)
    scene: SceneSetup = field(default_factory=lambda: SceneSetup(
        object_distance=20.0, occluder=Occluder(center_x=0.0, diameter=3.0)))
    render: RenderConfig = field(default_factory=RenderConfig)
    edge: EdgeDetectConfig = field(default_factory=EdgeDetectConfig)
    nominal_range: Tuple[float, float] = (2.5, 4.0)
    lens: LensModel = field(default_factory=lambda: LensModel(
        projection_distance=40.0))
    illumination: str = "backlit"
    scan: ScanParams = field(default_factory=ScanParams)
    staircase: StaircaseParams = field(default_factory=StaircaseParams)
    triangulation: TriangulationGeometry = field(
        default_factory=lambda: TriangulationGeometry(
            baseline=20.0, projection_distance=40.0, standoff=250.0,
            spot_width=2.4))

    def diameter_config(self) -> DiameterConfig:
        return DiameterConfig(nominal_range=self.nominal_range,
                              pixel_pitch=self.sensor.pixel_pitch,
                              edge_config=self.edge)


_LIGHT_KINDS = ("ideal_telecentric", "collimated_laser", "extended_led")

# section -> key -> converter name ('int' | 'float' | 'bool' | 'str' | 'pair')
_SCHEMA = {
    "sensor": {"pixel_count": "int", "pixel_pitch": "float",
               "bit_depth": "int", "dark_level": "float",
               "noise_sigma": "float", "saturation_fraction": "float",
               "max_line_rate": "float"},
    "light": {"kind": "str", "distance_to_sensor": "float",
              "emitter_diameter": "float", "divergence_half_angle": "float",
              "telecentric_slope_alpha": "float", "beam_half_width": "float"},
    "speckle": {"contrast": "float", "correlation_length": "float",
                "seed": "int"},
    "scene": {"object_distance": "float"},
    "occluder": {"center_x": "float", "diameter": "float"},
    "motion": {"vibration_amplitude": "float", "vibration_frequency": "float",
               "transport_speed": "float"},
    "render": {"rays_per_pixel": "int", "rng_seed": "int",
               "add_sensor_noise": "bool"},
    "edge": {"threshold_fraction": "float", "plateau_quantiles": "pair",
             "min_contrast": "float"},
    "diameter": {"nominal_range": "pair"},
    "lens": {"projection_distance": "float", "illumination": "str"},
    "scan": {"duration": "float", "line_rate": "float"},
    "staircase": {"start": "float", "stop": "float", "step": "float",
                  "frames_per_height": "int"},
    "triangulation": {"baseline": "float", "projection_distance": "float",
                      "standoff": "float", "spot_width": "float"},
}

_BOOL_STRINGS = {"true": True, "false": False, "1": True, "0": False,
                 "yes": True, "no": False, "on": True, "off": False}


def _convert(section: str, key: str, raw: str):
    kind = _SCHEMA[section][key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            try:
                return _BOOL_STRINGS[raw.strip().lower()]
            except KeyError:
                raise ValueError(f"not a boolean: {raw!r}") from None
        if kind == "pair":
            parts = [p for p in raw.replace(",", " ").split() if p]
            if len(parts) != 2:
                raise ValueError(f"expected two numbers, got {raw!r}")
            return (float(parts[0]), float(parts[1]))
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document; unknown sections or keys
    are rejected, missing ones take the defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config syntax: {exc}") from exc

    data = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        data[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
            data[section][key] = _convert(section, key, raw)

    defaults = RunConfig()

    def build(section: str, default):
        """Missing keys take the documented defaults."""
        if section not in data:
            return default
        try:
            return dataclasses.replace(default, **data[section])
        except TypeError as exc:
            raise ConfigError(f"[{section}]: {exc}") from exc

    sensor = build("sensor", defaults.sensor)

    speckle = None
    if "speckle" in data:
        speckle = SpeckleParams(**data["speckle"])

    light_data = dict(data.get("light", {}))
    kind = light_data.pop("kind", "ideal_telecentric")
    if kind not in _LIGHT_KINDS:
        raise ConfigError(
            f"[light] kind must be one of {_LIGHT_KINDS}, got {kind!r}")
    try:
        if kind == "ideal_telecentric":
            if light_data:
                raise ConfigError(
                    f"[light] ideal_telecentric takes no parameters, "
                    f"got {sorted(light_data)}")
            light: LightModel = IdealTelecentric()
        elif kind == "collimated_laser":
            light = CollimatedLaser(speckle=speckle, **light_data)
        else:
            if speckle is not None:
                raise ConfigError(
                    "[speckle] only applies to a collimated_laser light")
            light = ExtendedLed(**light_data)
    except TypeError as exc:
        raise ConfigError(f"[light]: {exc}") from exc

    # no [occluder] section means a reference (no-object) scene
    occluder = Occluder(**data["occluder"]) if "occluder" in data else None
    motion = Motion(**data["motion"]) if "motion" in data else None
    scene = SceneSetup(
        object_distance=data.get("scene", {}).get(
            "object_distance", defaults.scene.object_distance),
        occluder=occluder, motion=motion)

    render = build("render", defaults.render)

    edge_data = dict(data.get("edge", {}))
    if "plateau_quantiles" in edge_data:
        edge_data["plateau_quantiles"] = tuple(edge_data["plateau_quantiles"])
    edge = EdgeDetectConfig(**edge_data) if edge_data else defaults.edge

    nominal = tuple(data.get("diameter", {}).get(
        "nominal_range", defaults.nominal_range))

    lens_data = dict(data.get("lens", {}))
    illumination = lens_data.pop("illumination", defaults.illumination)
    if illumination not in ("backlit", "frontlit"):
        raise ConfigError(
            "[lens] illumination must be 'backlit' or 'frontlit'")
    lens = LensModel(**lens_data) if lens_data else defaults.lens

    scan = build("scan", defaults.scan)
    staircase = build("staircase", defaults.staircase)
    triangulation = build("triangulation", defaults.triangulation)

    return RunConfig(sensor=sensor, light=light, scene=scene, render=render,
                     edge=edge, nominal_range=nominal, lens=lens,
                     illumination=illumination, scan=scan,
                     staircase=staircase, triangulation=triangulation)


def read_config(path: str) -> RunConfig:
    with open(path) as handle:
        return parse_config(handle.read())


def _r(x: float) -> str:
    return repr(float(x))


def config_to_text(cfg: RunConfig) -> str:
    """Serialize a RunConfig; parse_config(config_to_text(cfg)) == cfg."""
    out = []
    s = cfg.sensor
    out.append("[sensor]")
    out.append(f"pixel_count = {s.pixel_count}")
    out.append(f"pixel_pitch = {_r(s.pixel_pitch)}")
    out.append(f"bit_depth = {s.bit_depth}")
    out.append(f"dark_level = {_r(s.dark_level)}")
    out.append(f"noise_sigma = {_r(s.noise_sigma)}")
    out.append(f"saturation_fraction = {_r(s.saturation_fraction)}")
    out.append(f"max_line_rate = {_r(s.max_line_rate)}")

    out.append("")
    out.append("[light]")
    light = cfg.light
    if isinstance(light, IdealTelecentric):
        out.append("kind = ideal_telecentric")
    elif isinstance(light, CollimatedLaser):
        out.append("kind = collimated_laser")
        out.append(f"telecentric_slope_alpha = {_r(light.telecentric_slope_alpha)}")
        out.append(f"beam_half_width = {_r(light.beam_half_width)}")
        if light.speckle is not None:
            out.append("")
            out.append("[speckle]")
            out.append(f"contrast = {_r(light.speckle.contrast)}")
            out.append(
                f"correlation_length = {_r(light.speckle.correlation_length)}")
            out.append(f"seed = {light.speckle.seed}")
    else:
        out.append("kind = extended_led")
        out.append(f"distance_to_sensor = {_r(light.distance_to_sensor)}")
        out.append(f"emitter_diameter = {_r(light.emitter_diameter)}")
        out.append(
            f"divergence_half_angle = {_r(light.divergence_half_angle)}")

    out.append("")
    out.append("[scene]")
    out.append(f"object_distance = {_r(cfg.scene.object_distance)}")
    if cfg.scene.occluder is not None:
        out.append("")
        out.append("[occluder]")
        out.append(f"center_x = {_r(cfg.scene.occluder.center_x)}")
        out.append(f"diameter = {_r(cfg.scene.occluder.diameter)}")
    if cfg.scene.motion is not None:
        m = cfg.scene.motion
        out.append("")
        out.append("[motion]")
        out.append(f"vibration_amplitude = {_r(m.vibration_amplitude)}")
        out.append(f"vibration_frequency = {_r(m.vibration_frequency)}")
        out.append(f"transport_speed = {_r(m.transport_speed)}")

    out.append("")
    out.append("[render]")
    out.append(f"rays_per_pixel = {cfg.render.rays_per_pixel}")
    out.append(f"rng_seed = {cfg.render.rng_seed}")
    out.append(f"add_sensor_noise = {str(cfg.render.add_sensor_noise).lower()}")

    out.append("")
    out.append("[edge]")
    out.append(f"threshold_fraction = {_r(cfg.edge.threshold_fraction)}")
    ql, qh = cfg.edge.plateau_quantiles
    out.append(f"plateau_quantiles = {_r(ql)}, {_r(qh)}")
    out.append(f"min_contrast = {_r(cfg.edge.min_contrast)}")

    out.append("")
    out.append("[diameter]")
    lo, hi = cfg.nominal_range
    out.append(f"nominal_range = {_r(lo)}, {_r(hi)}")

    out.append("")
    out.append("[lens]")
    out.append(f"projection_distance = {_r(cfg.lens.projection_distance)}")
    out.append(f"illumination = {cfg.illumination}")

    out.append("")
    out.append("[scan]")
    out.append(f"duration = {_r(cfg.scan.duration)}")
    out.append(f"line_rate = {_r(cfg.scan.line_rate)}")

    out.append("")
    out.append("[staircase]")
    st = cfg.staircase
    out.append(f"start = {_r(st.start)}")
    out.append(f"stop = {_r(st.stop)}")
    out.append(f"step = {_r(st.step)}")
    out.append(f"frames_per_height = {st.frames_per_height}")

    out.append("")
    out.append("[triangulation]")
    tri = cfg.triangulation
    out.append(f"baseline = {_r(tri.baseline)}")
    out.append(f"projection_distance = {_r(tri.projection_distance)}")
    out.append(f"standoff = {_r(tri.standoff)}")
    out.append(f"spot_width = {_r(tri.spot_width)}")

    return "\n".join(out) + "\n"


def write_config(path: str, cfg: RunConfig) -> None:
    atomic_write_text(path, config_to_text(cfg))


def write_json(path: str, obj: dict) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
