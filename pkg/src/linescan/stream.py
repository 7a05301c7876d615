"""Push-broom scan generation and pipeline orchestration.

Frame streams are plain iterators (pull-based); pipelines map frames to
measurement records one-to-one, in order, never aborting on a per-frame
failure. Records depend only on their own frame plus the fixed reference, so
frames may be processed by any number of workers with order restored at the
output.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from itertools import islice
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ._rng import STREAM_NOISE, derive_seed, gaussians
from .dsp import (
    DiameterConfig,
    background_correct,
    calibrate_height,
    find_peak_apex,
    height_from_peak,
    measure_diameter,
)
from .model import (
    DiameterResult,
    HeightCalibration,
    HeightEstimate,
    LightModel,
    LineImage,
    MeasurementError,
    Occluder,
    PeakBoundaryError,
    SceneSetup,
    SensorSpec,
    TriangulationGeometry,
    ValidationError,
    _require,
    laser_expander_preset,
)
from .optics import LensModel, RenderConfig, render_lens, render_lensless

RECORD_FLAGS = frozenset(
    {"alarm", "no_object", "degenerate_peak", "out_of_range", "ambiguous"})


@dataclass(frozen=True)
class ScanProfile:
    """A timed push-broom acquisition: scene with motion, light, sensor."""

    duration: float      # s
    line_rate: float     # Hz
    scene: SceneSetup
    light: LightModel
    sensor: SensorSpec

    def __post_init__(self) -> None:
        _require(self.duration > 0, "duration must be > 0")
        _require(self.line_rate > 0, "line_rate must be > 0")
        _require(self.line_rate <= self.sensor.max_line_rate,
                 "line_rate must not exceed sensor.max_line_rate")


@dataclass(frozen=True)
class MeasurementRecord:
    """One pipeline output: payload (diameter or height) plus flags.

    ``payload`` is None when the frame could not be measured (the flags say
    why); a stream carries exactly one payload kind.
    """

    frame_index: int
    timestamp: float
    payload: Union[DiameterResult, HeightEstimate, None]
    flags: frozenset

    def __post_init__(self) -> None:
        _require(frozenset(self.flags) <= RECORD_FLAGS,
                 f"flags must be a subset of {sorted(RECORD_FLAGS)}")
        object.__setattr__(self, "flags", frozenset(self.flags))

    @property
    def value(self) -> float:
        """The scalar measurement in mm (NaN when unmeasured)."""
        if isinstance(self.payload, DiameterResult):
            return self.payload.diameter
        if isinstance(self.payload, HeightEstimate):
            return self.payload.height
        return float("nan")


def generate_scan(profile: ScanProfile, seed: int,
                  cfg: Optional[RenderConfig] = None) -> Iterator[LineImage]:
    """Emit floor(duration * line_rate) frames; frame k is rendered at
    t = k/line_rate with the occluder displaced by the vibration profile.

    ``cfg.rng_seed`` is overridden per frame (derived from ``seed``) so the
    whole scan is reproducible from one seed.
    """
    cfg = cfg or RenderConfig(rays_per_pixel=1000)
    n_frames = int(math.floor(profile.duration * profile.line_rate + 1e-9))
    scene = profile.scene
    motion = scene.motion
    for k in range(n_frames):
        t = k / profile.line_rate
        frame_scene = scene
        if motion is not None and scene.occluder is not None and \
                motion.vibration_amplitude > 0:
            dx = motion.vibration_amplitude * math.sin(
                2.0 * math.pi * motion.vibration_frequency * t)
            frame_scene = replace(
                scene,
                occluder=replace(scene.occluder,
                                 center_x=scene.occluder.center_x + dx))
        frame_cfg = replace(cfg, rng_seed=derive_seed(seed, k))
        yield render_lensless(frame_scene, profile.light, profile.sensor,
                              frame_cfg, frame_index=k, timestamp=t)


def _map_ordered(fn: Callable, items: Iterable, workers: int) -> Iterator:
    """Order-preserving, loss-free map with bounded buffering."""
    if workers <= 1:
        for item in items:
            yield fn(item)
        return
    it = iter(items)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        while True:
            chunk = list(islice(it, workers * 4))
            if not chunk:
                return
            yield from pool.map(fn, chunk)


def run_diameter_pipeline(frames: Iterable[LineImage], cfg: DiameterConfig,
                          reference: Optional[LineImage] = None, *,
                          sensor: Optional[SensorSpec] = None,
                          mode: str = "subtract",
                          workers: int = 0) -> Iterator[MeasurementRecord]:
    """Measure every frame's diameter; out-of-range diameters raise the alarm
    flag, unmeasurable frames become no_object records. One record per frame,
    in frame order."""
    if reference is not None and sensor is None:
        raise ValidationError(
            "background correction needs the sensor spec (dark level)")

    def process(frame: LineImage) -> MeasurementRecord:
        work = frame
        if reference is not None:
            work = background_correct(frame, reference, mode, sensor=sensor)
        flags = set()
        try:
            result = measure_diameter(work, cfg)
        except MeasurementError:
            return MeasurementRecord(frame.frame_index, frame.timestamp,
                                     None, frozenset({"no_object"}))
        if result.alarm:
            flags.add("alarm")
        if result.ambiguous:
            flags.add("ambiguous")
        return MeasurementRecord(frame.frame_index, frame.timestamp, result,
                                 frozenset(flags))

    return _map_ordered(process, frames, workers)


def run_height_pipeline(frames: Iterable[LineImage], cal: HeightCalibration,
                        *, workers: int = 0) -> Iterator[MeasurementRecord]:
    """Peak-find + triangulation map for every frame; boundary/degenerate
    peaks and out-of-range apexes become flagged records, never aborts."""

    def process(frame: LineImage) -> MeasurementRecord:
        flags = set()
        try:
            fit = find_peak_apex(frame)
        except PeakBoundaryError:
            return MeasurementRecord(frame.frame_index, frame.timestamp,
                                     None, frozenset({"degenerate_peak"}))
        if fit.degenerate:
            flags.add("degenerate_peak")
        height, clipped = height_from_peak(fit.apex, cal)
        if clipped:
            flags.add("out_of_range")
        payload = HeightEstimate(height=height, apex_index=fit.apex)
        return MeasurementRecord(frame.frame_index, frame.timestamp, payload,
                                 frozenset(flags))

    return _map_ordered(process, frames, workers)


def generate_height_frames(heights: Sequence[float],
                           tri: TriangulationGeometry,
                           sensor: SensorSpec,
                           cfg: RenderConfig,
                           seed: int, *,
                           light: Optional[LightModel] = None,
                           frames_per_height: int = 1,
                           line_rate: Optional[float] = None
                           ) -> Iterator[Tuple[float, LineImage]]:
    """Sheet-of-light frames for a staircase of surface heights.

    Yields (true_height, frame) with the laser spot imaged through the
    pinhole lens at the triangulated position for each height.
    """
    light = light or laser_expander_preset()
    rate = line_rate or sensor.max_line_rate
    lens = LensModel(projection_distance=tri.projection_distance)
    k = 0
    for h in heights:
        scene = SceneSetup(
            object_distance=tri.surface_distance(h),
            occluder=Occluder(center_x=tri.baseline, diameter=tri.spot_width))
        for _ in range(frames_per_height):
            frame_cfg = replace(cfg, rng_seed=derive_seed(seed, k))
            yield h, render_lens(scene, light, lens, sensor, frame_cfg,
                                 illumination="frontlit",
                                 frame_index=k, timestamp=k / rate)
            k += 1


def calibrate_from_simulation(tri: TriangulationGeometry, sensor: SensorSpec,
                              heights: Sequence[float], cfg: RenderConfig,
                              seed: int, *,
                              frames_per_height: int = 4) -> HeightCalibration:
    """Build a height calibration the way it is done on hardware: measure the
    apex index at each known height (averaged over a few frames) and tabulate
    (apex -> height)."""
    apexes = {h: [] for h in heights}
    for h, frame in generate_height_frames(
            heights, tri, sensor, cfg, seed,
            frames_per_height=frames_per_height):
        apexes[h].append(find_peak_apex(frame).apex)
    samples = [(float(np.mean(apexes[h])), float(h)) for h in heights]
    return calibrate_height(samples)


def _synthetic_diameter_frames(n_frames: int, sensor: SensorSpec,
                               seed: int = 0) -> List[LineImage]:
    """Fast batch of realistic wire frames for benchmarking (no MC render)."""
    centers = sensor.pixel_centers()
    pitch = sensor.pixel_pitch * 1e-3
    lo, hi = -1.5, 1.5
    left = centers - pitch / 2.0
    right = centers + pitch / 2.0
    coverage = np.clip(np.minimum(right, hi) - np.maximum(left, lo),
                       0.0, pitch) / pitch
    amplitude = sensor.saturation_fraction * sensor.full_scale - sensor.dark_level
    base = sensor.dark_level + (1.0 - coverage) * amplitude
    noise = gaussians(seed, STREAM_NOISE, n_frames * sensor.pixel_count)
    noise = noise.reshape(n_frames, sensor.pixel_count) * sensor.noise_sigma
    mat = np.clip(np.floor(base[None, :] + noise), 0,
                  sensor.full_scale).astype(np.uint16)
    rate = sensor.max_line_rate
    return [LineImage(frame_index=k, timestamp=k / rate, values=mat[k])
            for k in range(n_frames)]


def _synthetic_height_frames(n_frames: int, sensor: SensorSpec,
                             seed: int = 0) -> List[LineImage]:
    centers = sensor.pixel_centers()
    amplitude = sensor.saturation_fraction * sensor.full_scale - sensor.dark_level
    base = sensor.dark_level + amplitude * np.exp(
        -0.5 * ((centers + 1.0) / (2.0 * sensor.pixel_pitch * 1e-3)) ** 2)
    noise = gaussians(seed, STREAM_NOISE, n_frames * sensor.pixel_count)
    noise = noise.reshape(n_frames, sensor.pixel_count) * sensor.noise_sigma
    mat = np.clip(np.floor(base[None, :] + noise), 0,
                  sensor.full_scale).astype(np.uint16)
    rate = sensor.max_line_rate
    return [LineImage(frame_index=k, timestamp=k / rate, values=mat[k])
            for k in range(n_frames)]


def throughput_report(n_frames: int, pipeline: str, sensor: SensorSpec, *,
                      workers: int = 0, seed: int = 0) -> dict:
    """Wall-clock benchmark of the measurement stages on synthetic frames.

    Returns sustained lines/s for the full pipeline plus a per-stage
    breakdown; frame synthesis is excluded from all timings.
    """
    if n_frames < 100:
        raise ValidationError("n_frames must be >= 100 for a stable estimate")
    if pipeline == "diameter":
        frames = _synthetic_diameter_frames(n_frames, sensor, seed)
        cfg = DiameterConfig(nominal_range=(2.5, 4.0),
                             pixel_pitch=sensor.pixel_pitch)

        def run():
            return run_diameter_pipeline(frames, cfg, workers=workers)

        t0 = time.perf_counter()
        for frame in frames:
            measure_diameter(frame, cfg)
        t_measure = time.perf_counter() - t0
    elif pipeline == "height":
        frames = _synthetic_height_frames(n_frames, sensor, seed)
        cal = HeightCalibration(samples=((0.0, 0.0),
                                         (sensor.pixel_count - 1.0, 200.0)))

        def run():
            return run_height_pipeline(frames, cal, workers=workers)

        t0 = time.perf_counter()
        for frame in frames:
            fit = find_peak_apex(frame)
            height_from_peak(fit.apex, cal)
        t_measure = time.perf_counter() - t0
    else:
        raise ValidationError("pipeline must be 'diameter' or 'height'")

    t0 = time.perf_counter()
    count = sum(1 for _ in run())
    total = time.perf_counter() - t0
    assert count == n_frames
    return {
        "lines_per_second": n_frames / total,
        "per_stage_times": {
            "measure": t_measure,
            "record_assembly": max(total - t_measure, 0.0),
            "total": total,
        },
    }
