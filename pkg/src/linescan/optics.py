"""Line-image synthesis: lensless shadow casting under three illumination
models, pinhole-lens projection, speckle generation and ray-path tracing.

The lensless renderer estimates, per pixel, the fraction of source radiance
arriving at the pixel by Monte Carlo sampling (stratified across the
full-pitch pixel aperture, counter-seeded per pixel so parallel and serial
renders are bit-identical). The signal chain is fixed:
radiometry -> speckle -> additive Gaussian noise -> floor quantization ->
clamp to the ADC range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage, special

from . import backend
from ._kernels_py import LIGHT_IDEAL, LIGHT_LASER, LIGHT_LED
from ._rng import STREAM_NOISE, STREAM_SPECKLE, gaussians, stream_key, uniforms
from .model import (
    CollimatedLaser,
    ExtendedLed,
    GeometryError,
    IdealTelecentric,
    LightModel,
    LineImage,
    SceneSetup,
    SensorSpec,
    SpeckleParams,
    ValidationError,
    _require,
)


@dataclass(frozen=True)
class RenderConfig:
    """Monte Carlo render settings; output is deterministic in
    (config, scene, light, sensor)."""

    rays_per_pixel: int = 10_000
    rng_seed: int = 0
    add_sensor_noise: bool = True

    def __post_init__(self) -> None:
        _require(self.rays_per_pixel >= 1, "rays_per_pixel must be >= 1")


@dataclass(frozen=True)
class LensModel:
    """Thin pinhole approximation: image coordinate = -x * projection_distance / z."""

    projection_distance: float   # mm

    def __post_init__(self) -> None:
        _require(self.projection_distance > 0,
                 "projection_distance must be > 0")


@dataclass(frozen=True)
class RaySegment:
    """One plotted ray path segment; z decreases from light to sensor."""

    start: Tuple[float, float]   # (x, z) mm
    end: Tuple[float, float]     # (x, z) mm
    blocked: bool

    def __post_init__(self) -> None:
        _require(self.start[1] > self.end[1],
                 "z must strictly decrease from light plane toward sensor")


def _light_kernel_args(light: LightModel, scene: SceneSetup) -> tuple:
    """Map a light model onto the flat kernel parameter list."""
    if isinstance(light, IdealTelecentric):
        return (LIGHT_IDEAL, 0.0, 0.0, 0.0, 0.0, 0.0)
    if isinstance(light, CollimatedLaser):
        alpha_rad = light.telecentric_slope_alpha * 1e-3
        return (LIGHT_LASER, alpha_rad, light.beam_half_width, 0.0, 0.0, 0.0)
    if isinstance(light, ExtendedLed):
        if scene.object_distance >= light.distance_to_sensor:
            raise GeometryError(
                "object plane must lie strictly between light and sensor "
                f"(object_distance={scene.object_distance} mm, "
                f"light distance={light.distance_to_sensor} mm)")
        return (
            LIGHT_LED,
            0.0,
            0.0,
            light.emitter_diameter / 2.0,
            light.distance_to_sensor,
            math.tan(light.divergence_half_angle),
        )
    raise ValidationError(f"unknown light model {type(light).__name__}")


def _digitize(ideal: np.ndarray, sensor: SensorSpec, cfg: RenderConfig,
              frame_index: int, timestamp: float) -> LineImage:
    """Shared back half of the signal chain: noise, floor-quantize, clamp."""
    values = ideal
    if cfg.add_sensor_noise and sensor.noise_sigma > 0:
        noise = gaussians(cfg.rng_seed, STREAM_NOISE, sensor.pixel_count)
        values = values + sensor.noise_sigma * noise
    values = np.clip(np.floor(values), 0, sensor.full_scale)
    return LineImage(frame_index=frame_index, timestamp=timestamp,
                     values=values.astype(np.uint16))


def _illumination_scale(vis: np.ndarray, light: LightModel,
                        sensor: SensorSpec, pixel_count: int) -> np.ndarray:
    """Visibility -> ideal counts: dark + vis * speckle * (sat*full - dark)."""
    amplitude = sensor.saturation_fraction * sensor.full_scale - sensor.dark_level
    shaped = vis
    if isinstance(light, CollimatedLaser) and light.speckle is not None:
        shaped = vis * generate_speckle(light.speckle, pixel_count)
    return sensor.dark_level + shaped * amplitude


def render_lensless(scene: SceneSetup, light: LightModel, sensor: SensorSpec,
                    cfg: RenderConfig, *, frame_index: int = 0,
                    timestamp: float = 0.0) -> LineImage:
    """Cast the occluder's shadow straight onto the bare sensor.

    Without an occluder this is a reference (flat-field) frame: every pixel
    reads saturation_fraction of full scale plus noise.
    """
    kern = backend.active_backend()
    kind, alpha_rad, beam_hw, emit_hw, light_dist, tan_div = \
        _light_kernel_args(light, scene)
    if scene.occluder is not None:
        occ = scene.occluder
        shadow_lo = occ.center_x - occ.diameter / 2.0
        shadow_hi = occ.center_x + occ.diameter / 2.0
        has_occ = True
    else:
        shadow_lo = shadow_hi = 0.0
        has_occ = False

    pitch_mm = sensor.pixel_pitch * 1e-3
    x0 = -(sensor.pixel_count - 1) / 2.0 * pitch_mm
    vis = kern.render_visibility(
        kind, alpha_rad, beam_hw, emit_hw, light_dist, tan_div,
        scene.object_distance, shadow_lo, shadow_hi, has_occ,
        x0, pitch_mm, sensor.pixel_count, cfg.rays_per_pixel, cfg.rng_seed)

    ideal = _illumination_scale(vis, light, sensor, sensor.pixel_count)
    return _digitize(ideal, sensor, cfg, frame_index, timestamp)


def analytic_penumbra(light: LightModel, object_distance: float) -> float:
    """Full geometric transition width (mm) of a knife edge at the sensor.

    Similar triangles: an extended emitter of diameter S at distance L throws
    a penumbra S*d/(L-d) for an object d in front of the sensor; a collimated
    beam with residual slope alpha throws 2*alpha*d; ideal telecentric light
    casts exact shadows. The 10->90% intensity extent of these (linear) ramps
    is 0.8x this full width.
    """
    if object_distance <= 0:
        raise GeometryError("object_distance must be > 0")
    if isinstance(light, IdealTelecentric):
        return 0.0
    if isinstance(light, CollimatedLaser):
        return 2.0 * (light.telecentric_slope_alpha * 1e-3) * object_distance
    if isinstance(light, ExtendedLed):
        if light.distance_to_sensor <= object_distance:
            raise GeometryError(
                "light must be farther from the sensor than the object")
        return (light.emitter_diameter * object_distance
                / (light.distance_to_sensor - object_distance))
    raise ValidationError(f"unknown light model {type(light).__name__}")


def _pixel_box_coverage(centers: np.ndarray, pitch: float,
                        lo: float, hi: float) -> np.ndarray:
    """Fraction of each full-pitch pixel aperture covered by [lo, hi]."""
    left = centers - pitch / 2.0
    right = centers + pitch / 2.0
    overlap = np.minimum(right, hi) - np.maximum(left, lo)
    return np.clip(overlap, 0.0, pitch) / pitch


def render_lens(scene: SceneSetup, light: LightModel, lens: LensModel,
                sensor: SensorSpec, cfg: RenderConfig, *,
                illumination: str = "backlit", frame_index: int = 0,
                timestamp: float = 0.0) -> LineImage:
    """Pinhole-projected image of the scene.

    ``backlit``: the occluder silhouette appears as a shadow on a bright
    field. ``frontlit``: the occluder is a bright laser-line target on a dark
    background, rendered with a Gaussian radiance profile (sigma = width/4)
    so the imaged spot has a well-defined peak for triangulation.
    """
    if illumination not in ("backlit", "frontlit"):
        raise ValidationError(
            "illumination must be 'backlit' or 'frontlit'")
    z = scene.object_distance
    if z <= 0:
        raise GeometryError("object distance (z) must be > 0")

    centers = sensor.pixel_centers()
    pitch_mm = sensor.pixel_pitch * 1e-3
    n = sensor.pixel_count

    if scene.occluder is None:
        vis = (np.ones(n) if illumination == "backlit" else np.zeros(n))
    else:
        occ = scene.occluder
        mag = lens.projection_distance / z
        u_edges = sorted((-(occ.center_x - occ.diameter / 2.0) * mag,
                          -(occ.center_x + occ.diameter / 2.0) * mag))
        if illumination == "backlit":
            vis = 1.0 - _pixel_box_coverage(centers, pitch_mm,
                                            u_edges[0], u_edges[1])
        else:
            u0 = -occ.center_x * mag
            sigma = (occ.diameter / 4.0) * mag
            # mean of exp(-(u-u0)^2 / 2 sigma^2) over each pixel aperture
            a = (centers - pitch_mm / 2.0 - u0) / (sigma * math.sqrt(2.0))
            b = (centers + pitch_mm / 2.0 - u0) / (sigma * math.sqrt(2.0))
            vis = (special.erf(b) - special.erf(a)) * \
                (sigma * math.sqrt(math.pi / 2.0) / pitch_mm)

    ideal = _illumination_scale(vis, light, sensor, n)
    return _digitize(ideal, sensor, cfg, frame_index, timestamp)


def generate_speckle(params: SpeckleParams, pixel_count: int) -> np.ndarray:
    """Strictly positive multiplicative speckle profile, mean 1.

    Correlated lognormal field: white normals smoothed with a Gaussian kernel
    (sigma = correlation_length/2, so the autocorrelation falls to 1/e at the
    requested correlation length), renormalized to unit variance, then
    exponentiated with the log-sigma that makes std/mean equal ``contrast``.
    Deterministic in ``params.seed``.
    """
    n = int(pixel_count)
    if n < 1:
        raise ValidationError("pixel_count must be >= 1")
    if params.contrast == 0.0:
        return np.ones(n)
    g = gaussians(params.seed, STREAM_SPECKLE, n)
    sigma_k = params.correlation_length / 2.0
    radius = max(1, int(4.0 * sigma_k + 0.5))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma_k) ** 2)
    kernel /= kernel.sum()
    smooth = ndimage.convolve1d(g, kernel, mode="wrap")
    smooth /= math.sqrt(float(np.sum(kernel ** 2)))
    s = math.sqrt(math.log1p(params.contrast ** 2))
    return np.exp(s * smooth - 0.5 * s * s)


def trace_rays(light: LightModel, scene: SceneSetup, n_rays: int, seed: int,
               *, light_plane_z: Optional[float] = None,
               span_mm: Optional[float] = None) -> List[RaySegment]:
    """Sample rays from the light plane down to the sensor plane for a
    ray-path diagram; blocked rays are truncated at the occluder plane.

    The collimated and ideal models carry no physical light distance, so the
    plot plane defaults to twice the object distance (min 20 mm).
    """
    if n_rays < 1:
        raise ValidationError("n_rays must be >= 1")
    d = scene.object_distance
    occ = scene.occluder
    if occ is not None:
        shadow = (occ.center_x - occ.diameter / 2.0,
                  occ.center_x + occ.diameter / 2.0)
    else:
        shadow = None

    if isinstance(light, ExtendedLed):
        if d >= light.distance_to_sensor:
            raise GeometryError(
                "object plane must lie strictly between light and sensor")
        z_light = light.distance_to_sensor
    else:
        z_light = light_plane_z if light_plane_z is not None else max(2.0 * d, 20.0)
    if z_light <= d:
        raise GeometryError("light plane must be above the object plane")

    u_pos = uniforms(stream_key(seed, 0, 0), 0, n_rays)
    u_dir = uniforms(stream_key(seed, 1, 0), 0, n_rays)

    if isinstance(light, IdealTelecentric):
        if span_mm is None:
            span_mm = 1.25 * (abs(occ.center_x) + occ.diameter) if occ else 4.0
        launch_x = (2.0 * u_pos - 1.0) * span_mm
        slopes = np.zeros(n_rays)
    elif isinstance(light, CollimatedLaser):
        launch_x = (2.0 * u_pos - 1.0) * light.beam_half_width
        slopes = (2.0 * u_dir - 1.0) * (light.telecentric_slope_alpha * 1e-3)
    else:  # ExtendedLed
        launch_x = (2.0 * u_pos - 1.0) * (light.emitter_diameter / 2.0)
        slopes = (2.0 * u_dir - 1.0) * math.tan(light.divergence_half_angle)

    segments = []
    for xl, sl in zip(launch_x, slopes):
        x_obj = xl + sl * (z_light - d)
        blocked = shadow is not None and shadow[0] < x_obj < shadow[1]
        if blocked:
            segments.append(RaySegment(start=(float(xl), z_light),
                                       end=(float(x_obj), d), blocked=True))
        else:
            x_end = xl + sl * z_light
            segments.append(RaySegment(start=(float(xl), z_light),
                                       end=(float(x_end), 0.0), blocked=False))
    return segments
