"""Shared domain types for the line-scan workbench.

Everything here is an immutable value object with invariant checks in
``__post_init__``; the algorithms live in :mod:`linescan.optics`,
:mod:`linescan.dsp`, :mod:`linescan.sizing` and :mod:`linescan.stream`.

Units are fixed package-wide: mm for geometry, micrometres for pixel pitch,
seconds for time, Hz for rates, radians for the LED divergence angle and
milliradians for the telecentric slope of a collimated laser.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np


class LinescanError(Exception):
    """Base class for all package errors."""


class ValidationError(LinescanError, ValueError):
    """A domain type was constructed with a violated invariant."""


class GeometryError(LinescanError, ValueError):
    """Scene/light geometry is inconsistent (e.g. object behind the light)."""


class ConfigError(LinescanError, ValueError):
    """A run configuration document is malformed or inconsistent."""


class DataFormatError(LinescanError, ValueError):
    """A data file (CSV) is malformed."""


class MeasurementError(LinescanError):
    """A frame could not be measured (e.g. no object in view)."""


class CalibrationError(LinescanError, ValueError):
    """A height calibration table is unusable."""


class FlatFieldError(LinescanError, ValueError):
    """Flat-field normalization hit a reference pixel at/below dark level."""


class PeakBoundaryError(MeasurementError):
    """The brightest pixel sits on the frame boundary; no parabola fits."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


@dataclass(frozen=True)
class SensorSpec:
    """Geometry and signal chain of a 1D sensor.

    ``saturation_fraction`` is the fraction of ADC full scale an unoccluded
    pixel reads; ``noise_sigma`` is additive Gaussian noise in counts applied
    before quantization.
    """

    pixel_count: int
    pixel_pitch: float          # micrometres
    bit_depth: int = 8
    dark_level: float = 2.0     # ADC counts
    noise_sigma: float = 1.0    # ADC counts
    saturation_fraction: float = 0.85
    max_line_rate: float = 9480.0  # Hz

    def __post_init__(self) -> None:
        _require(self.pixel_count >= 2, "pixel_count must be >= 2")
        _require(self.pixel_pitch > 0, "pixel_pitch must be > 0")
        _require(8 <= self.bit_depth <= 16, "bit_depth must be in [8, 16]")
        full = (1 << self.bit_depth) - 1
        _require(0 <= self.dark_level < full,
                 "dark_level must be in [0, 2^bit_depth - 1)")
        _require(0 <= self.noise_sigma < 2 ** self.bit_depth,
                 "noise_sigma must be in [0, 2^bit_depth)")
        _require(0 < self.saturation_fraction <= 1,
                 "saturation_fraction must be in (0, 1]")
        _require(self.max_line_rate > 0, "max_line_rate must be > 0")
        _require(self.saturation_fraction * full > self.dark_level,
                 "saturation_fraction * full scale must exceed dark_level")

    @property
    def active_length(self) -> float:
        """Active sensor length in mm."""
        return self.pixel_count * self.pixel_pitch * 1e-3

    @property
    def full_scale(self) -> int:
        """Maximum ADC code, 2^bit_depth - 1."""
        return (1 << self.bit_depth) - 1

    def pixel_centers(self) -> np.ndarray:
        """Pixel-center x coordinates in mm, symmetric about the optical axis."""
        n = self.pixel_count
        return (np.arange(n) - (n - 1) / 2.0) * (self.pixel_pitch * 1e-3)


@dataclass(frozen=True)
class SpeckleParams:
    """Multiplicative laser speckle: std/mean ``contrast``, spatial
    correlation length in pixels, deterministic in ``seed``."""

    contrast: float
    correlation_length: float = 2.0  # pixels
    seed: int = 0

    def __post_init__(self) -> None:
        _require(0 <= self.contrast <= 1, "contrast must be in [0, 1]")
        _require(self.correlation_length >= 1,
                 "correlation_length must be >= 1 pixel")


@dataclass(frozen=True)
class ExtendedLed:
    """Extended LED source behind a reflector at a finite distance."""

    distance_to_sensor: float      # mm
    emitter_diameter: float        # mm
    divergence_half_angle: float   # rad

    def __post_init__(self) -> None:
        _require(self.distance_to_sensor > 0, "distance_to_sensor must be > 0")
        _require(self.emitter_diameter > 0, "emitter_diameter must be > 0")
        _require(0 < self.divergence_half_angle < math.pi / 2,
                 "divergence_half_angle must be in (0, pi/2)")


@dataclass(frozen=True)
class CollimatedLaser:
    """Beam-expanded laser diode: nearly parallel rays with a residual
    telecentric slope, optionally speckled."""

    telecentric_slope_alpha: float          # mrad
    beam_half_width: float = 10.0           # mm
    speckle: Optional[SpeckleParams] = None

    def __post_init__(self) -> None:
        _require(self.telecentric_slope_alpha >= 0,
                 "telecentric_slope_alpha must be >= 0")
        _require(self.beam_half_width > 0, "beam_half_width must be > 0")


@dataclass(frozen=True)
class IdealTelecentric:
    """Perfectly parallel back light of infinite extent (alpha = 0)."""


LightModel = Union[ExtendedLed, CollimatedLaser, IdealTelecentric]


@dataclass(frozen=True)
class Occluder:
    """A 1D hard occluder (wire) in the object plane."""

    center_x: float   # mm
    diameter: float   # mm

    def __post_init__(self) -> None:
        _require(self.diameter > 0, "occluder diameter must be > 0")


@dataclass(frozen=True)
class Motion:
    """Lateral vibration plus transport speed of the scanned object."""

    vibration_amplitude: float = 0.0   # mm
    vibration_frequency: float = 0.0   # Hz
    transport_speed: float = 0.0       # m/s

    def __post_init__(self) -> None:
        _require(self.vibration_amplitude >= 0,
                 "vibration_amplitude must be >= 0")
        _require(self.vibration_frequency >= 0,
                 "vibration_frequency must be >= 0")
        _require(self.transport_speed >= 0, "transport_speed must be >= 0")


@dataclass(frozen=True)
class SceneSetup:
    """Axial geometry of one scan line: object plane distance from the
    sensor, optional occluder and optional motion profile."""

    object_distance: float             # mm, object plane to sensor plane
    occluder: Optional[Occluder] = None
    motion: Optional[Motion] = None

    def __post_init__(self) -> None:
        _require(self.object_distance > 0, "object_distance must be > 0")


@dataclass(frozen=True, eq=False)
class LineImage:
    """One acquired or simulated line: fixed-length vector of ADC counts."""

    frame_index: int
    timestamp: float   # seconds
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 1:
            raise ValidationError("values must be a 1D vector")
        if arr.size and (np.min(arr) < 0 or np.max(arr) > 0xFFFF):
            raise ValidationError(
                "values must be ADC counts in [0, 65535]")
        arr = arr.astype(np.uint16, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.shape[0]


Polarity = Literal["falling", "rising"]


@dataclass(frozen=True)
class EdgeEstimate:
    """A detected intensity transition: subpixel position, 10->90% width in
    pixels and polarity."""

    position: float
    width: float
    polarity: Polarity

    def __post_init__(self) -> None:
        _require(self.position >= 0, "position must be >= 0")
        _require(self.width >= 0, "width must be >= 0")
        _require(self.polarity in ("falling", "rising"),
                 "polarity must be 'falling' or 'rising'")


@dataclass(frozen=True)
class DiameterResult:
    """Wire diameter from a falling/rising edge pair, with alarm flag."""

    diameter: float        # mm
    left_edge: EdgeEstimate
    right_edge: EdgeEstimate
    alarm: bool
    ambiguous: bool = False   # more than one candidate shadow in the frame

    def __post_init__(self) -> None:
        _require(self.right_edge.position > self.left_edge.position,
                 "right edge must lie right of left edge")
        _require(self.diameter > 0, "diameter must be > 0")


@dataclass(frozen=True)
class HeightEstimate:
    """Sheet-of-light output: height in mm and the peak apex index it came
    from."""

    height: float       # mm
    apex_index: float   # subpixel


@dataclass(frozen=True)
class HeightCalibration:
    """Monotone (pixel index -> height) lookup table, interpolated
    piecewise-linearly between knots."""

    samples: tuple     # of (pixel_index, height_mm), sorted by pixel_index

    def __post_init__(self) -> None:
        samples = tuple((float(i), float(h)) for i, h in self.samples)
        if len(samples) < 2:
            raise CalibrationError("calibration needs >= 2 samples")
        idx = [s[0] for s in samples]
        hts = [s[1] for s in samples]
        if not all(math.isfinite(v) for v in idx + hts):
            raise CalibrationError("calibration knots must be finite")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise CalibrationError(
                "pixel_index must be strictly increasing across samples")
        rising = all(b > a for a, b in zip(hts, hts[1:]))
        falling = all(b < a for a, b in zip(hts, hts[1:]))
        if not (rising or falling):
            raise CalibrationError("heights must be strictly monotonic")
        object.__setattr__(self, "samples", samples)

    @property
    def index_range(self) -> tuple:
        return (self.samples[0][0], self.samples[-1][0])


@dataclass(frozen=True)
class TimingModel:
    """Per-line timing budget of the acquisition chain.

    With ``overlapped_readout`` the sensor can be read out during the next
    integration (analog-style sensors); otherwise readout must wait for the
    integration to finish and only the computation can hide under it.
    """

    integration_time: float        # s
    readout_time: float            # s
    compute_time: float = 0.0      # s
    overlapped_readout: bool = False

    def __post_init__(self) -> None:
        _require(self.integration_time >= 0, "integration_time must be >= 0")
        _require(self.readout_time >= 0, "readout_time must be >= 0")
        _require(self.compute_time >= 0, "compute_time must be >= 0")


@dataclass(frozen=True)
class TriangulationGeometry:
    """Sheet-of-light triangulation layout: laser line parallel to the
    camera axis at ``baseline`` offset, pinhole projection distance, and the
    surface standoff at height zero."""

    baseline: float                # mm, lateral laser offset
    projection_distance: float    # mm, pinhole image distance
    standoff: float                # mm, surface distance at height 0
    spot_width: float = 2.0        # mm, laser line footprint on the surface

    def __post_init__(self) -> None:
        _require(self.baseline != 0, "baseline must be nonzero")
        _require(self.projection_distance > 0,
                 "projection_distance must be > 0")
        _require(self.standoff > 0, "standoff must be > 0")
        _require(self.spot_width > 0, "spot_width must be > 0")

    def surface_distance(self, height: float) -> float:
        """Camera-to-surface distance (mm) for a given height above zero."""
        return self.standoff + height


def mlx75306_preset() -> SensorSpec:
    """The 142-pixel CMOS line sensor preset: 7 mm active length
    (pitch 7000/142 um) and 9.48 kHz maximal line rate.

    Bit depth, dark level and noise are workbench defaults, not vendor data.
    """
    return SensorSpec(
        pixel_count=142,
        pixel_pitch=7000.0 / 142.0,
        bit_depth=8,
        dark_level=2.0,
        noise_sigma=1.0,
        saturation_fraction=0.85,
        max_line_rate=9480.0,
    )


def led_reflector_preset(distance_to_sensor: float = 400.0) -> ExtendedLed:
    """Power LED behind a 4-degree reflector: 8 mm effective emitter,
    2-degree divergence half angle."""
    return ExtendedLed(
        distance_to_sensor=distance_to_sensor,
        emitter_diameter=8.0,
        divergence_half_angle=math.radians(2.0),
    )


def laser_expander_preset(
    telecentric_slope_alpha: float = 0.1,
    speckle: Optional[SpeckleParams] = None,
) -> CollimatedLaser:
    """Laser diode with beam expander; slope in mrad, beam wide enough to
    cover the 7 mm sensor."""
    return CollimatedLaser(
        telecentric_slope_alpha=telecentric_slope_alpha,
        beam_half_width=10.0,
        speckle=speckle,
    )
