"""Requirement calculators: pixel count, line rate, illumination energy and
the achievable line rate of an acquisition timing budget."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import TimingModel, ValidationError, _require


@dataclass(frozen=True)
class SizingRequirement:
    """Mechanical-study inputs for sensor selection."""

    field_of_view: float      # mm
    accuracy: float           # mm
    subpixel_factor: float    # >= 1
    object_speed: float       # m/s
    sample_interval: float    # mm

    def __post_init__(self) -> None:
        for name in ("field_of_view", "accuracy", "subpixel_factor",
                     "object_speed", "sample_interval"):
            _require(getattr(self, name) > 0, f"{name} must be > 0")
        _require(self.subpixel_factor >= 1, "subpixel_factor must be >= 1")

    def pixel_count(self) -> int:
        return required_pixel_count(self.field_of_view, self.accuracy,
                                    self.subpixel_factor)

    def line_rate(self) -> float:
        return required_line_rate(self.object_speed, self.sample_interval)


def required_pixel_count(fov: float, accuracy: float,
                         subpixel_factor: float = 1.0) -> int:
    """Minimum pixels to resolve ``accuracy`` (mm) over ``fov`` (mm).

    Subpixel interpolation divides the needed count by ``subpixel_factor``.
    Rounded up: requirements are minima.
    """
    if fov <= 0 or accuracy <= 0:
        raise ValidationError("fov and accuracy must be > 0")
    if subpixel_factor < 1:
        raise ValidationError("subpixel_factor must be >= 1")
    return math.ceil(fov / (accuracy * subpixel_factor))


def required_line_rate(speed: float, sample_interval: float) -> float:
    """Line rate (Hz) to sample every ``sample_interval`` mm at ``speed`` m/s."""
    if speed <= 0 or sample_interval <= 0:
        raise ValidationError("speed and sample_interval must be > 0")
    return speed / (sample_interval * 1e-3)


def max_transport_speed(line_rate: float, sample_interval: float) -> float:
    """Fastest object speed (m/s) a ``line_rate`` can follow at the given
    sample interval (mm)."""
    if line_rate <= 0 or sample_interval <= 0:
        raise ValidationError("line_rate and sample_interval must be > 0")
    return line_rate * sample_interval * 1e-3


def led_electrical_energy(saturation_energy_density: float, area: float,
                          eta_led: float, eta_optics: float) -> float:
    """Electrical energy (J) to saturate the sensor over an illuminated area.

    ``saturation_energy_density`` in J/m^2, ``area`` in m^2, efficiencies
    dimensionless in (0, 1].
    """
    if saturation_energy_density <= 0 or area <= 0:
        raise ValidationError(
            "saturation_energy_density and area must be > 0")
    if not (0 < eta_led <= 1) or not (0 < eta_optics <= 1):
        raise ValidationError("efficiencies must be in (0, 1]")
    return (saturation_energy_density * area) / (eta_led * eta_optics)


def achievable_line_rate(t: TimingModel) -> float:
    """Sustained line rate (Hz) for a timing budget.

    Non-overlapped readout (digital SPI-style sensors): computations can hide
    under the integration, readout cannot, so the period is
    ``max(integration, compute) + readout``. Overlapped readout (analog-style
    sensors): ``max(integration, readout + compute)``.
    """
    if t.integration_time + t.readout_time <= 0:
        raise ValidationError("integration_time + readout_time must be > 0")
    if t.overlapped_readout:
        period = max(t.integration_time, t.readout_time + t.compute_time)
    else:
        period = max(t.integration_time, t.compute_time) + t.readout_time
    if period <= 0:
        raise ValidationError("timing model yields a zero period")
    return 1.0 / period


def mlx75306_timing() -> TimingModel:
    """Timing fit reproducing the sensor preset's 9.48 kHz maximal rate."""
    return TimingModel(integration_time=50e-6, readout_time=55.5e-6,
                       compute_time=0.0, overlapped_readout=False)


def spi_limited_timing() -> TimingModel:
    """Timing fit for the interface-bound 3.5 kHz distance-measurement rig."""
    return TimingModel(integration_time=100e-6, readout_time=185.7e-6,
                       compute_time=50e-6, overlapped_readout=False)
