"""1D measurement algorithms: background/speckle compensation, subpixel edge
detection, sharpness metric, diameter with alarm, three-point parabolic peak
localization and height calibration/mapping.

All operations are pure; frames can be processed from any number of workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import backend
from .model import (
    DiameterResult,
    EdgeEstimate,
    FlatFieldError,
    HeightCalibration,
    LineImage,
    MeasurementError,
    PeakBoundaryError,
    SensorSpec,
    ValidationError,
    _require,
)

_WIDTH_EPS = 1e-6   # guard for zero-width edges in sharpness_rate


@dataclass(frozen=True)
class EdgeDetectConfig:
    """Threshold-crossing edge detection settings.

    Plateaus are the ``plateau_quantiles`` percentiles of the frame; an edge
    is a monotone crossing of ``low + threshold_fraction * (high - low)``.
    Frames whose plateau contrast is below ``min_contrast`` counts (default
    10x the default sensor noise) yield no edges.
    """

    threshold_fraction: float = 0.5
    plateau_quantiles: Tuple[float, float] = (0.1, 0.9)
    min_contrast: float = 10.0

    def __post_init__(self) -> None:
        _require(0 < self.threshold_fraction < 1,
                 "threshold_fraction must be in (0, 1)")
        lo, hi = self.plateau_quantiles
        _require(0 <= lo < hi <= 1,
                 "plateau_quantiles must satisfy 0 <= low < high <= 1")
        _require(self.min_contrast >= 0, "min_contrast must be >= 0")


@dataclass(frozen=True)
class DiameterConfig:
    """Wire-diameter measurement: nominal range in mm, pixel pitch in um."""

    nominal_range: Tuple[float, float]
    pixel_pitch: float
    edge_config: EdgeDetectConfig = field(default_factory=EdgeDetectConfig)

    def __post_init__(self) -> None:
        lo, hi = self.nominal_range
        _require(0 < lo < hi, "nominal_range must satisfy 0 < min < max")
        _require(self.pixel_pitch > 0, "pixel_pitch must be > 0")


class PeakFit(NamedTuple):
    """Parabolic apex fit; ``degenerate`` marks a flat (e.g. saturated)
    triple that fell back to the integer argmax."""

    apex: float
    degenerate: bool


class HeightValue(NamedTuple):
    """Interpolated height; ``out_of_range`` marks a clamped apex."""

    height: float
    out_of_range: bool


def background_correct(frame: LineImage, reference: LineImage,
                       mode: str = "subtract", *,
                       sensor: SensorSpec) -> LineImage:
    """Remove the fixed illumination pattern using a no-object reference.

    ``subtract``: out = frame - reference + dark_level. ``normalize``
    (flat-field): out = dark + (frame - dark) * (R - dark)/(reference - dark)
    with R the reference median; this is the one that cancels multiplicative
    speckle. Output is re-quantized and clamped to the ADC range.
    """
    if len(frame) != len(reference):
        raise ValidationError(
            f"frame length {len(frame)} != reference length {len(reference)}")
    f = frame.values.astype(np.float64)
    rf = reference.values.astype(np.float64)
    dark = sensor.dark_level
    if mode == "subtract":
        out = f - rf + dark
    elif mode == "normalize":
        denom = rf - dark
        bad = np.flatnonzero(denom <= 0)
        if bad.size:
            raise FlatFieldError(
                f"reference at/below dark level at pixel {int(bad[0])}")
        r_med = float(np.median(rf))
        out = dark + (f - dark) * (r_med - dark) / denom
    else:
        raise ValidationError("mode must be 'subtract' or 'normalize'")
    out = np.clip(np.rint(out), 0, sensor.full_scale)
    return LineImage(frame_index=frame.frame_index, timestamp=frame.timestamp,
                     values=out.astype(np.uint16))


def detect_edges(frame: LineImage,
                 cfg: Optional[EdgeDetectConfig] = None) -> List[EdgeEstimate]:
    """Find every monotone plateau-to-plateau transition in a frame.

    Subpixel positions come from the area balance of the transition (exact on
    noise-free piecewise-linear transitions and on pixel-aperture-limited
    steps); widths are the interpolated 10%->90% crossing distance. Edges are
    ordered by position; a frame below the contrast floor yields [].
    """
    cfg = cfg or EdgeDetectConfig()
    if len(frame) < 3:
        raise ValidationError("frame must have at least 3 pixels")
    kern = backend.active_backend()
    pos, width, pol, _low, _high = kern.detect_edges_core(
        frame.values, cfg.threshold_fraction,
        cfg.plateau_quantiles[0], cfg.plateau_quantiles[1], cfg.min_contrast)
    edges = [
        EdgeEstimate(position=float(p), width=float(w),
                     polarity="falling" if int(q) == 0 else "rising")
        for p, w, q in zip(pos, width, pol)
    ]
    edges.sort(key=lambda e: e.position)
    return edges


def plateau_levels(frame: LineImage,
                   cfg: Optional[EdgeDetectConfig] = None) -> Tuple[float, float]:
    """(low, high) plateau estimates used by the edge detector."""
    cfg = cfg or EdgeDetectConfig()
    kern = backend.active_backend()
    s = np.sort(frame.values.astype(np.float64))
    return (kern.percentile_sorted(s, cfg.plateau_quantiles[0]),
            kern.percentile_sorted(s, cfg.plateau_quantiles[1]))


def sharpness_rate(frame: LineImage, edge: EdgeEstimate,
                   cfg: Optional[EdgeDetectConfig] = None) -> float:
    """Plateau span (ADC counts) divided by the edge width (pixels);
    larger means sharper."""
    low, high = plateau_levels(frame, cfg)
    return (high - low) / max(edge.width, _WIDTH_EPS)


def _shadow_pairs(edges: Sequence[EdgeEstimate]) -> List[Tuple[EdgeEstimate, EdgeEstimate]]:
    pairs = []
    for a, b in zip(edges, edges[1:]):
        if a.polarity == "falling" and b.polarity == "rising":
            pairs.append((a, b))
    return pairs


def measure_diameter(frame: LineImage, cfg: DiameterConfig) -> DiameterResult:
    """Diameter of the (deepest) shadow in a frame, with alarm flag.

    Raises :class:`MeasurementError` when no complete falling/rising pair is
    found. With several candidate shadows the deepest one (largest plateau
    drop) is measured and the result is marked ambiguous.
    """
    edges = detect_edges(frame, cfg.edge_config)
    pairs = _shadow_pairs(edges)
    if not pairs:
        raise MeasurementError(
            f"no object: found {len(edges)} edge(s), need a falling/rising pair")
    if len(pairs) == 1:
        left, right = pairs[0]
        ambiguous = False
    else:
        v = frame.values.astype(np.float64)
        _low, high = plateau_levels(frame, cfg.edge_config)

        def depth(pair: Tuple[EdgeEstimate, EdgeEstimate]) -> float:
            i0 = max(0, int(np.ceil(pair[0].position)))
            i1 = min(len(v) - 1, int(np.floor(pair[1].position)) + 1)
            return high - float(np.min(v[i0:i1 + 1]))

        left, right = max(pairs, key=depth)
        ambiguous = True
    diameter = (right.position - left.position) * cfg.pixel_pitch * 1e-3
    lo, hi = cfg.nominal_range
    return DiameterResult(diameter=diameter, left_edge=left, right_edge=right,
                          alarm=not (lo <= diameter <= hi),
                          ambiguous=ambiguous)


def find_peak_apex(frame: LineImage) -> PeakFit:
    """Subpixel apex of the parabola through the brightest pixel and its two
    neighbours.

    Ties pick the lowest index. A maximum on the frame boundary raises
    :class:`PeakBoundaryError`. Degenerate fits are flagged instead of
    failing the stream: a zero-curvature triple falls back to the integer
    argmax, and a flat-topped (e.g. saturated) peak - the right neighbour
    tying the maximum - keeps the fit but is marked unreliable.
    """
    v = frame.values.astype(np.float64)
    if v.shape[0] < 3:
        raise ValidationError("frame must have at least 3 pixels")
    i = int(np.argmax(v))
    if i == 0 or i == v.shape[0] - 1:
        raise PeakBoundaryError(f"peak at frame boundary (pixel {i})")
    ym, y0, yp = v[i - 1], v[i], v[i + 1]
    denom = ym - 2.0 * y0 + yp
    if denom == 0.0:
        return PeakFit(apex=float(i), degenerate=True)
    return PeakFit(apex=i + 0.5 * (ym - yp) / denom, degenerate=yp == y0)


def calibrate_height(
        samples: Iterable[Tuple[float, float]]) -> HeightCalibration:
    """Build a piecewise-linear (pixel index -> height) calibration.

    Samples are sorted by pixel index; duplicate indices or non-monotonic
    heights are rejected.
    """
    ordered = sorted(((float(i), float(h)) for i, h in samples),
                     key=lambda s: s[0])
    return HeightCalibration(samples=tuple(ordered))


def height_from_peak(apex: float, cal: HeightCalibration) -> HeightValue:
    """Map a peak apex index to a height by interpolating the calibration
    table; apexes outside the calibrated range clamp to the nearest knot and
    are flagged."""
    idx = np.array([s[0] for s in cal.samples])
    hts = np.array([s[1] for s in cal.samples])
    lo, hi = cal.index_range
    out_of_range = apex < lo or apex > hi
    return HeightValue(height=float(np.interp(apex, idx, hts)),
                       out_of_range=out_of_range)
