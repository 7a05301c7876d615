"""Pure-Python/numpy fallback for the hot kernels.

This module mirrors :mod:`linescan._kernels` (the Cython extension) function
for function and must stay bit-identical to it: both sides use the same
counter-based uint64 RNG, the same IEEE add/sub/mul/div expressions in the
same order, and no libm calls inside the sampled math. ``tests/test_backends``
asserts exact equality of outputs.
"""

from __future__ import annotations

import numpy as np

from ._rng import STREAM_APERTURE, STREAM_AUX, stream_key, uniforms

BACKEND_NAME = "python"

LIGHT_IDEAL = 0
LIGHT_LASER = 1
LIGHT_LED = 2

POL_FALLING = 0
POL_RISING = 1


def render_visibility(
    light_kind: int,
    alpha_rad: float,
    beam_half_width: float,
    emitter_half_width: float,
    light_distance: float,
    tan_divergence: float,
    object_distance: float,
    shadow_lo: float,
    shadow_hi: float,
    has_occluder: bool,
    x0: float,
    pitch_mm: float,
    n_pixels: int,
    rays_per_pixel: int,
    seed: int,
) -> np.ndarray:
    """Fraction of source radiance reaching each pixel, in [0, 1].

    Per pixel, ``rays_per_pixel`` arrival points are stratified across the
    full-pitch aperture; the source-side coordinate (emitter point or angular
    deviation) is sampled from an independent substream. A ray is discarded
    (not emitted) when it violates the source constraint - outside the LED
    divergence cone or the laser beam footprint - and blocked when its
    object-plane x falls inside the occluder interval.
    """
    n = int(n_pixels)
    nr = int(rays_per_pixel)
    out = np.empty(n, dtype=np.float64)
    strata = np.arange(nr, dtype=np.float64)
    inv_n = float(nr)
    t_obj = 0.0
    if light_kind == LIGHT_LED:
        t_obj = (light_distance - object_distance) / light_distance

    for i in range(n):
        xc = x0 + i * pitch_mm
        u_ap = uniforms(stream_key(seed, STREAM_APERTURE, i), 0, nr)
        xs = xc + ((strata + u_ap) / inv_n - 0.5) * pitch_mm

        if light_kind == LIGHT_IDEAL:
            acc = nr
            if has_occluder:
                blocked = (xs > shadow_lo) & (xs < shadow_hi)
                unb = acc - int(np.count_nonzero(blocked))
            else:
                unb = acc
        elif light_kind == LIGHT_LASER:
            u_aux = uniforms(stream_key(seed, STREAM_AUX, i), 0, nr)
            slope = (2.0 * u_aux - 1.0) * alpha_rad
            accepted = np.abs(xs) <= beam_half_width
            acc = int(np.count_nonzero(accepted))
            if has_occluder:
                x_obj = xs + slope * object_distance
                blocked = (x_obj > shadow_lo) & (x_obj < shadow_hi)
                unb = int(np.count_nonzero(accepted & ~blocked))
            else:
                unb = acc
        else:  # LIGHT_LED
            u_aux = uniforms(stream_key(seed, STREAM_AUX, i), 0, nr)
            xe = (2.0 * u_aux - 1.0) * emitter_half_width
            slope = (xs - xe) / light_distance
            accepted = np.abs(slope) <= tan_divergence
            acc = int(np.count_nonzero(accepted))
            if has_occluder:
                x_obj = xe + (xs - xe) * t_obj
                blocked = (x_obj > shadow_lo) & (x_obj < shadow_hi)
                unb = int(np.count_nonzero(accepted & ~blocked))
            else:
                unb = acc

        out[i] = (float(unb) / float(acc)) if acc > 0 else 0.0
    return out


def percentile_sorted(sorted_vals: np.ndarray, q: float) -> float:
    """Linear-interpolation percentile on an ascending array, q in [0, 1]."""
    n = sorted_vals.shape[0]
    h = q * (n - 1)
    lo = int(h)
    if lo >= n - 1:
        return float(sorted_vals[n - 1])
    frac = h - lo
    a = float(sorted_vals[lo])
    b = float(sorted_vals[lo + 1])
    return a + (b - a) * frac


def detect_edges_core(
    values: np.ndarray,
    threshold_fraction: float,
    q_lo: float,
    q_hi: float,
    min_contrast: float,
):
    """Scan one line for monotone threshold crossings.

    Returns ``(positions, widths, polarities, low, high)``; empty arrays when
    the plateau contrast is below ``min_contrast``.

    The subpixel position is the area-balance point of the transition (the
    integrated profile recovers the geometric edge exactly for both
    pixel-aperture-limited steps and sample-aligned linear ramps); the width
    is the distance between the interpolated 10% and 90% level crossings of
    the same transition. For ``threshold_fraction != 0.5`` the position is
    shifted by the exact offset of a linear transition.
    """
    v = np.ascontiguousarray(values, dtype=np.float64)
    n = v.shape[0]
    empty = (np.empty(0), np.empty(0), np.empty(0, dtype=np.int32), 0.0, 0.0)
    if n < 3:
        return empty

    s = np.sort(v)
    low = percentile_sorted(s, q_lo)
    high = percentile_sorted(s, q_hi)
    span = high - low
    if span < min_contrast:
        return empty[0], empty[1], empty[2], low, high

    thr = low + threshold_fraction * span
    lvl_lo = low + 0.1 * span
    lvl_hi = low + 0.9 * span
    stop_hi = high - 0.02 * span
    stop_lo = low + 0.02 * span

    cross_idx = []
    cross_pol = []
    for i in range(n - 1):
        a = v[i]
        b = v[i + 1]
        if a >= thr and b < thr:
            cross_idx.append(i)
            cross_pol.append(POL_FALLING)
        elif a < thr and b >= thr:
            cross_idx.append(i)
            cross_pol.append(POL_RISING)

    m = len(cross_idx)
    positions = np.empty(m, dtype=np.float64)
    widths = np.empty(m, dtype=np.float64)
    pols = np.empty(m, dtype=np.int32)

    for e in range(m):
        i = cross_idx[e]
        pol = cross_pol[e]
        lb = cross_idx[e - 1] + 1 if e > 0 else 0
        rb = cross_idx[e + 1] if e + 1 < m else n - 1

        if pol == POL_FALLING:
            l = i
            while l > lb and v[l] < stop_hi:
                l -= 1
            r = i + 1
            while r < rb and v[r] > stop_lo:
                r += 1
            acc = 0.0
            for k in range(l, r + 1):
                acc += v[k] - low
            pos50 = (l - 0.5) + acc / span
            p_hi = float(l)
            for k in range(l, r):
                if v[k] >= lvl_hi > v[k + 1]:
                    p_hi = k + (v[k] - lvl_hi) / (v[k] - v[k + 1])
                    break
            p_lo = float(r)
            for k in range(r - 1, l - 1, -1):
                if v[k] >= lvl_lo > v[k + 1]:
                    p_lo = k + (v[k] - lvl_lo) / (v[k] - v[k + 1])
                    break
            width = p_lo - p_hi
            if width < 0.0:
                width = 0.0
            pos = pos50 + (0.5 - threshold_fraction) * (width / 0.8)
        else:
            l = i
            while l > lb and v[l] > stop_lo:
                l -= 1
            r = i + 1
            while r < rb and v[r] < stop_hi:
                r += 1
            acc = 0.0
            for k in range(l, r + 1):
                acc += v[k] - low
            pos50 = (r + 0.5) - acc / span
            p_lo = float(l)
            for k in range(l, r):
                if v[k] < lvl_lo <= v[k + 1]:
                    p_lo = k + (lvl_lo - v[k]) / (v[k + 1] - v[k])
                    break
            p_hi = float(r)
            for k in range(r - 1, l - 1, -1):
                if v[k] < lvl_hi <= v[k + 1]:
                    p_hi = k + (lvl_hi - v[k]) / (v[k + 1] - v[k])
                    break
            width = p_hi - p_lo
            if width < 0.0:
                width = 0.0
            pos = pos50 - (0.5 - threshold_fraction) * (width / 0.8)

        positions[e] = pos
        widths[e] = width
        pols[e] = pol

    return positions, widths, pols, low, high
