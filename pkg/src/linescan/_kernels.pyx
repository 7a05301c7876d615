# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Monte Carlo visibility render and edge scan.

Mirrors :mod:`linescan._kernels_py` bit for bit - same counter-based uint64
RNG, same IEEE expressions in the same order. Keep both files in sync; the
backend parity test asserts exact equality.
"""

from libc.math cimport fabs
from libc.stdint cimport int32_t, uint64_t

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"

DEF _LIGHT_IDEAL = 0
DEF _LIGHT_LASER = 1
DEF _LIGHT_LED = 2
DEF _POL_FALLING = 0
DEF _POL_RISING = 1

LIGHT_IDEAL = _LIGHT_IDEAL
LIGHT_LASER = _LIGHT_LASER
LIGHT_LED = _LIGHT_LED
POL_FALLING = _POL_FALLING
POL_RISING = _POL_RISING

cdef uint64_t GOLDEN = <uint64_t>0x9E3779B97F4A7C15
cdef double INV_2_53 = 1.0 / 9007199254740992.0

DEF STREAM_APERTURE = 0
DEF STREAM_AUX = 1


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline uint64_t stream_key_c(uint64_t seed, uint64_t stream,
                                  uint64_t element) noexcept nogil:
    cdef uint64_t k = mix64(seed + GOLDEN * (stream + <uint64_t>1))
    return mix64(k + GOLDEN * (element + <uint64_t>1))


cdef inline double u01(uint64_t key, uint64_t ctr) noexcept nogil:
    return <double>(mix64(key + GOLDEN * (ctr + <uint64_t>1)) >> 11) * INV_2_53


def render_visibility(int light_kind,
                      double alpha_rad,
                      double beam_half_width,
                      double emitter_half_width,
                      double light_distance,
                      double tan_divergence,
                      double object_distance,
                      double shadow_lo,
                      double shadow_hi,
                      bint has_occluder,
                      double x0,
                      double pitch_mm,
                      int n_pixels,
                      long rays_per_pixel,
                      object seed):
    """Fraction of source radiance reaching each pixel, in [0, 1]."""
    out = np.empty(n_pixels, dtype=np.float64)
    cdef double[::1] o = out
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t i
    cdef long r, acc, unb, nr = rays_per_pixel
    cdef uint64_t key_ap, key_aux
    cdef double xc, u, u2, xs, xo, xe, slope, t_obj = 0.0
    cdef double inv_n = <double>nr

    if light_kind == _LIGHT_LED:
        t_obj = (light_distance - object_distance) / light_distance

    with nogil:
        for i in range(n_pixels):
            xc = x0 + i * pitch_mm
            key_ap = stream_key_c(s, STREAM_APERTURE, <uint64_t>i)
            key_aux = stream_key_c(s, STREAM_AUX, <uint64_t>i)
            acc = 0
            unb = 0
            for r in range(nr):
                u = u01(key_ap, <uint64_t>r)
                xs = xc + ((<double>r + u) / inv_n - 0.5) * pitch_mm
                if light_kind == _LIGHT_IDEAL:
                    acc += 1
                    if not (has_occluder and xs > shadow_lo and xs < shadow_hi):
                        unb += 1
                elif light_kind == _LIGHT_LASER:
                    if fabs(xs) <= beam_half_width:
                        acc += 1
                        if has_occluder:
                            u2 = u01(key_aux, <uint64_t>r)
                            slope = (2.0 * u2 - 1.0) * alpha_rad
                            xo = xs + slope * object_distance
                            if not (xo > shadow_lo and xo < shadow_hi):
                                unb += 1
                        else:
                            unb += 1
                else:  # LIGHT_LED
                    u2 = u01(key_aux, <uint64_t>r)
                    xe = (2.0 * u2 - 1.0) * emitter_half_width
                    slope = (xs - xe) / light_distance
                    if fabs(slope) <= tan_divergence:
                        acc += 1
                        if has_occluder:
                            xo = xe + (xs - xe) * t_obj
                            if not (xo > shadow_lo and xo < shadow_hi):
                                unb += 1
                        else:
                            unb += 1
            o[i] = (<double>unb / <double>acc) if acc > 0 else 0.0
    return out


cdef double percentile_sorted_c(double[::1] s, double q) noexcept nogil:
    cdef Py_ssize_t n = s.shape[0]
    cdef double h = q * (n - 1)
    cdef Py_ssize_t lo = <Py_ssize_t>h
    cdef double frac, a, b
    if lo >= n - 1:
        return s[n - 1]
    frac = h - lo
    a = s[lo]
    b = s[lo + 1]
    return a + (b - a) * frac


def percentile_sorted(sorted_vals, double q):
    """Linear-interpolation percentile on an ascending array, q in [0, 1]."""
    cdef double[::1] s = np.ascontiguousarray(sorted_vals, dtype=np.float64)
    return percentile_sorted_c(s, q)


def detect_edges_core(values,
                      double threshold_fraction,
                      double q_lo,
                      double q_hi,
                      double min_contrast):
    """Scan one line for monotone threshold crossings.

    Same contract as the fallback: returns
    ``(positions, widths, polarities, low, high)``.
    """
    cdef cnp.ndarray[double, ndim=1] varr = np.ascontiguousarray(
        values, dtype=np.float64)
    cdef double[::1] v = varr
    cdef Py_ssize_t n = v.shape[0]
    empty_f = np.empty(0, dtype=np.float64)
    empty_i = np.empty(0, dtype=np.int32)
    if n < 3:
        return empty_f, empty_f, empty_i, 0.0, 0.0

    cdef double[::1] s = np.sort(varr)
    cdef double low = percentile_sorted_c(s, q_lo)
    cdef double high = percentile_sorted_c(s, q_hi)
    cdef double span = high - low
    if span < min_contrast:
        return empty_f, empty_f, empty_i, low, high

    cdef double thr = low + threshold_fraction * span
    cdef double lvl_lo = low + 0.1 * span
    cdef double lvl_hi = low + 0.9 * span
    cdef double stop_hi = high - 0.02 * span
    cdef double stop_lo = low + 0.02 * span

    cidx_arr = np.empty(n, dtype=np.int64)
    cpol_arr = np.empty(n, dtype=np.int32)
    cdef long[::1] cidx = cidx_arr
    cdef int32_t[::1] cpol = cpol_arr
    cdef Py_ssize_t i, m = 0
    cdef double a, b
    for i in range(n - 1):
        a = v[i]
        b = v[i + 1]
        if a >= thr and b < thr:
            cidx[m] = i
            cpol[m] = _POL_FALLING
            m += 1
        elif a < thr and b >= thr:
            cidx[m] = i
            cpol[m] = _POL_RISING
            m += 1

    positions = np.empty(m, dtype=np.float64)
    widths = np.empty(m, dtype=np.float64)
    pols = np.empty(m, dtype=np.int32)
    cdef double[::1] po = positions
    cdef double[::1] wi = widths
    cdef int32_t[::1] pl = pols

    cdef Py_ssize_t e, l, r, k, lb, rb
    cdef int32_t pol
    cdef double acc, pos50, p_hi, p_lo, width, pos
    for e in range(m):
        i = cidx[e]
        pol = cpol[e]
        lb = cidx[e - 1] + 1 if e > 0 else 0
        rb = cidx[e + 1] if e + 1 < m else n - 1

        if pol == _POL_FALLING:
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
            p_hi = <double>l
            for k in range(l, r):
                if v[k] >= lvl_hi > v[k + 1]:
                    p_hi = k + (v[k] - lvl_hi) / (v[k] - v[k + 1])
                    break
            p_lo = <double>r
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
            p_lo = <double>l
            for k in range(l, r):
                if v[k] < lvl_lo <= v[k + 1]:
                    p_lo = k + (lvl_lo - v[k]) / (v[k + 1] - v[k])
                    break
            p_hi = <double>r
            for k in range(r - 1, l - 1, -1):
                if v[k] < lvl_hi <= v[k + 1]:
                    p_hi = k + (lvl_hi - v[k]) / (v[k + 1] - v[k])
                    break
            width = p_hi - p_lo
            if width < 0.0:
                width = 0.0
            pos = pos50 - (0.5 - threshold_fraction) * (width / 0.8)

        po[e] = pos
        wi[e] = width
        pl[e] = pol

    return positions, widths, pols, low, high
