"""Counter-based random numbers for reproducible, order-independent sampling.

Every random quantity in the renderer is a pure function of
``(seed, stream, element, counter)`` built from the splitmix64 finalizer.
That makes per-pixel sampling embarrassingly parallel while staying
bit-identical between serial and parallel execution, and between the Cython
and pure-numpy kernels (the arithmetic is uint64 wrap + one float multiply,
no libm).

Streams partition usage so e.g. noise never aliases ray sampling.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

STREAM_APERTURE = 0   # ray arrival point inside the pixel aperture
STREAM_AUX = 1        # emitter point / angular deviation
STREAM_NOISE = 2      # per-pixel Gaussian read noise
STREAM_SPECKLE = 3    # white field behind the speckle pattern
STREAM_SCAN = 4       # per-frame seed derivation

_INV_2_53 = 1.0 / 9007199254740992.0  # 2^-53

_U64 = np.uint64
_C1 = _U64(0xBF58476D1CE4E5B9)
_C2 = _U64(0x94D049BB133111EB)
_G = _U64(GOLDEN)
_S30 = _U64(30)
_S27 = _U64(27)
_S31 = _U64(31)
_S11 = _U64(11)


def mix64(z: int) -> int:
    """splitmix64 finalizer on a Python int (wraps at 64 bits)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def stream_key(seed: int, stream: int, element: int) -> int:
    """64-bit key for one (seed, stream, element) substream."""
    k = mix64((seed + GOLDEN * (stream + 1)) & _MASK)
    return mix64((k + GOLDEN * (element + 1)) & _MASK)


def derive_seed(seed: int, index: int) -> int:
    """Child seed for frame ``index`` of a scan driven by ``seed``."""
    return stream_key(seed, STREAM_SCAN, index)


def _mix64_arr(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def uniforms(key: int, start: int, count: int) -> np.ndarray:
    """``count`` doubles in [0, 1) for counters start..start+count-1.

    Matches the scalar/Cython recipe bit for bit:
    u = (mix64(key + GOLDEN*(ctr+1)) >> 11) * 2^-53.
    """
    with np.errstate(over="ignore"):
        ctr = np.arange(start + 1, start + count + 1, dtype=np.uint64)
        z = _mix64_arr(_U64(key & _MASK) + _G * ctr)
    return (z >> _S11).astype(np.float64) * _INV_2_53


def uniform_at(key: int, ctr: int) -> float:
    """Single uniform double in [0, 1) at one counter position."""
    return (mix64((key + GOLDEN * (ctr + 1)) & _MASK) >> 11) * _INV_2_53


def gaussians(seed: int, stream: int, count: int) -> np.ndarray:
    """One standard normal per element via Box-Muller, element-keyed so the
    draw for element i never depends on how many others are drawn."""
    with np.errstate(over="ignore"):
        elem = np.arange(1, count + 1, dtype=np.uint64)
        k1 = _mix64_arr(_U64(mix64((seed + GOLDEN * (stream + 1)) & _MASK)) + _G * elem)
        u1 = _mix64_arr(k1 + _G * _U64(1))
        u2 = _mix64_arr(k1 + _G * _U64(2))
    # u1 in (0, 1] so the log never sees zero
    f1 = ((u1 >> _S11).astype(np.float64) + 1.0) * _INV_2_53
    f2 = (u2 >> _S11).astype(np.float64) * _INV_2_53
    return np.sqrt(-2.0 * np.log(f1)) * np.cos(2.0 * np.pi * f2)
