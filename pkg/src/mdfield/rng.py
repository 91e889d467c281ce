"""Counter-based hashing of lattice sites into random deviates.

Every deviate is a pure function of ``(master, stream, tag, coordinates)``,
so a field can be evaluated at any window without storing it, and the lattice
shift acts exactly on realizations.  All arithmetic is on ``numpy.uint64``
arrays and wraps modulo 2**64.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S12 = np.uint64(12)
_S63 = np.uint64(63)
_TWO_M52 = 2.0**-52
_TWO_M53 = 2.0**-53
_TWO_M64 = 2.0**-64

MASK64 = (1 << 64) - 1


def mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, a bijection on 64-bit words."""
    with np.errstate(over="ignore"):
        x = x ^ (x >> _S30)
        x = x * _M1
        x = x ^ (x >> _S27)
        x = x * _M2
        return x ^ (x >> _S31)


def as_u64(values) -> np.ndarray:
    """Two's-complement reinterpretation of signed integers as uint64."""
    arr = np.asarray(values)
    if arr.dtype == np.uint64:
        return arr
    if arr.dtype.kind not in "iu":
        raise TypeError(f"integer coordinates required, got dtype {arr.dtype}")
    return arr.astype(np.int64).view(np.uint64)


def stream_keys(master: int, streams, tag: int) -> np.ndarray:
    """Hash prefix for each stream; shape follows ``streams``."""
    with np.errstate(over="ignore"):
        m = mix64(np.asarray(np.uint64(master & MASK64)) + _GOLDEN)
        s = np.asarray(streams, dtype=np.uint64)
        h = mix64(m ^ mix64(s * _GOLDEN + np.uint64(0x632BE59BD9B4E019)))
        return mix64(h ^ mix64(np.uint64(tag & MASK64) * _M2 + _GOLDEN))


def site_hash(master: int, streams, tag: int, coords: tuple) -> np.ndarray:
    """Hash of ``(master, stream, tag, coords)``.

    ``streams`` is a 1-d array of stream ids; the result has a leading
    replicate axis of that length followed by the broadcast shape of
    ``coords`` (a tuple of integer arrays, one per lattice axis).
    """
    streams = np.atleast_1d(np.asarray(streams, dtype=np.uint64))
    coords = tuple(np.asarray(c) for c in coords)
    ndim = max((c.ndim for c in coords), default=0)
    h = stream_keys(master, streams, tag).reshape((-1,) + (1,) * ndim)
    with np.errstate(over="ignore"):
        for axis, c in enumerate(coords):
            salt = np.uint64((axis + 1) * 0x2545F4914F6CDD1D & MASK64)
            h = mix64(h ^ mix64(as_u64(c) * _GOLDEN + salt))
    return h


def to_uniform(h: np.ndarray) -> np.ndarray:
    """Map hashes to doubles in the open interval (0, 1)."""
    # 52 bits so that k + 0.5 stays exactly representable
    return ((h >> _S12).astype(np.float64) + 0.5) * _TWO_M52


def to_normal(h: np.ndarray) -> np.ndarray:
    """Standard normal deviates by inversion of the normal CDF."""
    return ndtri(to_uniform(h))


def to_rademacher(h: np.ndarray) -> np.ndarray:
    """Symmetric +-1 deviates from the top bit."""
    return 1.0 - 2.0 * (h >> _S63).astype(np.float64)


def fixed_point_fraction(h: np.ndarray) -> np.ndarray:
    """Interpret 64-bit words as fractions k / 2**64 in [0, 1)."""
    return (h >> _S11).astype(np.float64) * _TWO_M53
