"""Modified Bessel function K0 and the product-normal law built from it.

The product ``G * G'`` of two independent standard normals has density
``K0(|x|) / pi`` and characteristic function ``(1 + t**2) ** -0.5``.

K0 is evaluated piecewise:

* ``0 < x <= 2``: the ascending series
  ``K0(x) = -(log(x/2) + gamma) I0(x) + sum_k H_k (x^2/4)^k / (k!)^2``;
* ``2 < x < 20``: the trapezoidal rule on ``int_0^inf exp(-x cosh t) dt``,
  which converges geometrically for this entire integrand;
* ``x >= 20``: the large-argument asymptotic expansion, truncated at its
  smallest term.
"""

from __future__ import annotations

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061
SERIES_MAX = 2.0
ASYMPTOTIC_MIN = 20.0
# past this point 1 - cdf is below 1e-18
CDF_SATURATION = 40.0

_SERIES_TERMS = 30
_TRAPEZOID_STEP = 0.1


def _series_coefficients():
    c, h = [], []
    harmonic = 0.0
    for k in range(_SERIES_TERMS):
        c.append(1.0 / (4.0**k * math.factorial(k) ** 2))
        if k:
            harmonic += 1.0 / k
        h.append(harmonic)
    return np.array(c), np.array(h)


_C, _H = _series_coefficients()


def _k0_series(x: np.ndarray) -> np.ndarray:
    x2 = x * x
    powers = x2[..., None] ** np.arange(_SERIES_TERMS)
    i0 = (powers * _C).sum(axis=-1)
    tail = (powers * _C * _H).sum(axis=-1)
    return -(np.log(x / 2.0) + EULER_GAMMA) * i0 + tail


def _k0_trapezoid(x: np.ndarray) -> np.ndarray:
    # exp(-x cosh t) underflows once x cosh t > 745; xmin = SERIES_MAX
    t_max = math.acosh(750.0 / SERIES_MAX)
    t = np.arange(0.0, t_max + _TRAPEZOID_STEP, _TRAPEZOID_STEP)
    w = np.full(t.size, _TRAPEZOID_STEP)
    w[0] = _TRAPEZOID_STEP / 2
    return (np.exp(-x[..., None] * np.cosh(t)) * w).sum(axis=-1)


def _k0_asymptotic(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    for idx, xv in np.ndenumerate(x):
        term, total, k = 1.0, 1.0, 0
        while True:
            nxt = -term * (2 * k + 1) ** 2 / ((k + 1) * 8.0 * xv)
            if abs(nxt) >= abs(term) or abs(nxt) < 1e-17 * abs(total):
                break
            total += nxt
            term = nxt
            k += 1
        out[idx] = math.sqrt(math.pi / (2.0 * xv)) * math.exp(-xv) * total
    return out


def k0(x):
    """Modified Bessel function of the second kind, order zero, for ``x > 0``."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr <= 0):
        raise ValueError("K0 is defined for positive arguments only")
    out = np.empty_like(arr)
    small = arr <= SERIES_MAX
    large = arr >= ASYMPTOTIC_MIN
    mid = ~small & ~large
    if small.any():
        out[small] = _k0_series(arr[small])
    if mid.any():
        out[mid] = _k0_trapezoid(arr[mid])
    if large.any():
        out[large] = _k0_asymptotic(arr[large])
    return out if out.ndim else float(out)


def product_normal_pdf(x):
    """Density ``K0(|x|) / pi`` (infinite at 0)."""
    arr = np.abs(np.asarray(x, dtype=np.float64))
    out = np.full_like(arr, np.inf)
    pos = arr > 0
    out[pos] = np.asarray(k0(arr[pos])) / math.pi
    return out if out.ndim else float(out)


def _k0_integral_series(a: np.ndarray) -> np.ndarray:
    """``int_0^a K0`` for ``0 <= a <= 2``, integrating the series termwise."""
    a = np.asarray(a, dtype=np.float64)
    out = np.zeros_like(a)
    pos = a > 0
    ap = a[pos]
    k = np.arange(_SERIES_TERMS)
    n1 = 2 * k + 1
    pw = ap[..., None] ** n1
    # int_0^a t^{2k} (-log t + log 2 - gamma + H_k) dt
    inner = -np.log(ap)[..., None] / n1 + 1.0 / n1**2 + (math.log(2.0) - EULER_GAMMA + _H) / n1
    out[pos] = (_C * pw * inner).sum(axis=-1)
    return out


def _simpson(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    return (_simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1)
            + _simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1))


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-13, max_depth: int = 40) -> float:
    """Integral of a smooth scalar function on ``[a, b]``."""
    if a == b:
        return 0.0
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson(f, a, b, fa, fm, fb, whole, tol, max_depth)


_K0_INTEGRAL_AT_SERIES_MAX = float(_k0_integral_series(np.array([SERIES_MAX]))[0])


def _k0_scalar(t: float) -> float:
    return float(k0(np.array([t]))[0])


def k0_integral(a):
    """``int_0^a K0(t) dt`` for ``a >= 0`` (tends to ``pi/2``)."""
    arr = np.asarray(a, dtype=np.float64)
    if np.any(arr < 0) or not np.all(np.isfinite(arr) | (arr == np.inf)):
        raise ValueError("integration bound must be non-negative")
    flat = arr.ravel()
    out = np.empty_like(flat)
    small = flat <= SERIES_MAX
    out[small] = _k0_integral_series(flat[small])
    # accumulate between sorted breakpoints so each piece is integrated once
    big = np.flatnonzero(~small)
    order = big[np.argsort(flat[big], kind="stable")]
    acc, prev = _K0_INTEGRAL_AT_SERIES_MAX, SERIES_MAX
    for idx in order:
        hi = min(flat[idx], CDF_SATURATION)
        if hi > prev:
            acc += adaptive_simpson(_k0_scalar, prev, hi)
            prev = hi
        out[idx] = acc
    out = out.reshape(arr.shape)
    return out if out.ndim else float(out)


def product_normal_cdf(x):
    """CDF of ``G * G'``; symmetric, ``cdf(-x) = 1 - cdf(x)``."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(arr)):
        raise ValueError("cdf argument must not be NaN")
    half = np.asarray(k0_integral(np.abs(arr))) / math.pi
    # rounding in the accumulated integral can overshoot by a few ulps
    out = np.clip(np.where(arr >= 0, 0.5 + half, 0.5 - half), 0.0, 1.0)
    return out if out.ndim else float(out)


def product_normal_cf(t):
    """Characteristic function ``(1 + t**2) ** -0.5``."""
    t = np.asarray(t, dtype=np.float64)
    out = 1.0 / np.sqrt(1.0 + t * t)
    return out if out.ndim else float(out)
