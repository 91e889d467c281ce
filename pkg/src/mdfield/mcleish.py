"""Triangular-array diagnostics for the martingale CLT on Z^d.

Columns run along the last lattice axis.  For a column index ``i`` (a point
of a ``(d-1)``-dimensional box) and a column height ``v``::

    F[i] = v**-0.5 * sum_{j=1..v} f(i, j)
    X[i] = N**-0.5 * F[i],          N = number of columns

so ``sum_i X[i]`` is the normalized sum over the full box.  McLeish's
conditions are estimated by Monte Carlo over replicates:

(i)   P(max_i |X[i]| > eps) -> 0
(ii)  E[max_i X[i]**2] <= 1
(iii) E|sum_i X[i]**2 - 1| -> 0

The third is the one that separates the ergodic case from the product
counterexample, where ``sum_i X[i]**2`` converges to a chi-square(1) law.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from mdfield.models import ModelSpec, Seed, field_box

CHUNK_ELEMENTS = 1 << 22
EPS_GRID = (0.1, 0.25, 0.5)
VANISHING_SLOPE = -0.2
DEFAULT_L1_SCALES = ((8, 64), (16, 256), (32, 1024))


def _index_shape(model: ModelSpec, n) -> tuple[int, ...]:
    if model.dimension < 2:
        raise ValueError("array diagnostics need dimension >= 2")
    if np.isscalar(n):
        if model.dimension != 2:
            raise ValueError("pass the (d-1)-dimensional column box as a tuple for d > 2")
        shape = (int(n),)
    else:
        shape = tuple(int(k) for k in n)
    if len(shape) != model.dimension - 1:
        raise ValueError(f"column box has {len(shape)} axes, model needs {model.dimension - 1}")
    if any(k < 1 for k in shape):
        raise ValueError(f"column box sizes must be positive, got {shape}")
    return shape


def column_sums(model: ModelSpec, n, v: int, seed: Seed, replicates: int = 1) -> np.ndarray:
    """``F[i] = v**-0.5 * sum_j f(i, j)``, shape ``(replicates, *column_box)``."""
    if v < 1:
        raise ValueError(f"column height must be >= 1, got {v}")
    shape = _index_shape(model, n)
    out = np.empty((replicates,) + shape)
    chunk = max(1, CHUNK_ELEMENTS // (math.prod(shape) * v))
    for start in range(0, replicates, chunk):
        r = min(chunk, replicates - start)
        box = field_box(model, shape + (v,), seed.replicate(start), replicates=r)
        out[start:start + r] = np.ascontiguousarray(box).sum(axis=-1) / math.sqrt(v)
    return out


def array_batch(model: ModelSpec, n, v: int, seed: Seed, replicates: int) -> np.ndarray:
    """Array rows ``X`` flattened to shape ``(replicates, N)``."""
    F = column_sums(model, n, v, seed, replicates)
    F = F.reshape(replicates, -1)
    return F / math.sqrt(F.shape[1])


@dataclass
class McLeishArray:
    """One row ``X[1..N]`` of the triangular array with its provenance."""

    model: ModelSpec
    shape: tuple[int, ...]
    v: int
    seed: Seed
    columns: np.ndarray  # F, shape == self.shape

    @property
    def n(self) -> int:
        return math.prod(self.shape)

    @property
    def entries(self) -> np.ndarray:
        return self.columns / math.sqrt(self.n)

    def row_sum(self) -> float:
        return float(self.entries.sum())

    def sum_squares(self) -> float:
        return math.fsum((self.entries**2).ravel())


def build_array(model: ModelSpec, n: int, v: int, seed: Seed) -> McLeishArray:
    """The ``d = 2`` array: ``n`` columns of height ``v``."""
    if model.dimension != 2:
        raise ValueError("build_array is the d=2 construction; use box_array for d > 2")
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    return McLeishArray(model, (n,), v, seed, column_sums(model, n, v, seed)[0])


def box_array(model: ModelSpec, side, v: int, seed: Seed) -> McLeishArray:
    """Array for ``d >= 3``: columns indexed by a ``(d-1)``-dimensional box.

    ``side`` is either one integer (a cube) or the box shape.
    """
    if model.dimension < 3:
        raise ValueError("box_array needs dimension >= 3")
    shape = (int(side),) * (model.dimension - 1) if np.isscalar(side) else tuple(side)
    return McLeishArray(model, shape, v, seed, column_sums(model, shape, v, seed)[0])


@dataclass
class DiagnosticReport:
    condition: str
    scales: list
    estimates: list
    stderr: list
    verdict: str
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def max_exceedance(X: np.ndarray, eps: float) -> tuple[float, float, int]:
    """Empirical ``P(max_i |X_i| > eps)`` over rows of ``X``: (p, stderr, count)."""
    hits = int(np.count_nonzero(np.abs(X).max(axis=1) > eps))
    R = X.shape[0]
    p = hits / R
    return p, math.sqrt(p * (1 - p) / R), hits


def check_max_negligible(model: ModelSpec, ns: Sequence, v: int, R: int, seed: Seed,
                         eps_grid: Sequence[float] = EPS_GRID) -> DiagnosticReport:
    """Condition (i) on an epsilon grid along increasing column counts ``ns``."""
    if R < 100:
        raise ValueError("condition (i) needs at least 100 replicates")
    estimates, stderr, intervals = [], [], []
    for n in ns:
        X = array_batch(model, n, v, seed, R)
        row, err, ci = [], [], []
        for eps in eps_grid:
            p, se, hits = max_exceedance(X, eps)
            row.append(p)
            err.append(se)
            ci.append(list(wilson_interval(hits, R)))
        estimates.append(row)
        stderr.append(err)
        intervals.append(ci)
    # a trend is non-increasing in n for every eps
    trend = all(
        estimates[k + 1][e] <= estimates[k][e] for k in range(len(ns) - 1) for e in range(len(eps_grid))
    )
    verdict = "decreasing" if trend else "not-decreasing"
    return DiagnosticReport(
        "max-negligible",
        [_scale(n, v) for n in ns],
        estimates,
        stderr,
        verdict,
        {"eps": list(eps_grid), "wilson95": intervals, "R": R},
    )


def check_max_square_bounded(model: ModelSpec, n, v: int, R: int, seed: Seed) -> DiagnosticReport:
    """Condition (ii) in expectation form: ``E[max_i X_i**2] <= 1``."""
    if R < 100:
        raise ValueError("condition (ii) needs at least 100 replicates")
    X = array_batch(model, n, v, seed, R)
    m = (X**2).max(axis=1)
    est = math.fsum(m) / R
    sd = float(np.std(m, ddof=1))
    bound = 1.0 + 4.0 * sd / math.sqrt(R)
    return DiagnosticReport(
        "max-square-bounded",
        [_scale(n, v)],
        [est],
        [sd / math.sqrt(R)],
        "pass" if est <= bound else "fail",
        {"bound": bound, "R": R},
    )


def sum_squares_l1(model: ModelSpec, n, v: int, R: int, seed: Seed) -> tuple[float, float]:
    """Monte Carlo ``E|sum_i X_i**2 - 1|`` and its standard error."""
    if R < 2:
        raise ValueError("need R >= 2 for a standard error")
    X = array_batch(model, n, v, seed, R)
    dev = np.abs((X**2).sum(axis=1) - 1.0)
    return math.fsum(dev) / R, float(np.std(dev, ddof=1)) / math.sqrt(R)


def trend_slope(sizes: Sequence[float], estimates: Sequence[float]) -> float:
    """Least-squares slope of ``log(estimate)`` against ``log(size)``."""
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.maximum(np.asarray(estimates, dtype=float), 1e-300))
    return float(np.polyfit(x, y, 1)[0])


def check_sum_squares_l1(model: ModelSpec, scales: Sequence = DEFAULT_L1_SCALES, R: int = 1000,
                         seed: Seed = Seed(0)) -> DiagnosticReport:
    """Condition (iii) along a schedule of ``(v, n)`` pairs.

    The verdict is ``vanishing`` when the log-log slope of the estimates
    against ``n * v`` is below ``VANISHING_SLOPE`` (at least three scales).
    """
    if R < 500:
        raise ValueError("condition (iii) needs at least 500 replicates")
    estimates, stderr, sizes = [], [], []
    for v, n in scales:
        est, se = sum_squares_l1(model, n, v, R, seed)
        estimates.append(est)
        stderr.append(se)
        sizes.append(v * (n if np.isscalar(n) else math.prod(n)))
    slope = trend_slope(sizes, estimates) if len(scales) >= 3 else float("nan")
    verdict = "vanishing" if slope < VANISHING_SLOPE else "non-vanishing"
    return DiagnosticReport(
        "sum-squares-l1",
        [_scale(n, v) for v, n in scales],
        estimates,
        stderr,
        verdict,
        {"slope": slope, "R": R},
    )


@dataclass
class BlockDecomposition:
    lhs: float
    block_term: float
    tail_term: float
    q_term: float
    residual: float
    m: int
    p: int
    q: int


def block_decomposition_check(columns, m: int) -> BlockDecomposition:
    """Evaluate both sides of the block identity for the column sums ``F``.

    With ``N = p * m**k + q`` (blocks are ``k``-dimensional cubes of side
    ``m``, ``k`` the number of column-box axes)::

        (1/N) sum F**2 - 1
            = (m**k/N) sum_blocks (block mean of F**2 - 1)
              + (1/N) sum_{outside full blocks} F**2 - q/N

    Holds for arbitrary reals, so the residual is pure rounding.
    """
    F = columns.columns if isinstance(columns, McLeishArray) else np.asarray(columns, dtype=float)
    if F.ndim == 0:
        F = F.reshape(1)
    N = F.size
    if not 1 <= m <= min(F.shape):
        raise ValueError(f"block size must satisfy 1 <= m <= {min(F.shape)}, got {m}")
    k = F.ndim
    sq = F**2
    full = tuple(slice(0, (s // m) * m) for s in F.shape)
    core = sq[full]
    # split every axis into (blocks, m) and average within the cube
    split = core.reshape([x for s in core.shape for x in (s // m, m)])
    block_means = split.mean(axis=tuple(range(1, 2 * k, 2)))
    p = block_means.size
    q = N - p * m**k
    tail = math.fsum(sq.ravel()) - math.fsum(core.ravel())
    lhs = math.fsum(sq.ravel()) / N - 1.0
    block_term = (m**k / N) * math.fsum((block_means - 1.0).ravel())
    tail_term = tail / N
    q_term = q / N
    rhs = block_term + tail_term - q_term
    return BlockDecomposition(lhs, block_term, tail_term, q_term, abs(lhs - rhs), m, p, q)


def default_block_size(n: int) -> int:
    """``floor(n ** (1/3))``, exact for perfect cubes."""
    m = int(round(n ** (1.0 / 3.0)))
    while m**3 > n:
        m -= 1
    while (m + 1) ** 3 <= n:
        m += 1
    return max(1, m)


@dataclass
class VectorBatch:
    """``R`` samples of ``(F_1, ..., F_m)`` with companion statistics."""

    samples: np.ndarray
    covariance: np.ndarray
    mean_square_average: float
    square_correlation: np.ndarray

    @property
    def mean_off_diagonal_square_correlation(self) -> float:
        m = self.square_correlation.shape[0]
        off = self.square_correlation[~np.eye(m, dtype=bool)]
        return float(off.mean())


def column_vector_batch(model: ModelSpec, m: int, v: int, R: int, seed: Seed) -> VectorBatch:
    """Joint samples of the first ``m`` column sums of a ``d = 2`` model."""
    if m < 2:
        raise ValueError("need m >= 2 columns")
    F = column_sums(model, m, v, seed, R).reshape(R, m)
    cov = np.cov(F, rowvar=False) if R > 1 else np.zeros((m, m))
    msq = math.fsum((F**2).mean(axis=1)) / R
    sq = F**2
    sd = sq.std(axis=0)
    if np.all(sd > 0) and R > 1:
        sqcorr = np.corrcoef(sq, rowvar=False)
    else:
        sqcorr = np.zeros((m, m))
    return VectorBatch(F, cov, msq, sqcorr)


def _scale(n, v: int) -> dict:
    return {"n": n if np.isscalar(n) else list(n), "v": v}
