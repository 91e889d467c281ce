"""Reference limit laws, goodness-of-fit statistics and ergodicity diagnostics."""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from mdfield import bessel
from mdfield.models import ModelSpec, Seed, evaluate
from mdfield.sampler import SampleBatch

KS_CRITICAL_001 = 1.63
KS_SLACK = 1.5
DEFAULT_T_GRID = tuple(np.linspace(-5.0, 5.0, 21))
ERGODIC_RATIO = 3.0
NON_ERGODIC_RATIO = 1.5


@dataclass(frozen=True)
class ReferenceLaw:
    """A candidate limit law: ``normal`` with a variance, or ``product-normal``."""

    kind: str = "normal"
    variance: float = 1.0

    def __post_init__(self):
        if self.kind not in ("normal", "product-normal"):
            raise ValueError(f"unknown law {self.kind!r}")
        if self.variance < 0:
            raise ValueError("variance must be non-negative")
        if self.kind == "product-normal" and self.variance != 1.0:
            raise ValueError("product-normal law has unit variance")

    @classmethod
    def normal(cls, variance: float = 1.0) -> "ReferenceLaw":
        return cls("normal", float(variance))

    @classmethod
    def product_normal(cls) -> "ReferenceLaw":
        return cls("product-normal", 1.0)

    @property
    def continuous(self) -> bool:
        return self.kind == "product-normal" or self.variance > 0

    @property
    def name(self) -> str:
        return self.kind if self.kind == "product-normal" else f"normal(0,{self.variance:g})"

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "product-normal":
            return bessel.product_normal_cdf(x)
        if self.variance == 0:
            return np.where(x >= 0, 1.0, 0.0)
        return ndtr(x / math.sqrt(self.variance))

    def cf(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "product-normal":
            return bessel.product_normal_cf(t) + 0j
        return np.exp(-0.5 * self.variance * t * t) + 0j


def _values(batch) -> np.ndarray:
    values = batch.values if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=np.float64)
    values = np.atleast_1d(values).astype(np.float64)
    if values.size == 0:
        raise ValueError("empty batch")
    if not np.all(np.isfinite(values)):
        raise ValueError("batch contains non-finite values")
    return values


def ks_statistic(batch, law: ReferenceLaw) -> float:
    """One-sample Kolmogorov-Smirnov distance ``sup_x |F_R(x) - F(x)|``."""
    if not law.continuous:
        raise ValueError("KS distance needs a continuous reference law")
    x = np.sort(_values(batch))
    R = x.size
    F = np.asarray(law.cdf(x))
    k = np.arange(1, R + 1)
    return float(max(np.max(k / R - F), np.max(F - (k - 1) / R)))


def ks_threshold(R: int, slack: float = KS_SLACK) -> float:
    """``slack * 1.63 / sqrt(R)``: the 1% critical value with finite-n allowance."""
    return slack * KS_CRITICAL_001 / math.sqrt(R)


def empirical_cf(batch, t_grid: Sequence[float]) -> np.ndarray:
    x = _values(batch)
    t = np.asarray(t_grid, dtype=np.float64)
    phase = np.outer(t, x)
    return np.cos(phase).mean(axis=1) + 1j * np.sin(phase).mean(axis=1)


def cf_distance(batch, law: ReferenceLaw, t_grid: Sequence[float] = DEFAULT_T_GRID) -> float:
    """``max_t |(1/R) sum_r exp(i t S_r) - law.cf(t)|`` over the grid."""
    t = np.asarray(t_grid, dtype=np.float64)
    if t.size < 11 or np.any(np.abs(t) > 5.0):
        raise ValueError("t grid must hold at least 11 points inside [-5, 5]")
    return float(np.max(np.abs(empirical_cf(batch, t) - law.cf(t))))


@dataclass
class TestReport:
    """Outcome of one statistical check, with what is needed to regenerate it."""

    __test__ = False  # not a pytest class

    name: str
    statistic: str
    value: float
    threshold: float
    comparison: str
    passed: bool
    sample_size: int
    provenance: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @classmethod
    def compare(cls, name: str, statistic: str, value: float, threshold: float, comparison: str,
                sample_size: int, provenance: dict | None = None, details: dict | None = None) -> "TestReport":
        ops = {"<": value < threshold, "<=": value <= threshold, ">": value > threshold,
               ">=": value >= threshold}
        return cls(name, statistic, float(value), float(threshold), comparison, bool(ops[comparison]),
                   int(sample_size), provenance or {}, details or {})

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def histogram_csv(batch, bins: int = 50) -> str:
    """Histogram as ``bin_left,bin_right,count`` lines."""
    counts, edges = np.histogram(_values(batch), bins=bins)
    buf = io.StringIO()
    buf.write("bin_left,bin_right,count\n")
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        buf.write(f"{lo!r},{hi!r},{int(c)}\n")
    return buf.getvalue()


def birkhoff_averages(model: ModelSpec, q: int, bases: np.ndarray, n: int, seed: Seed) -> np.ndarray:
    """``(1/n) sum_{j=1..n} f(base + j e_q)**2`` for each row of ``bases``."""
    d = model.dimension
    if not 1 <= q <= d:
        raise ValueError(f"axis must be in 1..{d}, got {q}")
    if n < 1:
        raise ValueError("need n >= 1")
    bases = np.atleast_2d(np.asarray(bases, dtype=np.int64))
    if bases.shape[1] != d:
        raise ValueError(f"base points have dimension {bases.shape[1]}, model has {d}")
    steps = np.arange(1, n + 1, dtype=np.int64)
    coords = tuple(
        bases[:, k:k + 1] + (steps[None, :] if k == q - 1 else 0) for k in range(d)
    )
    values = evaluate(model, coords, seed.master, [seed.stream])[0]
    return (values**2).mean(axis=1)


def birkhoff_average(model: ModelSpec, q: int, base: Sequence[int], n: int, seed: Seed) -> float:
    """Average of ``f**2`` along ``n`` steps of the coordinate map ``T_{e_q}``."""
    return float(birkhoff_averages(model, q, np.array([base]), n, seed)[0])


def _row_bases(d: int, q: int, rows: int, n: int) -> np.ndarray:
    bases = np.zeros((rows, d), dtype=np.int64)
    if d == 1:
        bases[:, 0] = np.arange(rows) * (4 * n + 1)
    else:
        bases[:, q % d] = np.arange(1, rows + 1)
    return bases


@dataclass
class ErgodicityReport:
    model: dict
    axis: int
    rows: int
    n: int
    variance_n: float
    variance_4n: float
    ratio: float
    verdict: str
    seed: list

    def to_dict(self) -> dict:
        return asdict(self)


def ergodicity_diagnostic(model: ModelSpec, q: int, rows: int, n: int, seed: Seed) -> ErgodicityReport:
    """Spread of Birkhoff averages of ``f**2`` across base points.

    Along an ergodic direction the averages share one limit, so their
    variance across rows falls like ``1/n`` and the ratio of variances at
    ``n`` and ``4n`` is near 4.  Along a non-ergodic direction the limit
    depends on the row and the variance stabilizes (ratio near 1).
    """
    if rows < 10:
        raise ValueError("need at least 10 rows")
    bases = _row_bases(model.dimension, q, rows, n)
    long = birkhoff_averages(model, q, bases, 4 * n, seed)
    short = birkhoff_averages(model, q, bases, n, seed)
    var_n = float(np.var(short, ddof=1))
    var_4n = float(np.var(long, ddof=1))
    if var_n == 0.0 and var_4n == 0.0:
        ratio, verdict = float("nan"), "degenerate"
    else:
        ratio = var_n / var_4n if var_4n > 0 else float("inf")
        if ratio > ERGODIC_RATIO:
            verdict = "ergodic-direction-consistent"
        elif ratio < NON_ERGODIC_RATIO:
            verdict = "non-ergodic-signature"
        else:
            verdict = "inconclusive"
    return ErgodicityReport(model.to_dict(), q, rows, n, var_n, var_4n, ratio, verdict, list(seed))
