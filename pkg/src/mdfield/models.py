"""Stationary field models on Z^d and their site-wise evaluation.

A realization is indexed by a :class:`Seed`; the value at a lattice site is
a deterministic function of ``(model, seed, site)`` computed through the
counter-based hash in :mod:`mdfield.rng`.  Translating a model by ``t``
therefore acts exactly on realizations: the shifted model at ``s`` is the
base model at ``s + t``.

Models
------
zero
    ``f = 0``.
bernoulli-gaussian, bernoulli-rademacher
    iid standard normal (resp. +-1) values ``e(s)`` at every site.
product-xy
    ``d = 2`` only; ``x_i * y_j`` with two independent one-dimensional
    Gaussian streams.  A field of martingale differences whose coordinate
    maps are not ergodic, and whose normalized sums have a non-normal limit.
rotation-coupled
    ``e(s) * sqrt(2) * cos(2 pi y_s)`` where ``y_s = y0 + sum_k s_k theta_k
    (mod 1)`` follows an irrational rotation of the circle.  The action is
    not Bernoulli but every coordinate map is ergodic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from mdfield import rng

IndexVec = tuple[int, ...]

NOISE_TAG = 0
X_TAG = 1
Y_TAG = 2
PHASE_TAG = 3

MAX_VOLUME = 2**32

# fractional parts of sqrt of square-free integers; rationally independent
DEFAULT_ANGLES = (
    math.sqrt(2) - 1,
    math.sqrt(3) - 1,
    math.sqrt(5) - 2,
    math.sqrt(6) - 2,
    math.sqrt(7) - 2,
    math.sqrt(10) - 3,
    math.sqrt(11) - 3,
    math.sqrt(13) - 3,
)

_SQRT2 = math.sqrt(2.0)


class ModelKind(str, enum.Enum):
    ZERO = "zero"
    BERNOULLI_GAUSSIAN = "bernoulli-gaussian"
    BERNOULLI_RADEMACHER = "bernoulli-rademacher"
    PRODUCT_XY = "product-xy"
    ROTATION_COUPLED = "rotation-coupled"


class Seed(NamedTuple):
    """Identifies one realization: a master key and a stream id."""

    master: int
    stream: int = 0

    def replicate(self, index: int) -> "Seed":
        return Seed(self.master, (self.stream + index) & rng.MASK64)


def meet(a: Sequence[int], b: Sequence[int]) -> IndexVec:
    """Componentwise minimum of two lattice points."""
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    return tuple(min(x, y) for x, y in zip(a, b))


def leq(a: Sequence[int], b: Sequence[int]) -> bool:
    """Coordinatewise order on Z^d."""
    return all(x <= y for x, y in zip(a, b))


@dataclass(frozen=True)
class Region:
    """Summation box ``[1..n_1] x ... x [1..n_d]``."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims:
            raise ValueError("region needs at least one axis")
        if any(n < 1 for n in dims):
            raise ValueError(f"region sizes must be positive, got {dims}")
        if math.prod(dims) > MAX_VOLUME:
            raise ValueError(f"region volume {math.prod(dims)} exceeds cap {MAX_VOLUME}")

    @classmethod
    def cube(cls, side: int, d: int) -> "Region":
        return cls((side,) * d)

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def volume(self) -> int:
        return math.prod(self.dims)


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    dimension: int
    angles: tuple[float, ...] = ()
    offset: tuple[int, ...] = field(default=())

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        d = int(self.dimension)
        if d < 1:
            raise ValueError(f"dimension must be >= 1, got {d}")
        object.__setattr__(self, "dimension", d)
        if kind is ModelKind.PRODUCT_XY and d != 2:
            raise ValueError("product-xy is defined for dimension 2 only")
        if kind is ModelKind.ROTATION_COUPLED:
            angles = tuple(float(a) for a in self.angles) or _default_angles(d)
            if len(angles) != d:
                raise ValueError(f"need {d} rotation angles, got {len(angles)}")
            if any(not 0.0 < a < 1.0 for a in angles):
                raise ValueError(f"rotation angles must lie in (0, 1), got {angles}")
            if len(set(angles)) != d:
                raise ValueError("rotation angles must be pairwise distinct")
            object.__setattr__(self, "angles", angles)
        elif self.angles:
            raise ValueError(f"{kind.value} takes no rotation angles")
        offset = tuple(int(t) for t in self.offset) or (0,) * d
        if len(offset) != d:
            raise ValueError(f"offset has dimension {len(offset)}, model has {d}")
        object.__setattr__(self, "offset", offset)

    @property
    def sigma2(self) -> float:
        """``||f||_2^2``, the variance of the limiting normal law."""
        return 0.0 if self.kind is ModelKind.ZERO else 1.0

    @property
    def is_mdf(self) -> bool:
        return True

    @property
    def angle_words(self) -> tuple[int, ...]:
        # exact: float * 2**64 only changes the exponent
        return tuple(int(a * 2.0**64) & rng.MASK64 for a in self.angles)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "dimension": self.dimension}
        if self.angles:
            out["angles"] = list(self.angles)
        if any(self.offset):
            out["offset"] = list(self.offset)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        return cls(
            kind=ModelKind(data["kind"]),
            dimension=int(data["dimension"]),
            angles=tuple(data.get("angles", ())),
            offset=tuple(data.get("offset", ())),
        )


def _default_angles(d: int) -> tuple[float, ...]:
    if d > len(DEFAULT_ANGLES):
        raise ValueError(f"no default rotation angles for d={d}; pass angles explicitly")
    return DEFAULT_ANGLES[:d]


def shift_field(model: ModelSpec, translation: Sequence[int]) -> ModelSpec:
    """The model composed with the lattice translation ``T_translation``."""
    if len(translation) != model.dimension:
        raise ValueError(
            f"translation has dimension {len(translation)}, model has {model.dimension}"
        )
    return replace(model, offset=tuple(o + int(t) for o, t in zip(model.offset, translation)))


def site_noise(seed: Seed, axis_tag: int, site, kind: str = "gaussian") -> float:
    """One deviate of the iid generator stream ``axis_tag`` at ``site``."""
    site = (site,) if np.isscalar(site) else tuple(site)
    h = rng.site_hash(seed.master, [seed.stream], axis_tag, tuple(np.asarray(c) for c in site))
    if kind == "gaussian":
        return float(rng.to_normal(h)[0])
    if kind == "rademacher":
        return float(rng.to_rademacher(h)[0])
    if kind == "uniform":
        return float(rng.to_uniform(h)[0])
    raise ValueError(f"unknown noise kind {kind!r}")


def rotation_phase(model: ModelSpec, coords: tuple, master: int, streams) -> np.ndarray:
    """Fixed-point circle position ``y_s * 2**64`` as uint64 words."""
    coords = _shifted(model, coords)
    y0 = rng.site_hash(master, streams, PHASE_TAG, ())
    phase = y0.reshape((-1,) + (1,) * np.broadcast(*coords).ndim)
    with np.errstate(over="ignore"):
        for c, w in zip(coords, model.angle_words):
            phase = phase + rng.as_u64(c) * np.uint64(w)
    return phase


def _shifted(model: ModelSpec, coords: tuple) -> tuple:
    if len(coords) != model.dimension:
        raise ValueError(f"site dimension {len(coords)} does not match model dimension {model.dimension}")
    return tuple(np.asarray(c, dtype=np.int64) + o for c, o in zip(coords, model.offset))


def evaluate(model: ModelSpec, coords: tuple, master: int, streams) -> np.ndarray:
    """Field values at broadcast sites for each stream.

    ``coords`` holds one integer array per axis; the result has shape
    ``(len(streams),) + broadcast_shape(coords)``.
    """
    streams = np.atleast_1d(np.asarray(streams, dtype=np.uint64))
    raw = coords
    coords = _shifted(model, coords)
    shape = (len(streams),) + np.broadcast(*coords).shape
    kind = model.kind
    if kind is ModelKind.ZERO:
        return np.zeros(shape)
    if kind is ModelKind.BERNOULLI_GAUSSIAN:
        out = rng.to_normal(rng.site_hash(master, streams, NOISE_TAG, coords))
    elif kind is ModelKind.BERNOULLI_RADEMACHER:
        out = rng.to_rademacher(rng.site_hash(master, streams, NOISE_TAG, coords))
    elif kind is ModelKind.PRODUCT_XY:
        x = rng.to_normal(rng.site_hash(master, streams, X_TAG, coords[:1]))
        y = rng.to_normal(rng.site_hash(master, streams, Y_TAG, coords[1:]))
        out = x * y
    elif kind is ModelKind.ROTATION_COUPLED:
        e = rng.to_normal(rng.site_hash(master, streams, NOISE_TAG, coords))
        y = rng.fixed_point_fraction(rotation_phase(model, raw, master, streams))
        out = e * (_SQRT2 * np.cos(2.0 * np.pi * y))
    else:  # pragma: no cover
        raise ValueError(kind)
    return np.broadcast_to(out, shape)


def box_coords(lower: Sequence[int], shape: Sequence[int]) -> tuple:
    """Open-mesh coordinates of the box ``lower + [0, shape)``."""
    return np.ix_(*[np.arange(lo, lo + n, dtype=np.int64) for lo, n in zip(lower, shape)])


def field_box(model: ModelSpec, shape: Sequence[int], seed: Seed, replicates: int = 1,
              lower: Sequence[int] | None = None) -> np.ndarray:
    """Values on the box ``[1..n_1] x ... x [1..n_d]`` (or from ``lower``).

    Returns an array of shape ``(replicates, *shape)``; replicate ``r`` uses
    ``seed.replicate(r)``.
    """
    if len(shape) != model.dimension:
        raise ValueError(f"box dimension {len(shape)} does not match model dimension {model.dimension}")
    lower = (1,) * len(shape) if lower is None else tuple(lower)
    streams = (np.uint64(seed.stream) + np.arange(replicates, dtype=np.uint64))
    return evaluate(model, box_coords(lower, shape), seed.master, streams)


def field_value(model: ModelSpec, site: Sequence[int], seed: Seed) -> float:
    """``f o T_site`` for the realization ``seed``."""
    site = tuple(int(s) for s in site)
    if len(site) != model.dimension:
        raise ValueError(f"site dimension {len(site)} does not match model dimension {model.dimension}")
    return float(evaluate(model, tuple(np.asarray(s) for s in site), seed.master, [seed.stream])[0])
