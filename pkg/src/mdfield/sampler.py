"""Normalized rectangular partial sums and Monte Carlo batches of them."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from mdfield.models import ModelSpec, Region, Seed, field_box

# float64 elements materialized per chunk of replicates
CHUNK_ELEMENTS = 1 << 22


@dataclass
class SampleBatch:
    """Replicates of a scalar statistic plus what is needed to regenerate them."""

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("a batch holds a non-empty 1-d array of values")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("batch contains non-finite values")

    def __len__(self) -> int:
        return self.values.size

    def to_csv(self) -> str:
        """One value per line (round-trip precision), metadata as ``# key: json`` lines."""
        buf = io.StringIO()
        for key in sorted(self.meta):
            buf.write(f"# {key}: {json.dumps(self.meta[key], sort_keys=True)}\n")
        for v in self.values:
            buf.write(f"{float(v)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SampleBatch":
        meta, values = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(": ")
                meta[key] = json.loads(val)
            elif line.strip():
                values.append(float(line))
        return cls(np.array(values), meta)


def _check_region(model: ModelSpec, region: Region) -> None:
    if region.d != model.dimension:
        raise ValueError(f"region dimension {region.d} does not match model dimension {model.dimension}")


def normalized_sums(model: ModelSpec, region: Region, seed: Seed, replicates: int) -> np.ndarray:
    """``(1/sqrt(N)) * sum_box f`` for replicates ``seed.replicate(0..R-1)``.

    Each row is reduced along one contiguous axis so numpy's pairwise
    summation applies and a replicate's value does not depend on chunking.
    """
    _check_region(model, region)
    out = np.empty(replicates)
    chunk = max(1, CHUNK_ELEMENTS // region.volume)
    norm = math.sqrt(region.volume)
    for start in range(0, replicates, chunk):
        r = min(chunk, replicates - start)
        box = field_box(model, region.dims, seed.replicate(start), replicates=r)
        out[start:start + r] = np.ascontiguousarray(box).reshape(r, -1).sum(axis=1) / norm
    return out


def partial_sum(model: ModelSpec, region: Region, seed: Seed) -> float:
    """Normalized sum of the field over ``[1..n_1] x ... x [1..n_d]``."""
    return float(normalized_sums(model, region, seed, 1)[0])


def replicate(model: ModelSpec, region: Region, seed: Seed, R: int) -> SampleBatch:
    """``R`` independent replicates of :func:`partial_sum`, stream ``seed.stream + r``."""
    if R < 1:
        raise ValueError(f"need R >= 1, got {R}")
    values = normalized_sums(model, region, seed, R)
    meta = {
        "model": model.to_dict(),
        "region": list(region.dims),
        "master": seed.master,
        "streams": [seed.stream, seed.stream + R - 1],
    }
    return SampleBatch(values, meta)
