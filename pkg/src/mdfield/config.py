"""Run configuration: an INI-style ``key = value`` document.

Example::

    [model]
    kind = bernoulli-gaussian
    dimension = 2
    seed = 20240601

    [experiment]
    kind = ks-test
    region = 64, 64
    replicates = 5000
    law = normal

    [output]
    json = report.json
    csv = batch.csv

Only ``model.kind``, ``model.dimension`` and ``model.seed`` are required.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass

from mdfield.models import ModelKind, ModelSpec, Seed

EXPERIMENTS = ("simulate", "ks-test", "cf-test", "mcleish", "ergodicity", "oracle")
LAWS = ("normal", "product-normal")

DEFAULT_REPLICATES = 2000
DEFAULT_SIDE = 64
DEFAULT_SCALES = ((8, 64), (16, 256), (32, 1024))


class ConfigError(ValueError):
    """Raised with every problem found, not just the first."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    seed: Seed
    experiment: str = "simulate"
    region: tuple[int, ...] = ()
    replicates: int = DEFAULT_REPLICATES
    law: str = "normal"
    threshold: float | None = None
    scales: tuple[tuple[int, int], ...] = DEFAULT_SCALES
    rows: int = 2000
    birkhoff_n: int = 256
    window: tuple[int, int] = (-1, 1)
    json_path: str | None = None
    csv_path: str | None = None

    def to_text(self, outputs: bool = True) -> str:
        """Canonical document; ``parse_config(cfg.to_text()) == cfg``.

        ``outputs=False`` drops the ``[output]`` section, which does not
        affect results.
        """
        lines = ["[model]", f"kind = {self.model.kind.value}", f"dimension = {self.model.dimension}"]
        if self.model.angles:
            lines.append("angles = " + ", ".join(repr(a) for a in self.model.angles))
        lines += [f"seed = {self.seed.master}", f"stream = {self.seed.stream}", ""]
        lines += [
            "[experiment]",
            f"kind = {self.experiment}",
            "region = " + ", ".join(str(n) for n in self.region),
            f"replicates = {self.replicates}",
            f"law = {self.law}",
        ]
        if self.threshold is not None:
            lines.append(f"threshold = {self.threshold!r}")
        lines += [
            "scales = " + ", ".join(f"{v}x{n}" for v, n in self.scales),
            f"rows = {self.rows}",
            f"birkhoff_n = {self.birkhoff_n}",
            f"window = {self.window[0]}, {self.window[1]}",
            "",
        ]
        out = [f"{k} = {v}" for k, v in (("json", self.json_path), ("csv", self.csv_path)) if v]
        if out and outputs:
            lines += ["[output]"] + out + [""]
        return "\n".join(lines)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text(outputs=False).encode()).hexdigest()


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace("x", ",").split(",") if x.strip())


def _read(text: str) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"malformed config: {exc}"]) from exc
    return {f"{section}.{key}": value for section in parser.sections() for key, value in parser[section].items()}


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Validate a config document; ``overrides`` (``section.key``) win over it."""
    raw = _read(text)
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = str(value)
    errors: list[str] = []

    def take(key, convert, default=None, required=False):
        if key not in raw:
            if required:
                errors.append(f"missing required key {key}")
            return default
        try:
            return convert(raw[key])
        except (TypeError, ValueError) as exc:
            errors.append(f"{key}: cannot parse {raw[key]!r} ({exc})")
            return default

    kind = take("model.kind", str, required=True)
    if kind is not None and kind not in {k.value for k in ModelKind}:
        errors.append(f"model.kind: unknown model kind {kind!r}")
        kind = None
    dimension = take("model.dimension", int, required=True)
    if dimension is not None and dimension < 1:
        errors.append(f"model.dimension must be positive, got {dimension}")
        dimension = None
    angles = take("model.angles", lambda s: tuple(float(x) for x in s.split(",") if x.strip()), ())
    master = take("model.seed", int, required=True)
    stream = take("model.stream", int, 0)
    for name, value in (("model.seed", master), ("model.stream", stream)):
        if value is not None and not 0 <= value < 2**64:
            errors.append(f"{name} must be a 64-bit unsigned integer, got {value}")

    experiment = take("experiment.kind", str, "simulate")
    if experiment not in EXPERIMENTS:
        errors.append(f"experiment.kind: unknown experiment {experiment!r} (choose from {', '.join(EXPERIMENTS)})")
    region = take("experiment.region", _ints, None)
    replicates = take("experiment.replicates", int, DEFAULT_REPLICATES)
    if replicates is not None and replicates < 1:
        errors.append(f"experiment.replicates must be positive, got {replicates}")
    law = take("experiment.law", str, "normal")
    if law not in LAWS:
        errors.append(f"experiment.law: unknown law {law!r}")
    threshold = take("experiment.threshold", float, None)
    scales = take("experiment.scales", _scales, DEFAULT_SCALES)
    rows = take("experiment.rows", int, 2000)
    if rows is not None and rows < 10:
        errors.append(f"experiment.rows must be at least 10, got {rows}")
    birkhoff_n = take("experiment.birkhoff_n", int, 256)
    if birkhoff_n is not None and birkhoff_n < 1:
        errors.append(f"experiment.birkhoff_n must be positive, got {birkhoff_n}")
    window = take("experiment.window", _ints, (-1, 1))
    if window is not None and (len(window) != 2 or window[0] > window[1]):
        errors.append(f"experiment.window must be 'lo, hi' with lo <= hi, got {window}")

    if region is not None:
        if any(n < 1 for n in region):
            errors.append(f"experiment.region sizes must be positive, got {region}")
        if dimension is not None and len(region) != dimension:
            errors.append(
                f"experiment.region has {len(region)} axes but model.dimension is {dimension}"
            )
    if scales is not None and any(v < 1 or n < 1 for v, n in scales):
        errors.append(f"experiment.scales sizes must be positive, got {scales}")

    model = None
    if kind is not None and dimension is not None:
        try:
            model = ModelSpec(ModelKind(kind), dimension, angles or ())
        except ValueError as exc:
            errors.append(f"model: {exc}")
    if errors:
        raise ConfigError(errors)
    return RunConfig(
        model=model,
        seed=Seed(master, stream),
        experiment=experiment,
        region=region if region is not None else (DEFAULT_SIDE,) * dimension,
        replicates=replicates,
        law=law,
        threshold=threshold,
        scales=scales,
        rows=rows,
        birkhoff_n=birkhoff_n,
        window=window,
        json_path=raw.get("output.json"),
        csv_path=raw.get("output.csv"),
    )


def _scales(text: str) -> tuple[tuple[int, int], ...]:
    out = []
    for item in text.split(","):
        v, _, n = item.strip().partition("x")
        out.append((int(v), int(n)))
    return tuple(out)
