"""Simulation and verification tools for martingale-difference random fields on Z^d."""

from mdfield.models import ModelKind, ModelSpec, Region, Seed, field_value, shift_field

__all__ = [
    "ModelKind",
    "ModelSpec",
    "Region",
    "Seed",
    "field_value",
    "shift_field",
]

__version__ = "0.1.0"
