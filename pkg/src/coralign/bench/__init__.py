"""Benchmark harness: synthetic shifts, dataset I/O, experiment runner, CLI."""

from .data import Dataset, ShiftSpec, generate_shift, rotated_anisotropic_spec

__all__ = [
    "Dataset",
    "ShiftSpec",
    "generate_shift",
    "rotated_anisotropic_spec",
]
