"""Numerical tolerances shared across the package."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    algebraic: float = 1e-12
    psd: float = 1e-10
    zero_potential: float = 1e-9
    triple_residual: float = 1e-9
    dedup_deg: float = 0.05
    window_resolution_deg: float = 0.05


TOL = Tolerances()
