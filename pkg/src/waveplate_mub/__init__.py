"""Mutually unbiased bases from a single wave plate: solver, error budgets, tomography."""

__version__ = "0.1.0"
