"""Pseudospectral solvers for classical, degenerate-mobility and two-mobility Cahn--Hilliard flows."""

__version__ = "0.1.0"

from .spectral import GridSpec, SymbolOperator, build_symbol, apply_symbol
from .models import Model, ModelParams, SimState, initial_state, make_stepper

__all__ = [
    "GridSpec",
    "SymbolOperator",
    "build_symbol",
    "apply_symbol",
    "Model",
    "ModelParams",
    "SimState",
    "initial_state",
    "make_stepper",
]
