"""Numerical laboratory for the advection-dominated Klausmeier vegetation model."""

from .model import ModelParams, SteadyState, regime_thresholds, uniform_steady_states

__all__ = ["ModelParams", "SteadyState", "regime_thresholds", "uniform_steady_states"]
__version__ = "0.1.0"
