"""N-atom Jaynes-Cummings model with counter-rotating terms: quantum
entanglement dynamics and its classical limit."""

from .model import ModelParams, PhasePoint

__all__ = ["ModelParams", "PhasePoint"]
__version__ = "0.1.0"
