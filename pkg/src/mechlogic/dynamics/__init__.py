"""Overdamped Brownian dynamics engine."""

from .engine import (T0, NoiseSource, Packed, SimParams, State, compute_forces, initial_state,
                     potential_energy, relax, run, step)
from .schedule import ActuationSchedule, Constant, Square, Step
from .trajectory import Trajectory

__all__ = [
    "T0", "NoiseSource", "Packed", "SimParams", "State", "compute_forces", "initial_state",
    "potential_energy", "relax", "run", "step", "ActuationSchedule", "Constant", "Square",
    "Step", "Trajectory",
]
