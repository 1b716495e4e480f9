from .solver import (
    SolverConfig,
    SolverState,
    compute_pressure,
    leray_project,
    random_divfree,
    run,
    step,
    taylor_green_pressure,
    taylor_green_velocity,
)
from .trajectory import Trajectory

__all__ = [
    "SolverConfig", "SolverState", "Trajectory", "compute_pressure", "leray_project",
    "random_divfree", "run", "step", "taylor_green_pressure", "taylor_green_velocity",
]
