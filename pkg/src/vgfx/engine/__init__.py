"""Path simulation: Euler-Maruyama kernels, path containers and refinement studies."""
from .backend import BACKEND
from .convergence import ConvergenceResult, convergence_study
from .paths import NEVER, PathSet, SimConfig, TimeGrid, run_kernel, simulate, step

__all__ = [
    "BACKEND", "ConvergenceResult", "NEVER", "PathSet", "SimConfig", "TimeGrid",
    "convergence_study", "run_kernel", "simulate", "step",
]
