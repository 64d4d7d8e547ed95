"""qsf: a workbench for finite-dimensional quantum systems.

Circuit and measurement simulation, Lie-algebraic controllability and
observability analysis of bilinear control systems, and robust synthesis of
piecewise-constant control pulses with a certified fidelity floor.
"""

from . import linalg, lie, quantum, robust

__version__ = "0.1.0"

__all__ = ["linalg", "lie", "quantum", "robust", "__version__"]
