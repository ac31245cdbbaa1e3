"""Desk-scale numerics for the weak-noise KPZ upper tail.

Subpackages cover the discretization primitives (grids), the tilted heat
solvers (solver), the ground-state functional and its sharp bound
(spectral), discrete rearrangement inequalities (rearrange), the
constrained rate-function optimizer (variational), and bridge Monte Carlo
with the limit shape (bridge).  The cli module wires everything into
reproducible experiments.
"""

__version__ = "0.1.0"
