"""Quasistatic brittle fracture in 2D linearized elasticity.

A time-incremental Griffith evolution on triangulated rectangles with a
relaxed (padding-layer) Dirichlet condition, an AT2 phase-field surrogate
for the crack set, energy-dissipation ledgers, rigid-motion / piecewise-Korn
diagnostics, and a post-hoc stability auditor.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
