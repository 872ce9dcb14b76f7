"""Darboux transformation chains for the spin equation.

The package integrates the two-level spin equation written in Dirac form,
builds first-order Darboux steps and their chains (iterated and determinant
forms), certifies the resulting polynomial pseudo-supersymmetry at the operator
level and turns transformed potentials into two-level atom populations and
driving fields.

Modules
-------
core
    Grids, potentials, the spin and chi integrators, exact derivative stacks.
darboux
    One-fold transformation functions, ``W`` and the transformed potential.
chains
    Coinciding- and distinct-constant chains, Wronskian blocks, ``L02``.
susy
    Pseudo-Hermiticity, intertwining, factorization and superalgebra residuals.
atom
    Populations, closed-form benchmarks, detuning and field reconstruction.
scenarios, cli
    Named presets and the command-line runner.
"""

from __future__ import annotations

from . import atom, chains, core, darboux, errors, jets, operators, scenarios, susy
from .atom import *  # noqa: F401,F403
from .chains import *  # noqa: F401,F403
from .core import *  # noqa: F401,F403
from .darboux import *  # noqa: F401,F403
from .errors import (
    CapabilityError,
    ChiZeroCrossingError,
    DegenerateChainError,
    DegenerateSolutionError,
    IntegrationDomainError,
    NumericalSingularityError,
    PreconditionError,
    RealityViolationError,
    SingularCoefficientError,
    SpinDarbouxError,
    UnsupportedRegimeError,
    ValidationError,
)
from .jets import Jet, diag_jet
from .susy import *  # noqa: F401,F403

__version__ = "0.1.0"
