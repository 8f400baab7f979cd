"""Eliminating charged matter fields from lattice electrodynamics.

Modules
-------
lattice
    Periodic grids, finite differences, time windows, RK4 and elliptic solves.
scalar_ed
    Scalar electrodynamics in unitary gauge and its eliminated form.
dirac_elim
    Dirac equation in the chiral representation and elimination of three components.
spinor_ed
    Dirac-Maxwell evolution and third-derivative closure for the complex potential.
carleman
    Linear embedding of polynomial ODEs in a truncated Fock space.
pipelines, cli
    Refinement studies and their command-line runner.
"""

from . import carleman, dirac_elim, lattice, scalar_ed, spinor_ed
from .convergence import ConvergenceReport, convergence_report
from .errors import (
    AmplitudeTooLarge,
    ConfigError,
    Degenerate,
    DegenerateField,
    DegeneratePotential,
    EmelimError,
    MissingSlices,
    NoConvergence,
    NonFiniteValue,
    PipelineError,
    SiteError,
    UnsupportedOrder,
    VanishingDensity,
    WindingObstruction,
)
from .lattice import GridSpec, Series, TimeStack

__version__ = "0.1.0"
