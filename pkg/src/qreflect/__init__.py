"""Thermal non-equilibrium atom-surface potentials and quantum reflection."""

from .asymptotics import (AsymptoteFit, BarrierScales, barrier_scales, fit_asymptote, fit_model,
                          gamma_analytic, r2_equilibrium_asymptote, r2_nonequilibrium_asymptote)
from .errors import ConfigurationError, DomainError, FitError, NumericalError, QReflectError
from .materials import (DEFAULT_CATALOG, AtomSurfacePair, Catalog, Species, Surface, beta0, beta4,
                        c2, c3, c4, load_catalog, phi)
from .potential import (AdditiveG, BarrierInfo, LifshitzG, PotentialModel, PotentialTable,
                        find_barrier, tabulate)
from .scattering import (FunctionPotential, ReflectionResult, ScatteringProblem, SolverSettings,
                         badlands, local_momentum, reflection_coefficient, reflection_curve)
from .units import CONSTANTS, Incidence, incidence_from_energy, incidence_from_velocity, incidence_from_wavenumber

__version__ = "0.1.0"
