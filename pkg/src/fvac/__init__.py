"""False-vacuum decay in a driven two-component ring condensate.

Truncated-Wigner ensembles: thermal Bogoliubov initial states, an
interaction-picture RK4 integrator (compiled FFTW core with a numpy
fallback), phase and population observables, and ensemble orchestration.
"""

from .dynamics import IntegrationError, IntegratorConfig, run_batch, run_trajectory
from .ensemble import RunManifest, run_ensemble, run_manifest
from .initstate import sample_initial
from .kernels import available_backends, default_backend
from .lattice import build_lattice
from .params import DimensionlessParams, PhysicalParams, reference_experiment, to_dimensionless

__version__ = "0.1.0"

__all__ = [
    "DimensionlessParams",
    "IntegrationError",
    "IntegratorConfig",
    "PhysicalParams",
    "RunManifest",
    "available_backends",
    "build_lattice",
    "default_backend",
    "reference_experiment",
    "run_batch",
    "run_ensemble",
    "run_manifest",
    "run_trajectory",
    "sample_initial",
    "to_dimensionless",
]
