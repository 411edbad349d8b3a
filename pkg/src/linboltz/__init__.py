"""linboltz: linear kinetic solvers with entropy-dissipation certification."""

from .errors import (
    CertificationError,
    ConfigError,
    ConvergenceError,
    DomainError,
    InfeasibleValueError,
    LinboltzError,
    NumericalQualityError,
    UsageError,
)
from .models import (
    LorentzSpec,
    PhononSpec,
    RayleighSpec,
    build_lorentz,
    build_model,
    build_phonon,
    build_rayleigh,
    rayleigh_xi_bound,
)
from .velocity import (
    PoissonSolution,
    TiltedMeasure,
    VelocityModel,
    apply_generator,
    apply_k,
    diffusion_matrix,
    poisson_solve,
    poisson_solve_dense,
    spectral_gap_probe,
)

__version__ = "0.1.0"

__all__ = [
    "CertificationError",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "InfeasibleValueError",
    "LinboltzError",
    "NumericalQualityError",
    "UsageError",
    "LorentzSpec",
    "PhononSpec",
    "RayleighSpec",
    "build_lorentz",
    "build_model",
    "build_phonon",
    "build_rayleigh",
    "rayleigh_xi_bound",
    "PoissonSolution",
    "TiltedMeasure",
    "VelocityModel",
    "apply_generator",
    "apply_k",
    "diffusion_matrix",
    "poisson_solve",
    "poisson_solve_dense",
    "spectral_gap_probe",
    "__version__",
]
