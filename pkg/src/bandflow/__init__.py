"""Numerical laboratory for Gaussian band matrices and their resolvent flow.

Submodules stay importable on their own; the names gathered here are the
ones a session typically starts from.
"""

from .circulant import CirculantOperator
from .profiles import ProfileSpec, build_variance_profile, variance_profile_pair, heat_kernel
from .semicircle import SpectralPoint, stieltjes_semicircle, characteristic_path
from .ensemble import sample_band_matrix, brownian_path
from .resolvent import resolvent, qd_error, local_law_ratios, eigen_delocalization
from .flow import StoppingConfig, duhamel_decomposition, stopping_monitor, conjecture_probe
from .diagrams import EvalContext, evaluate_diagram, drift_integrand_term
from .experiments import SweepConfig, run_sweep, load_rows, fit_exponent, appendix_constants

__version__ = "0.1.0"

__all__ = [
    "CirculantOperator",
    "ProfileSpec",
    "build_variance_profile",
    "variance_profile_pair",
    "heat_kernel",
    "SpectralPoint",
    "stieltjes_semicircle",
    "characteristic_path",
    "sample_band_matrix",
    "brownian_path",
    "resolvent",
    "qd_error",
    "local_law_ratios",
    "eigen_delocalization",
    "StoppingConfig",
    "duhamel_decomposition",
    "stopping_monitor",
    "conjecture_probe",
    "EvalContext",
    "evaluate_diagram",
    "drift_integrand_term",
    "SweepConfig",
    "run_sweep",
    "load_rows",
    "fit_exponent",
    "appendix_constants",
    "__version__",
]
