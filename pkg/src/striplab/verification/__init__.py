"""Independent oracles, gradient checks and structural probes."""

from .gradcheck import GradCheckReport, compare_gradients, grad_check, numerical_gradient
from .probes import chain_influence_probe, impulse_response
from .suite import OracleReport, SuiteResult, run_all

__all__ = [
    "GradCheckReport", "OracleReport", "SuiteResult", "chain_influence_probe",
    "compare_gradients", "grad_check", "impulse_response", "numerical_gradient", "run_all",
]
