"""Covariance estimation for heavy-tailed data with Bernoulli-missing entries."""
from ._backend import BACKEND
from .datagen import (
    CovarianceSpec,
    MaskedSample,
    Spectrum,
    audit_kappa,
    build_covariance,
    sample_gaussian,
    sample_student_t,
    sparsify,
)
from .linalg import SpectralSummary, SymmetricMatrix, diag_part, eigh, off_part, operator_norm, spectral_summary
from .net import DirectionNet, build_net, sup_abs_over_net
from .params import OpNormConstants, estimate_opnorm, estimate_p, estimate_trace, g_alpha, pick_lambdas
from .pipeline import (
    EstimatorConfig,
    EstimatorReport,
    baseline_inverse_weighted,
    baseline_sample_second_moment,
    estimate_covariance,
)
from .quadform import fit_diagonal, fit_offdiagonal, oracle_estimate, truncated_form
from .robust import psi, robust_mean

__version__ = "0.1.0"
