"""Numerical Bergman kernels of weighted line bundles on CP^1 and CP^2.

Modules: ``geometry`` (charts, weights, curvature), ``quadrature``,
``sections``, ``bergman`` (Gram matrices and kernels), ``model`` (Gaussian
model kernel), ``spectral`` (Galerkin gap and the Schwartz filter) and
``lab`` (sweeps, fits, CLI).
"""
__version__ = "0.1.0"

from .errors import (BergmanLabError, ConfigError, EvaluationError, FactorizationError,
                     InconclusiveError, ParameterError, PositivityError, PrecisionEscalation,
                     SizingError)
from .geometry import (ModelSurface, Weight, build_family_weight, curvature_at, default_psi,
                       harmonic_weight, residual_grid, zero_weight)
from .bergman import (BergmanEvaluator, kernel_diagonal, kernel_diagonal_extremal,
                      kernel_offdiag_modulus)
from .model import diagonal_residual_field, model_kernel, model_params, near_diagonal_residual
from .spectral import filter_build, gap_report, projector_gap_bound
