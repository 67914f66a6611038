r"""Gaussian model kernel and the near-diagonal comparison.

Normalized coordinates at ``x0``: ``z = x0 + F Z`` with ``F`` chosen so the
Riemannian metric ``g = 2 theta`` pulls back to the identity and the
curvature becomes ``diag(a_i / 2 pi)``.  Chart Hessians are stored as
``H[j, k] = d_j dbar_k``, so the pulled-back Hermitian form of ``H`` is
``F^T H conj(F)``; the frame is obtained from the conjugated pencil.

For Fubini-Study at the origin ``F = sqrt(pi)`` and
``p^{-1} |P_p(F Z / sqrt(p), 0)| -> exp(-pi |Z|^2 / 2) = |Pmodel(Z, 0)|``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .bergman import BergmanEvaluator, kernel_on_grid
from .errors import ParameterError, PositivityError
from .geometry import (CHART_SAFE_ABS, GridPoints, ModelSurface, Weight, as_points,
                       curvature_at, curvature_on_grid)

DEFAULT_SIGMA = 3.0
DEFAULT_RADIAL = 25
DEFAULT_ANGULAR = 8


@dataclass(frozen=True)
class ModelKernelParams:
    x0: np.ndarray
    a: np.ndarray         # 2 pi x generalized eigenvalues of (omega, theta), ascending
    frame: np.ndarray     # Z -> chart displacement
    chart: int = 0
    surface: ModelSurface = None

    @property
    def n(self) -> int:
        return len(self.a)

    def chart_point(self, Z) -> np.ndarray:
        Z = as_points(Z, self.n)
        return self.x0[None, :] + Z @ self.frame.T


def model_params(surface: ModelSurface, weight: Weight, x0, chart: int = 0) -> ModelKernelParams:
    """Curvature eigenvalues ``a_i`` and the normalizing frame at ``x0``."""
    cs = curvature_at(surface, weight, x0, chart)
    if cs.zeta_local <= 0:
        raise PositivityError(f"curvature not positive at {cs.point} (zeta_local={cs.zeta_local:.3e})",
                              worst_point=cs.point, worst_value=cs.zeta_local)
    omega = np.conj(cs.omega_matrix)
    g = 2.0 * np.conj(cs.theta_matrix)
    lam, F = sla.eigh(omega, g)          # F^H g F = I, F^H omega F = diag(lam)
    # eigenvalues of omega against theta = 2 lam
    return ModelKernelParams(cs.point, 2 * np.pi * 2 * lam, F, chart, surface)


def model_kernel(params_or_a, Z, Zp) -> np.ndarray:
    """``prod(a/2pi) exp(-1/4 sum a_i (|z_i|^2 + |z'_i|^2 - 2 z_i conj(z'_i)))``."""
    a = np.asarray(params_or_a.a if isinstance(params_or_a, ModelKernelParams) else params_or_a,
                   dtype=float).reshape(-1)
    n = len(a)
    Z, Zp = as_points(Z, n), as_points(Zp, n)
    expo = -0.25 * np.sum(a * (np.abs(Z) ** 2 + np.abs(Zp) ** 2 - 2 * Z * np.conj(Zp)), axis=1)
    return np.prod(a / (2 * np.pi)) * np.exp(expo)


def kappa(params: ModelKernelParams, Z) -> np.ndarray:
    """Volume density at ``x0 + F Z`` relative to ``x0``; ``kappa(0) = 1``."""
    s = params.surface or ModelSurface(params.n)
    num = np.real(np.linalg.det(s.theta_matrix(params.chart_point(Z))))
    den = np.real(np.linalg.det(s.theta_matrix(params.x0)))[0]
    return num / den


def comparison_grid(n: int, sigma: float = DEFAULT_SIGMA, n_radial: int = DEFAULT_RADIAL,
                    n_angular: int = DEFAULT_ANGULAR) -> np.ndarray:
    """Points with ``|Z| <= sigma``: radii times angular directions (per coordinate plane for n=2)."""
    r = np.linspace(0.0, sigma, n_radial)
    ang = np.exp(2j * np.pi * np.arange(n_angular) / n_angular)
    if n == 1:
        pts = (r[:, None] * ang[None, :]).reshape(-1, 1)
    else:
        dirs = [np.array([1, 0]), np.array([0, 1]), np.array([1, 1]) / np.sqrt(2),
                np.array([1, -1j]) / np.sqrt(2)]
        pts = np.concatenate([(r[:, None, None] * ang[None, :, None] * d[None, None, :]).reshape(-1, 2)
                              for d in dirs])
    return np.unique(np.round(pts, 14), axis=0)


@dataclass(frozen=True)
class NearDiagonalResult:
    sup: float
    residuals: np.ndarray
    Z: np.ndarray
    p: int


def near_diagonal_residual(ev: BergmanEvaluator, params: ModelKernelParams, p: int = None,
                           Z=None, sigma: float = DEFAULT_SIGMA) -> NearDiagonalResult:
    r"""Sup over ``Z`` of ``| p^{-n} |P_p(x0 + F Z/sqrt p, x0)| k^{1/2}(Z/sqrt p) k^{1/2}(0) - |Pmodel(Z,0)| |``.

    The ``kappa^{+1/2}`` factors undo the volume-density correction carried
    by the kernel with respect to the curved volume form.
    """
    p = ev.p if p is None else p
    n = params.n
    Z = comparison_grid(n, sigma) if Z is None else as_points(Z, n)
    zmax = float(np.max(np.linalg.norm(Z, axis=1))) if len(Z) else 0.0
    if zmax > sigma + 1e-12:
        raise ParameterError(f"comparison point |Z|={zmax:.3f} exceeds sigma={sigma}")
    if zmax / np.sqrt(p) > 1.0:
        raise ParameterError(f"sigma/sqrt(p)={zmax / np.sqrt(p):.3f} leaves the comparison ball")
    scaled = Z / np.sqrt(p)
    x = params.chart_point(scaled)
    if np.max(np.abs(x)) > CHART_SAFE_ABS:
        raise ParameterError("comparison points leave the chart")
    Pmod = np.abs(ev.kernel_offdiag(x, np.repeat(params.x0[None, :], len(x), axis=0),
                                    params.chart, params.chart))
    lhs = Pmod / p**n * np.sqrt(kappa(params, scaled))
    res = np.abs(lhs - np.abs(model_kernel(params, Z, np.zeros_like(Z))))
    return NearDiagonalResult(float(res.max()), res, Z, p)


@dataclass(frozen=True)
class DiagonalResidual:
    values: np.ndarray     # |p^{-n} P_p(x,x) - omega^n/theta^n|
    sup: float
    argmax: int
    grid: GridPoints


def diagonal_residual_field(ev: BergmanEvaluator, weight: Weight, grid: GridPoints,
                            surface: ModelSurface = None) -> DiagonalResidual:
    if weight is not None and weight.name != ev.weight.name:
        raise ParameterError(f"evaluator built for {ev.weight.name}, not {weight.name}")
    surface = surface or ModelSurface(ev.basis.n)
    ratio = curvature_on_grid(surface, ev.weight, grid).volume_ratio
    dens = kernel_on_grid(ev, grid) / ev.p**surface.n
    vals = np.abs(dens - ratio)
    i = int(np.argmax(vals))
    return DiagonalResidual(vals, float(vals[i]), i, grid)
