r"""Monomial bases of :math:`H^0(\mathbb{CP}^n, \mathcal{O}(p))` and weighted evaluation.

A section is stored through its homogeneous exponent ``beta`` (``|beta| = p``);
in chart ``c`` it is the monomial :math:`\prod_{j\ne c} w_j^{\beta_j}` times
the ``p``-th power of the chart frame.  Pointwise norms therefore agree
between charts.  The preconditioning constants
:math:`\sqrt{(p+n)!/\beta!}` make the basis orthonormal for the
Fubini-Study weight.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import EvaluationError, SizingError
from .geometry import ModelSurface, Weight, as_points

MAX_P = {1: 512, 2: 64}


@dataclass(frozen=True)
class SectionBasis:
    p: int
    n: int
    homogeneous: np.ndarray  # (dim, n+1) exponents beta, |beta| = p
    log_precond: np.ndarray  # (dim,)

    @property
    def exponents(self) -> np.ndarray:
        """Affine (chart 0) exponents alpha = beta[1:]."""
        return self.homogeneous[:, 1:]

    @property
    def precond(self) -> np.ndarray:
        return np.exp(self.log_precond)

    def __len__(self):
        return len(self.log_precond)

    def chart_exponents(self, chart: int) -> np.ndarray:
        return np.delete(self.homogeneous, chart, axis=1)


def dimension(n: int, p: int) -> int:
    return math.comb(p + n, n)


def basis_for(surface: ModelSurface, p: int, precond: bool = True) -> SectionBasis:
    """Full monomial basis of degree ``p``; FS-orthonormal when ``precond``."""
    n = surface.n
    if p < 1:
        raise SizingError("p must be >= 1")
    if p > MAX_P[n]:
        raise SizingError(f"p={p} exceeds the conditioning guard {MAX_P[n]} for n={n}")
    if n == 1:
        alphas = [(k,) for k in range(p + 1)]
    else:
        alphas = [a for d in range(p + 1) for a in itertools.product(range(d + 1), repeat=n)
                  if sum(a) == d]
        alphas.sort(key=lambda a: (sum(a), tuple(-x for x in a)))
    beta = np.array([(p - sum(a),) + tuple(a) for a in alphas], dtype=int)
    if precond:
        logc = 0.5 * (gammaln(p + n + 1) - gammaln(beta + 1).sum(axis=1))
    else:
        logc = np.zeros(len(beta))
    return SectionBasis(p, n, beta, logc)


def eval_log(basis: SectionBasis, weight: Weight, z, chart: int = 0):
    """Log-magnitudes and phases of ``s_j(z) e^{-p(phi_0 + phi)(z)}``.

    Returns two (N, dim) float arrays; ``-inf`` marks exact zeros.
    """
    z = as_points(z, basis.n)
    expo = basis.chart_exponents(chart)  # (dim, n)
    absz = np.abs(z)
    with np.errstate(divide="ignore"):
        logabs = np.log(absz)
    # 0 * log 0 counts as 0
    safe = np.where(absz > 0, logabs, 0.0)
    terms = expo[None, :, :] * safe[:, None, :]
    terms = np.where((expo[None, :, :] > 0) & (absz[:, None, :] == 0), -np.inf, terms)
    pot = 0.5 * np.log1p(np.sum(absz**2, axis=1)) + weight.phi(z, chart)
    logmag = basis.log_precond[None, :] + terms.sum(axis=2) - basis.p * pot[:, None]
    phase = (expo[None, :, :] * np.angle(z)[:, None, :]).sum(axis=2)
    if np.any(np.isnan(logmag)) or np.any(logmag == np.inf):
        raise EvaluationError("non-finite weighted section values")
    return logmag, phase


def eval_weighted(basis: SectionBasis, weight: Weight, z, chart: int = 0) -> np.ndarray:
    """Vector ``v_j = s_j(z) e^{-p(phi_0+phi)(z)}`` with ``|v_j| = |s_j(z)|_{p phi}``.

    Always evaluated in the log domain and exponentiated once.
    """
    logmag, phase = eval_log(basis, weight, z, chart)
    return np.exp(logmag) * np.exp(1j * phase)
