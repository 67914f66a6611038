r"""Tensor quadrature rules for :math:`\int f\,\theta^n/n!` on CP^1 and CP^2.

CP^1: with ``u = |z|^2 / (1 + |z|^2)`` the Fubini-Study form is
``theta = du dalpha / (2 pi)``, so Gauss-Legendre in ``u`` times the
trapezoid rule in the angle integrates smooth functions on the sphere
spectrally (the angular average of a smooth function is smooth in ``u``).

CP^2: the moment coordinates ``y_j = |z_j|^2 / (1 + |z|^2)`` push
``theta^2 / 2`` forward to ``dy_1 dy_2 dalpha_1 dalpha_2 / (4 pi^2)`` on the
simplex.  The simplex is collapsed with ``y_1 = s``, ``y_2 = (1 - s) t``
(Jacobian ``1 - s``) and each of ``s``, ``t`` gets Gauss-Legendre.
Degree bounds: ``n_radial`` nodes integrate simplex polynomials of degree
``2 n_radial - 2`` exactly, ``n_angular`` trapezoid nodes integrate angular
frequencies ``|m| < n_angular`` exactly.  Defaults are
``n_radial = p_max + 8`` and ``n_angular = 2 p_max + 4`` per factor.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammaln

from .errors import EvaluationError, ParameterError, SizingError
from .geometry import ModelSurface

MAX_NODES = 16_000_000
COMPENSATED_THRESHOLD = 100_000


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray             # (N, n) chart-0 coordinates
    weights: np.ndarray           # (N,) positive, sum = manifold volume
    meta: dict
    exactness_report: dict = field(default_factory=dict)
    # torus structure: nodes are radial-major, then the n angles (row-major);
    # node weight = radial_w / n_angular**n, |z_j| = radial_r[:, j]
    radial_r: np.ndarray = None
    radial_w: np.ndarray = None
    radial_u: np.ndarray = None   # CP^1 only: u = r^2 / (1 + r^2)

    def __len__(self):
        return len(self.weights)

    @property
    def n(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_angular(self) -> int:
        return self.meta["n_angular"]


def gauss_legendre_01(k: int):
    x, w = leggauss(k)
    return 0.5 * (x + 1.0), 0.5 * w


def minimum_sizes(n: int, p_max: int) -> tuple[int, int]:
    if n == 1:
        return 2 * p_max + 16, 4 * p_max + 8
    return p_max + 8, 2 * p_max + 4


def build_rule(surface: ModelSurface, p_max: int, n_radial: int = None,
               n_angular: int = None, max_nodes: int = MAX_NODES) -> QuadratureRule:
    """Tensor rule resolving the weighted pairings of degree-``p_max`` sections."""
    if p_max < 1:
        raise ParameterError("p_max must be >= 1")
    n = surface.n
    min_r, min_a = minimum_sizes(n, p_max)
    n_radial = n_radial or min_r
    n_angular = n_angular or min_a
    if n_radial < min_r or n_angular < min_a:
        warnings.warn(f"node counts ({n_radial}, {n_angular}) below the exactness bound "
                      f"({min_r}, {min_a}) for p_max={p_max}", stacklevel=2)
    total = n_radial**n * n_angular**n
    if total > max_nodes:  # each node costs one weight evaluation
        raise SizingError(f"{total} quadrature nodes exceed the cap {max_nodes}")

    alpha = 2 * np.pi * np.arange(n_angular) / n_angular
    if n == 1:
        u, wu = gauss_legendre_01(n_radial)
        r = np.sqrt(u / (1.0 - u))
        nodes = (r[:, None] * np.exp(1j * alpha)[None, :]).reshape(-1, 1)
        weights = np.repeat(wu / n_angular, n_angular)
        rule = QuadratureRule(nodes, weights,
                              dict(n=1, p_max=p_max, n_radial=n_radial, n_angular=n_angular, chart=0),
                              radial_r=r[:, None], radial_w=wu, radial_u=u)
    else:
        s, ws = gauss_legendre_01(n_radial)
        S, T = np.meshgrid(s, s, indexing="ij")
        W = (ws[:, None] * ws[None, :]) * (1.0 - S)
        y1, y2 = S.ravel(), ((1.0 - S) * T).ravel()
        y0 = 1.0 - y1 - y2
        wy = W.ravel() / (4 * np.pi**2) * (2 * np.pi / n_angular) ** 2
        a1, a2 = np.meshgrid(alpha, alpha, indexing="ij")
        ph1, ph2 = np.exp(1j * a1.ravel()), np.exp(1j * a2.ravel())
        z1 = (np.sqrt(y1 / y0)[:, None] * ph1[None, :]).ravel()
        z2 = (np.sqrt(y2 / y0)[:, None] * ph2[None, :]).ravel()
        nodes = np.stack([z1, z2], axis=1)
        weights = np.repeat(wy, n_angular**2)
        radii = np.stack([np.sqrt(y1 / y0), np.sqrt(y2 / y0)], axis=1)
        rule = QuadratureRule(nodes, weights,
                              dict(n=2, p_max=p_max, n_radial=n_radial, n_angular=n_angular, chart=0),
                              radial_r=radii, radial_w=W.ravel())
    rule.exactness_report.update(_exactness_report(surface, rule, p_max))
    return rule


def beta_moment(k: int, p: int) -> float:
    """Closed form of the integral of |z|^{2k} (1+|z|^2)^{-p} theta on CP^1."""
    return math.exp(gammaln(k + 1) + gammaln(p - k + 1) - gammaln(p + 2))


def dirichlet_moment(beta, p: int) -> float:
    """Integral of |z^beta|^2 (1+|z|^2)^{-p} theta^n/n! on CP^n, |beta| <= p."""
    beta = list(beta)
    n = len(beta)
    rest = p - sum(beta)
    logv = sum(gammaln(b + 1) for b in beta) + gammaln(rest + 1) - gammaln(p + n + 1)
    return math.exp(logv)


def _exactness_report(surface, rule, p_max):
    rep = {"volume": abs(integrate(rule, np.ones(len(rule))) - surface.volume)}
    z2 = np.abs(rule.nodes) ** 2
    logs = np.log1p(z2.sum(axis=1))
    with np.errstate(divide="ignore"):
        logz = np.log(z2[:, 0])
    worst = 0.0
    for k in sorted({0, p_max // 2, p_max}):
        beta = [k] + [0] * (surface.n - 1)
        val = integrate(rule, np.exp((k * logz if k else 0.0) - p_max * logs))
        worst = max(worst, abs(val / dirichlet_moment(beta, p_max) - 1.0))
    rep["moments_rel"] = worst
    return rep


def _fsum(values: np.ndarray) -> float:
    return math.fsum(values.tolist())


def integrate(rule: QuadratureRule, f: Union[Callable, np.ndarray]):
    """Sum ``w_i f(node_i)`` with correctly rounded (fsum) accumulation."""
    vals = f(rule.nodes) if callable(f) else f
    vals = np.asarray(vals).reshape(-1)
    if vals.shape[0] != len(rule):
        raise ParameterError("integrand values do not match the rule size")
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise EvaluationError(f"non-finite integrand at node {i}: {rule.nodes[i]}")
    prod = rule.weights * vals
    if np.iscomplexobj(prod):
        return complex(_fsum(prod.real), _fsum(prod.imag))
    return float(_fsum(prod))


class CompensatedMatrixSum:
    """Neumaier accumulation of matrix partial sums in a fixed order."""

    def __init__(self, shape, dtype=complex):
        self.complex = np.issubdtype(np.dtype(dtype), np.complexfloating)
        real = np.finfo(np.dtype(dtype)).dtype
        parts = 2 if self.complex else 1
        self.total = np.zeros((parts,) + tuple(shape), dtype=real)
        self.comp = np.zeros_like(self.total)

    def add(self, block: np.ndarray):
        b = np.stack([block.real, block.imag]) if self.complex else block[None]
        t = self.total + b
        big = np.abs(self.total) >= np.abs(b)
        self.comp += np.where(big, (self.total - t) + b, (b - t) + self.total)
        self.total = t

    def value(self) -> np.ndarray:
        s = self.total + self.comp
        return s[0] + 1j * s[1] if self.complex else s[0]
