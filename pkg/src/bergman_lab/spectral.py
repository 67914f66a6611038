r"""Galerkin spectrum of D_p^2 on functions over CP^1, and the Schwartz filter.

Trial space.  Sections ``f e^p`` (``e`` the O(1) frame) with
``f = z^a zbar^b (1 + |z|^2)^{-b}``, ``0 <= b <= d``, ``0 <= a <= p + b``.
These are smooth global sections, ``b = 0`` is exactly ``H^0``, and the
spaces are nested in ``d``.  Grouped by angular momentum ``m = a - b``
(``-d <= m <= p``) and written in ``u = |z|^2 / (1 + |z|^2)``, block ``m`` is
``e^{i m alpha} r^{|m|} Q(u)`` with ``Q`` a polynomial of degree
``<= d - max(0, -m)`` (times ``(1-u)^{|m|}`` when ``m < 0``).  The monomials
``u^b`` are numerically useless beyond ``d ~ 15``; each block is spanned by
Jacobi polynomials orthonormal for the Fubini-Study weight
``u^{|m|} (1-u)^{p-m}``, so the FS mass matrix is the identity.

Forms.  ``M = <s_I, s_J>`` and ``A = 2 <dbar s_I, dbar s_J>`` with
``|dz|^2`` measured by ``g = theta(., J.)``, which gives
``A = 4 int f_zbar conj(g_zbar) h^p dx dy``.  With this normalization the
Fubini-Study spectrum starts at ``4 pi (p + 2)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
from numpy.polynomial.legendre import leggauss
from scipy.special import eval_jacobi, gammaln

from .bergman import ring_fourier
from .errors import (FactorizationError, InconclusiveError, ParameterError)
from .geometry import ModelSurface, Weight, certification_grid, curvature_on_grid
from .quadrature import QuadratureRule, build_rule

logger = logging.getLogger(__name__)

ZERO_THRESHOLD = 1e-6
CONVERGENCE_TOL = 0.01


@dataclass(frozen=True)
class GalerkinSpace:
    p: int
    d: int
    m: np.ndarray       # angular momentum per basis function
    deg: np.ndarray     # Jacobi degree within the block

    def __len__(self):
        return len(self.m)

    @property
    def holomorphic(self) -> np.ndarray:
        """Mask of the H^0 functions (degree 0, m >= 0)."""
        return (self.deg == 0) & (self.m >= 0)

    def blocks(self):
        for mm in np.unique(self.m):
            yield int(mm), np.flatnonzero(self.m == mm)


def galerkin_space(p: int, d: int) -> GalerkinSpace:
    if p < 1 or d < 0:
        raise ParameterError("need p >= 1 and d >= 0")
    ms, degs = [], []
    for m in range(-d, p + 1):
        for j in range(d - max(0, -m) + 1):
            ms.append(m)
            degs.append(j)
    return GalerkinSpace(p, d, np.array(ms), np.array(degs))


def _jacobi_parts(space: GalerkinSpace, u: np.ndarray):
    """Mass and stiffness radial amplitudes, shape (len(u), dim).

    ``|s_I|^2 theta``-density on the ring at ``u`` is ``X[:, I]^2`` and the
    stiffness density is ``Y[:, I]^2`` (before the weight factor).
    """
    p = space.p
    m, j = space.m, space.deg
    k = np.abs(m)
    al = (p - m).astype(float)        # (1-u) exponent of the FS weight
    be = k.astype(float)              # u exponent
    x = 2.0 * u[:, None] - 1.0
    # orthonormal on [0, 1] against u^be (1-u)^al
    lognorm = 0.5 * (gammaln(j + al + 1) + gammaln(j + be + 1) - np.log(2 * j + al + be + 1)
                     - gammaln(j + al + be + 1) - gammaln(j + 1))
    P = eval_jacobi(j[None, :], al[None, :], be[None, :], x) * np.exp(-lognorm)[None, :]
    dP = np.where(j[None, :] > 0,
                  (j + al + be + 1)[None, :]
                  * eval_jacobi(np.maximum(j - 1, 0)[None, :], al[None, :] + 1, be[None, :] + 1, x),
                  0.0) * np.exp(-lognorm)[None, :]
    lu, l1u = np.log(u)[:, None], np.log1p(-u)[:, None]
    X = np.exp(0.5 * be * lu + 0.5 * al * l1u) * P
    pos = m >= 0
    # m >= 0: |T|^2 (1+r^2)^{2-p} = 4 u^{m+1} (1-u)^{p+1-m} P'^2
    # m < 0:  4 u^{k-1} (1-u)^{p+k+1} (k P + u P')^2
    Ypos = np.exp(0.5 * (k + 1) * lu + 0.5 * (p + 1 - m) * l1u) * dP
    Yneg = np.exp(0.5 * (k - 1) * lu + 0.5 * (p + k + 1) * l1u) * (k * P + u[:, None] * dP)
    Y = 2.0 * math.sqrt(math.pi) * np.where(pos[None, :], Ypos, Yneg)
    return X, Y


def assemble(surface: ModelSurface, weight: Weight, p: int, d: int,
             rule: Optional[QuadratureRule] = None, space: Optional[GalerkinSpace] = None):
    """Mass and stiffness matrices ``(M, A)`` of the Galerkin space."""
    if surface.n != 1:
        raise ParameterError("the Galerkin spectrum is implemented on CP^1 only")
    space = space or galerkin_space(p, d)
    rule = rule or build_rule(surface, p + d)
    if rule.meta["p_max"] < p + d:
        raise ParameterError(f"rule resolves p_max={rule.meta['p_max']} < p + d = {p + d}")
    what, shift = ring_fourier(rule, weight, p)
    sc = np.exp(shift - shift.max())
    X, Y = _jacobi_parts(space, rule.radial_u)
    wr = rule.radial_w * sc
    na = rule.n_angular
    dim = len(space)
    M = np.zeros((dim, dim), dtype=complex)
    A = np.zeros((dim, dim), dtype=complex)
    ref = np.abs(what[:, 0])
    blocks = list(space.blocks())
    for mi, I in blocks:
        for mj, J in blocks:
            c = what[:, (mi - mj) % na]
            if mi != mj and not np.any(np.abs(c) > 4 * np.finfo(float).eps * ref):
                continue
            wc = (wr * c)[:, None]
            M[np.ix_(I, J)] = X[:, I].T @ (wc * X[:, J])
            A[np.ix_(I, J)] = Y[:, I].T @ (wc * Y[:, J])
    # restore the weight scale removed for stability
    scale = np.exp(shift.max())
    M = 0.5 * (M + M.conj().T) * scale
    A = 0.5 * (A + A.conj().T) * scale
    return M, A


def galerkin_eigenvalues(M, A, space: Optional[GalerkinSpace] = None, block: bool = False):
    """Sorted generalized eigenvalues of ``(A, M)``; per angular block when ``block``."""
    def solve(Mb, Ab):
        try:
            return sla.eigh(Ab, Mb, eigvals_only=True)
        except np.linalg.LinAlgError:
            ev = np.linalg.eigvalsh(Mb)
            raise FactorizationError("mass matrix not positive definite",
                                     min_eigenvalue=float(ev[0])) from None

    if block and space is not None:
        vals = np.concatenate([solve(M[np.ix_(I, I)], A[np.ix_(I, I)]) for _, I in space.blocks()])
        return np.sort(vals)
    return np.sort(solve(M, A))


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    kernel_dim: int
    gap: float
    bound: float
    ratio: float
    p: int
    d: int
    zeta: float
    converged: bool = True
    status: str = "ok"
    ladder: list = field(default_factory=list)   # (d, gap) history
    matrix_size: int = 0


def _zeta_floor(surface, weight):
    if weight.is_zero:
        return 1.0
    grid = certification_grid(surface)
    return float(np.min(curvature_on_grid(surface, weight, grid).zeta_local))


def d_ladder(p: int):
    return sorted({max(1, round(p / 2)), p, max(1, round(1.5 * p))})


def spectrum_at(surface, weight, p, d, zeta):
    space = galerkin_space(p, d)
    M, A = assemble(surface, weight, p, d, space=space)
    ev = galerkin_eigenvalues(M, A, space, block=weight.rotation_invariant or weight.is_zero)
    thr = ZERO_THRESHOLD * 2 * np.pi * p
    kdim = int(np.sum(ev < thr))
    gap = float(ev[kdim]) if kdim < len(ev) else float("inf")
    bound = 2 * np.pi * zeta * p
    return SpectrumReport(ev, kdim, gap, bound, gap / bound, p, d, zeta, matrix_size=len(space))


def gap_report(surface: ModelSurface, weight: Weight, p: int, d=None, zeta: Optional[float] = None,
               strict: bool = False) -> SpectrumReport:
    """Gap of the Galerkin spectrum against ``2 pi zeta p`` with d-refinement.

    ``d`` may be an int (single level, reported as not converged) or a list;
    the default ladder is ``{p/2, p, 3p/2}``.  Convergence needs the gap to
    move less than 1% on the last refinement; otherwise the status is
    ``inconclusive`` (raised when ``strict``).
    """
    zeta = _zeta_floor(surface, weight) if zeta is None else zeta
    levels = d_ladder(p) if d is None else ([d] if np.isscalar(d) else sorted(d))
    history, rep = [], None
    for dd in levels:
        rep = spectrum_at(surface, weight, p, dd, zeta)
        history.append((dd, rep.gap))
    rep.ladder = history
    if len(history) >= 2:
        g0, g1 = history[-2][1], history[-1][1]
        rep.converged = abs(g1 - g0) <= CONVERGENCE_TOL * abs(g0)
    else:
        rep.converged = False
    if rep.kernel_dim != p + 1:
        logger.warning("kernel dimension %d differs from dim H^0 = %d", rep.kernel_dim, p + 1)
    if not rep.converged:
        rep.status = "inconclusive"
        if strict:
            raise InconclusiveError(f"Galerkin gap not converged over d={levels}: {history}")
    return rep


# ---------------------------------------------------------------------------
# filter


def smooth_step(t):
    """``g(t) / (g(t) + g(1-t))`` with ``g(t) = exp(-1/t)``: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        g0 = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        g1 = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1 - t, 1.0)), 0.0)
    return g0 / (g0 + g1)


def bump(v, eps0: float):
    """Even plateau: 1 on |v| <= eps0/2, 0 on |v| >= eps0, smooth_step glue in between."""
    v = np.abs(np.asarray(v, dtype=float))
    return smooth_step((eps0 - v) / (eps0 / 2))


FILTER_NODES = 1024
FILTER_TOL = 1e-12


def _tail_nodes(eps0, n):
    x, w = leggauss(n)
    h = eps0 / 4
    return 3 * h + h * x, h * w          # [eps0/2, eps0]


def filter_unit(b, eps0: float, n_nodes: int = FILTER_NODES):
    """``F_1(b)``: normalized cosine transform of the bump (zeta = 1)."""
    b = np.asarray(b, dtype=float)
    v, w = _tail_nodes(eps0, n_nodes)
    f = bump(v, eps0)
    mass = eps0 / 2 + float(np.dot(w, f))
    with np.errstate(invalid="ignore", divide="ignore"):
        plateau = np.where(b == 0, eps0 / 2, np.sin(b * eps0 / 2) / np.where(b == 0, 1, b))
    tail = np.cos(np.outer(b, v)) @ (w * f)
    return (plateau + tail) / mass


def filter_direct(a, eps0: float, zeta: float, n_nodes: int = FILTER_NODES):
    """Complex ``F(a)`` from the full Fourier integral of ``f(v / zeta)`` (independent route)."""
    a = np.asarray(a, dtype=float)
    # composite Gauss-Legendre on [-zeta eps0, zeta eps0] split at the plateau edges
    x, w = leggauss(n_nodes)
    edges = zeta * eps0 * np.array([-1.0, -0.5, 0.5, 1.0])
    vs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        vs.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * w)
    v, w = np.concatenate(vs), np.concatenate(ws)
    f = bump(v / zeta, eps0)
    return (np.exp(1j * np.outer(a, v)) @ (w * f)) / np.dot(w, f)


@dataclass
class FilterProfile:
    eps0: float
    zeta: float
    a: np.ndarray
    values: np.ndarray
    moments: dict          # m -> sup_a |a|^m |F(a)|
    cap: float             # largest |a| with converged quadrature
    imag_max: float = 0.0  # from the direct complex route
    route_gap: float = 0.0  # |F_cos - Re F_direct| on the check sample

    def __call__(self, a):
        return np.interp(np.abs(a), self.a, self.values)


def default_filter_grid(zeta: float, b_max: float = 2000.0, step: float = 0.05):
    return np.linspace(0.0, b_max / zeta, int(round(b_max / step)) + 1)


def filter_build(eps0: float = 0.5, zeta: float = 1.0, grid=None, n_nodes: int = FILTER_NODES,
                 n_check: int = 257) -> FilterProfile:
    """Sample ``F(a) = F_1(zeta a)`` and its moment table on ``grid``.

    Values where the ``n_nodes`` and ``2 n_nodes`` tail quadratures disagree
    by more than ``FILTER_TOL`` are dropped and the cap is reported.
    """
    if not 0 < eps0 <= 1:
        raise ParameterError("eps0 must lie in (0, 1]")
    if not 0 < zeta <= 1:
        raise ParameterError("zeta must lie in (0, 1]")
    a = default_filter_grid(zeta) if grid is None else np.sort(np.abs(np.asarray(grid, dtype=float)))
    F = filter_unit(zeta * a, eps0, n_nodes)
    # refinement check on every 20th sample and the last one
    chk = np.unique(np.r_[np.arange(0, len(a), 20), len(a) - 1])
    bad = np.abs(F[chk] - filter_unit(zeta * a[chk], eps0, 2 * n_nodes)) > FILTER_TOL
    if np.any(bad):
        first = int(chk[np.argmax(bad)])
        keep = np.arange(len(a)) < (int(chk[max(np.argmax(bad) - 1, 0)]) + 1 if first else 0)
        logger.warning("filter quadrature unresolved beyond |a| = %.4g", a[keep][-1] if keep.any() else 0)
        a, F = a[keep], F[keep]
    cap = float(a[-1]) if len(a) else 0.0
    moments = {m: float(np.max(np.abs(a) ** m * np.abs(F))) for m in range(5)}
    sample = a[np.linspace(0, len(a) - 1, min(n_check, len(a))).astype(int)]
    sample = sample[zeta * sample * eps0 <= n_nodes]
    Fd = filter_direct(sample, eps0, zeta, n_nodes)
    imag = float(np.max(np.abs(Fd.imag))) if len(sample) else 0.0
    gap = float(np.max(np.abs(Fd.real - np.interp(sample, a, F)))) if len(sample) else 0.0
    return FilterProfile(eps0, zeta, a, F, moments, cap, imag, gap)


def projector_gap_bound(profile: FilterProfile, p: int, zeta: Optional[float] = None) -> float:
    """``sup_{|a| >= sqrt(zeta p)} |F(a)|`` over the profile samples."""
    zeta = profile.zeta if zeta is None else zeta
    thr = math.sqrt(zeta * p)
    if profile.cap < thr:
        raise ParameterError(f"profile cap {profile.cap:.3g} below sqrt(zeta p) = {thr:.3g}")
    sel = profile.a >= thr
    vals = np.abs(profile.values[sel])
    # include the threshold itself (F is continuous)
    at = abs(float(filter_unit(np.array([profile.zeta * thr]), profile.eps0)[0]))
    return float(max(vals.max() if vals.size else 0.0, at))
