r"""Gram matrices, orthonormalization and Bergman kernel evaluation.

Conventions: ``G[j, k] = <s_j, s_k> = sum_i w_i conj(v_j(z_i)) v_k(z_i)``
(conjugate-linear in the first slot).  With ``G = R^H R`` (Cholesky) the
sections ``e_m = sum_j s_j T[j, m]``, ``T = R^{-1}``, are orthonormal and
``T^H G T = I``.

Gram matrices are stored equilibrated: ``G = D Gt D`` with
``D = diag(exp(log_scale))`` and ``Gt`` of unit diagonal.  Radial weights at
large ``p`` have diagonals spanning hundreds of orders of magnitude while the
equilibrated matrix stays well conditioned; the precision ladder is driven by
``cond(Gt)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np
import scipy.linalg as sla

from .errors import FactorizationError, ParameterError, PrecisionEscalation
from .geometry import ModelSurface, Weight, as_points
from .quadrature import CompensatedMatrixSum, QuadratureRule, build_rule
from .sections import SectionBasis, basis_for, eval_log

logger = logging.getLogger(__name__)

CONDITION_THRESHOLD = 1e12
DEFAULT_EXTRA_BITS = 64
CHUNK_NODES = 20_000


@dataclass
class GramMatrix:
    scaled: np.ndarray       # equilibrated Gram, unit diagonal
    log_scale: np.ndarray    # G = D scaled D, D = exp(log_scale)
    p: int
    weight_id: str
    condition_estimate: float = float("nan")
    precision: str = "double"

    @property
    def entries(self) -> np.ndarray:
        d = np.exp(self.log_scale)
        return d[:, None] * self.scaled * d[None, :]

    @property
    def dim(self) -> int:
        return len(self.log_scale)


def _check_rule(basis, rule, p_needed=None):
    p_needed = basis.p if p_needed is None else p_needed
    if rule.n != basis.n:
        raise ParameterError("rule and basis live on different manifolds")
    if rule.meta["p_max"] < p_needed:
        raise ParameterError(f"rule built for p_max={rule.meta['p_max']} < {p_needed}")


def _equilibrate(G, log_scale):
    d = np.sqrt(np.real(np.diag(G)))
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise FactorizationError("Gram matrix has a non-positive diagonal entry")
    G = G / d[:, None] / d[None, :]
    G = 0.5 * (G + np.conj(G.T))
    return G, log_scale + np.log(d).astype(float)


def _dft_matrix(na, freqs):
    alpha = 2 * np.pi * np.arange(na, dtype=np.longdouble) / na
    ang = alpha[:, None] * np.asarray(freqs, dtype=np.longdouble)[None, :]
    return (np.cos(ang) - 1j * np.sin(ang)) / na


def ring_fourier(rule: QuadratureRule, weight: Weight, p: int, extended: bool = False):
    """Per-radial-node angular Fourier coefficients of ``exp(-2 p phi)``.

    Returns ``(what, shift)``: ``what[k][m]`` (index tuple modulo
    ``n_angular``) is the m-th torus Fourier coefficient of
    ``exp(-2 p phi - shift[k])`` at radial node ``k``.  Extended mode forms
    only frequencies ``|m_j| <= p`` by separable longdouble DFTs (numpy's
    FFT works in double).
    """
    na, n = rule.n_angular, rule.n
    nr = len(rule.radial_w)
    shape = (nr,) + (na,) * n
    ctype = np.clongdouble if extended else complex
    if weight.is_zero:
        what = np.zeros(shape, dtype=ctype)
        what[(slice(None),) + (0,) * n] = 1.0
        return what, np.zeros(nr)
    expo = -2.0 * p * weight.phi(rule.nodes).reshape(nr, -1)
    shift = expo.max(axis=1)
    if not extended:
        W = np.exp(expo - shift[:, None]).reshape(shape)
        return np.fft.fftn(W, axes=tuple(range(1, n + 1))) / na**n, shift
    W = np.exp((expo - shift[:, None]).astype(np.longdouble)).reshape(shape)
    m = min(p, na // 2)
    freqs = np.arange(-m, m + 1)
    E = _dft_matrix(na, freqs)
    for ax in range(1, n + 1):
        W = np.moveaxis(np.tensordot(W, E, axes=([ax], [0])), -1, ax)
    what = np.zeros(shape, dtype=ctype)
    idx = np.ix_(*([np.arange(nr)] + [freqs % na] * n))
    what[idx] = W
    return what, shift


def _gram_torus(basis, weight, rule, extended=False):
    """Gram via per-node torus FFTs: sum_k R_k[a] R_k[b] What_k[alpha_a - alpha_b].

    ``R_k[a]`` is the square root of the radial factor of ``|v_a|^2`` times
    the radial weight; only difference vectors with coefficients above
    rounding level are visited.
    """
    p, n = basis.p, basis.n
    na = rule.n_angular
    what, shift = ring_fourier(rule, weight, p, extended)
    alpha = basis.exponents
    logr = np.log(rule.radial_r)
    rho = (basis.log_precond[None, :] + logr @ alpha.T
           - 0.5 * p * np.log1p(np.sum(rule.radial_r**2, axis=1))[:, None]
           + 0.5 * shift[:, None] + 0.5 * np.log(rule.radial_w)[:, None])
    col = rho.max(axis=0)
    R = np.exp((rho - col[None, :]).astype(np.longdouble if extended else float))
    dim = len(alpha)
    flat = what.reshape(len(rule.radial_w), -1)
    ref = np.abs(flat[:, 0])
    eps = np.finfo(flat.real.dtype).eps
    diff = alpha[:, None, :] - alpha[None, :, :]          # (dim, dim, n)
    code = np.ravel_multi_index(tuple(np.moveaxis(diff % na, -1, 0)), (na,) * n)
    order = np.argsort(code, axis=None, kind="stable")
    codes = code.ravel()[order]
    starts = np.flatnonzero(np.r_[True, codes[1:] != codes[:-1]])
    ends = np.r_[starts[1:], len(codes)]
    G = np.zeros(dim * dim, dtype=flat.dtype)
    for s0, s1 in zip(starts, ends):
        c = codes[s0]
        col_c = flat[:, c]
        if c and not np.any(np.abs(col_c) > 4 * eps * ref):
            continue
        pairs = order[s0:s1]
        j, k = np.divmod(pairs, dim)
        G[pairs] = (R[:, j] * R[:, k]).T @ col_c
    return _equilibrate(G.reshape(dim, dim), col)


def _gram_nodes(basis, weight, rule, dtype=complex):
    """Generic Gram via chunked node sums with compensated accumulation."""
    dim = len(basis)
    logw = 0.5 * np.log(rule.weights)
    col = np.full(dim, -np.inf)
    for start in range(0, len(rule), CHUNK_NODES):
        sl = slice(start, start + CHUNK_NODES)
        lm, _ = eval_log(basis, weight, rule.nodes[sl])
        col = np.maximum(col, (lm + logw[sl, None]).max(axis=0))
    real = np.longdouble if dtype == np.clongdouble else float
    acc = CompensatedMatrixSum((dim, dim), dtype=dtype)
    for start in range(0, len(rule), CHUNK_NODES):
        sl = slice(start, start + CHUNK_NODES)
        lm, ph = eval_log(basis, weight, rule.nodes[sl])
        mag = np.exp((lm + logw[sl, None] - col[None, :]).astype(real))
        V = (mag * np.cos(ph.astype(real)) + 1j * mag * np.sin(ph.astype(real))).astype(dtype)
        acc.add(np.conj(V.T) @ V)
    G = acc.value()
    G, ls = _equilibrate(G, col)
    return G.astype(dtype), ls


def gram(basis: SectionBasis, weight: Weight, rule: QuadratureRule,
         precision: str = "double") -> GramMatrix:
    """Weighted L^2 Gram matrix of the basis (Hermitized, equilibrated)."""
    _check_rule(basis, rule)
    ext = precision == "extended"
    if rule.radial_r is not None:
        G, ls = _gram_torus(basis, weight, rule, extended=ext)
    elif ext:
        G, ls = _gram_nodes(basis, weight, rule, dtype=np.clongdouble)
    else:
        G, ls = _gram_nodes(basis, weight, rule)
    return GramMatrix(G, ls, basis.p, weight.name, precision=precision)


def _to_mp(G):
    n = G.shape[0]
    A = mpmath.matrix(n, n)
    for i in range(n):
        for j in range(n):
            z = G[i, j]
            A[i, j] = mpmath.mpc(mpmath.mpf(str(np.real(z))), mpmath.mpf(str(np.imag(z))))
    return A


def _from_mp(A):
    n = A.rows
    out = np.empty((n, A.cols), dtype=np.clongdouble)
    for i in range(n):
        for j in range(A.cols):
            v = A[i, j]
            out[i, j] = np.longdouble(str(v.real)) + 1j * np.longdouble(str(v.imag))
    return out


def _mp_cholesky_inverse(G, prec_bits):
    """Upper-triangular ``T = R^{-1}`` with ``G = R^H R`` in mpmath arithmetic."""
    with mpmath.workprec(prec_bits):
        n = G.shape[0]
        A = _to_mp(G)
        try:
            L = mpmath.cholesky(A)
        except ValueError as exc:
            raise FactorizationError(f"extended-precision Cholesky failed: {exc}") from None
        # R = L^H, T = R^{-1} = (L^{-1})^H
        Linv = _from_mp(mpmath.inverse(L))
        return np.conj(Linv.T)


def condition_of(G: np.ndarray) -> tuple[float, float]:
    ev = np.linalg.eigvalsh(np.asarray(G, dtype=complex))
    lo, hi = float(ev[0]), float(ev[-1])
    return (hi / lo if lo > 0 else float("inf")), lo


def orthonormalize(G: GramMatrix, threshold: float = CONDITION_THRESHOLD,
                   precision: str = "auto", extra_bits: int = DEFAULT_EXTRA_BITS) -> np.ndarray:
    """Transform ``T`` (in equilibrated variables) with ``T^H Gt T = I``.

    Records the condition estimate on ``G``.  ``precision`` is ``double``
    (raise :class:`PrecisionEscalation` above ``threshold``), ``extended``
    (mpmath Cholesky at ``53 + extra_bits`` bits) or ``auto``.
    """
    cond, lo = condition_of(G.scaled)
    if lo <= 0:
        cond = float("inf")
    G.condition_estimate = cond
    use_ext = precision == "extended" or G.precision == "extended"
    if lo <= 0 and not use_ext and precision == "double":
        raise FactorizationError(
            f"Gram matrix not positive definite (smallest eigenvalue {lo:.3e}); "
            "quadrature under-resolved or precision exhausted", min_eigenvalue=lo)
    if (cond > threshold or lo <= 0) and not use_ext:
        if precision == "double":
            raise PrecisionEscalation(f"Gram condition {cond:.3e} exceeds {threshold:.1e}", cond)
        use_ext = True
    if use_ext:
        return _mp_cholesky_inverse(G.scaled, 53 + extra_bits)
    try:
        L = np.linalg.cholesky(G.scaled)
    except np.linalg.LinAlgError:
        raise FactorizationError("Cholesky failed", min_eigenvalue=lo) from None
    R = np.conj(L.T)
    return sla.solve_triangular(R, np.eye(len(R), dtype=complex), lower=False)


@dataclass
class BergmanEvaluator:
    """Orthonormalized section basis; immutable after construction."""

    basis: SectionBasis
    weight: Weight
    gram: GramMatrix
    transform: np.ndarray    # acts on equilibrated values
    p: int
    rule_size: int = 0
    meta: dict = field(default_factory=dict)
    _solver: object = field(default=None, init=False, repr=False, compare=False)

    @property
    def weight_id(self) -> str:
        return self.weight.name

    @property
    def condition_estimate(self) -> float:
        return self.gram.condition_estimate

    @property
    def extended(self) -> bool:
        return self.transform.dtype == np.clongdouble

    @classmethod
    def build(cls, surface: ModelSurface, weight: Weight, p: int,
              rule: Optional[QuadratureRule] = None, precision: str = "auto",
              threshold: float = CONDITION_THRESHOLD, extra_bits: int = DEFAULT_EXTRA_BITS,
              basis: Optional[SectionBasis] = None) -> "BergmanEvaluator":
        if precision not in ("auto", "double", "extended"):
            raise ParameterError(f"unknown precision policy {precision!r}")
        basis = basis if basis is not None else basis_for(surface, p)
        rule = rule if rule is not None else build_rule(surface, p)
        G = gram(basis, weight, rule, precision="extended" if precision == "extended" else "double")
        try:
            T = orthonormalize(G, threshold, "double" if precision == "auto" else precision, extra_bits)
        except (PrecisionEscalation, FactorizationError) as exc:
            if precision != "auto":
                raise
            logger.info("escalating to extended precision: %s", exc)
            G = gram(basis, weight, rule, precision="extended")
            T = orthonormalize(G, threshold, "extended", extra_bits)
        return cls(basis, weight, G, T, p, len(rule), {"precision": G.precision})

    # -- evaluation -------------------------------------------------------
    def scaled_values(self, z, chart: int = 0) -> np.ndarray:
        """Weighted evaluations divided by the equilibration scale."""
        lm, ph = eval_log(self.basis, self.weight, z, chart)
        lm = lm - self.gram.log_scale[None, :]
        if self.extended:
            mag = np.exp(lm.astype(np.longdouble))
            ph = ph.astype(np.longdouble)
            return mag * np.cos(ph) + 1j * mag * np.sin(ph)
        return np.exp(lm) * np.exp(1j * ph)

    def orthonormal_values(self, z, chart: int = 0) -> np.ndarray:
        """``e_m(z)`` in the unitary chart frame, shape (N, dim)."""
        return self.scaled_values(z, chart) @ self.transform

    def kernel_diagonal(self, z, chart: int = 0) -> np.ndarray:
        e = self.orthonormal_values(z, chart)
        return np.asarray(np.sum(np.abs(e) ** 2, axis=1), dtype=float)

    def _gram_solver(self):
        # LU route, independent of the Cholesky transform
        if self._solver is None:
            if self.extended:
                with mpmath.workprec(53 + DEFAULT_EXTRA_BITS):
                    self._solver = _from_mp(mpmath.inverse(_to_mp(self.gram.scaled)))
            else:
                self._solver = sla.lu_factor(self.gram.scaled)
        return self._solver

    def kernel_diagonal_extremal(self, z, chart: int = 0) -> np.ndarray:
        r"""``sup |s(z)|^2`` over unit sections, as ``v^T G^{-1} conj(v)`` (LU solve)."""
        v = self.scaled_values(z, chart)
        solver = self._gram_solver()
        if self.extended:
            x = solver @ np.conj(v.T)
        else:
            x = sla.lu_solve(solver, np.conj(v.T))
        return np.asarray(np.real(np.einsum("ij,ji->i", v, x)), dtype=float)

    def kernel_offdiag(self, z, zp, chart: int = 0, chart_p: int = 0) -> np.ndarray:
        """``P_p(z, z')`` in the unitary chart frames (phase is frame-dependent)."""
        e = self.orthonormal_values(z, chart)
        ep = self.orthonormal_values(zp, chart_p)
        return np.asarray(np.sum(e * np.conj(ep), axis=1), dtype=complex)

    def kernel_offdiag_modulus(self, z, zp, chart: int = 0, chart_p: int = 0) -> np.ndarray:
        return np.abs(self.kernel_offdiag(z, zp, chart, chart_p))


def _check_weight(ev, weight):
    if weight is not None and weight is not ev.weight and weight.name != ev.weight.name:
        raise ParameterError(f"evaluator built for {ev.weight.name}, not {weight.name}")


def kernel_diagonal(ev: BergmanEvaluator, weight: Optional[Weight], z, chart: int = 0):
    _check_weight(ev, weight)
    return ev.kernel_diagonal(z, chart)


def kernel_diagonal_extremal(ev: BergmanEvaluator, weight: Optional[Weight], z, chart: int = 0):
    _check_weight(ev, weight)
    return ev.kernel_diagonal_extremal(z, chart)


def kernel_offdiag_modulus(ev: BergmanEvaluator, weight: Optional[Weight], z, zp,
                           chart: int = 0, chart_p: int = 0):
    _check_weight(ev, weight)
    return ev.kernel_offdiag_modulus(z, zp, chart, chart_p)


def kernel_on_grid(ev: BergmanEvaluator, grid) -> np.ndarray:
    out = np.empty(len(grid))
    for chart, idx in grid.indices_by_chart():
        out[idx] = ev.kernel_diagonal(grid.coords[idx], chart)
    return out
