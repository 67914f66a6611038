r"""Model manifold, Fubini-Study reference data, weights and curvature.

Conventions
-----------
The manifold is :math:`\mathbb{CP}^n` (``n`` in {1, 2}) covered by the
standard affine charts ``chart = 0..n``; chart ``c`` uses the coordinates
:math:`w_j = Z_j / Z_c` (``j != c``).  In every chart the reference metric on
:math:`\mathcal{O}(1)` is :math:`|\sigma|^2_{h_0} = e^{-2\varphi_0}` with
:math:`\varphi_0(w) = \tfrac12\log(1+|w|^2)`.

With :math:`d^c = \frac{\sqrt{-1}}{2\pi}(\bar\partial-\partial)` one has
:math:`dd^c u = \frac{\sqrt{-1}}{\pi}\partial\bar\partial u`, so the chart
matrix of a (1,1)-form :math:`dd^c u` is :math:`\frac{1}{\pi}
\big(\partial^2 u/\partial z_j\partial\bar z_k\big)`.  This normalization
gives :math:`\int_{\mathbb{CP}^1}\omega_0 = 1`.  The Kahler form is fixed to
:math:`\theta=\omega_0`; the Riemannian metric :math:`g=\theta(\cdot,J\cdot)`
has Hermitian chart matrix ``2 * theta_matrix`` and the volume form
:math:`\theta^n/n!` has Lebesgue density ``det(2 * theta_matrix)``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import sympy as sp

from .errors import EvaluationError, ParameterError, PositivityError

__all__ = [
    "ModelSurface",
    "Weight",
    "CurvatureSample",
    "CurvatureField",
    "TaylorJet",
    "GridPoints",
    "as_points",
    "to_homogeneous",
    "change_chart",
    "curvature_at",
    "curvature_field",
    "build_family_weight",
    "certify_semipositive",
    "taylor_jet",
    "remainder_check",
    "fd_complex_hessian",
    "zero_weight",
    "default_psi",
    "harmonic_weight",
    "residual_grid",
    "certification_grid",
    "curvature_on_grid",
]

FD_STEP = 1e-4
MAX_JET_RADIUS = 0.5
CHART_SAFE_ABS = 4.0


def as_points(z, n: int) -> np.ndarray:
    """Coerce chart coordinates to a complex array of shape (N, n)."""
    arr = np.asarray(z, dtype=complex)
    if n == 1:
        return arr.reshape(-1, 1)
    if arr.shape[-1] != n:
        raise ParameterError(f"expected trailing dimension {n}, got shape {arr.shape}")
    return arr.reshape(-1, n)


def to_homogeneous(z: np.ndarray, chart: int) -> np.ndarray:
    """Homogeneous representatives (N, n+1) with ``Z[chart] = 1``."""
    z = np.asarray(z, dtype=complex)
    return np.insert(z, chart, 1.0, axis=1)


def change_chart(z: np.ndarray, src: int, dst: int) -> np.ndarray:
    """Map (N, n) coordinates from chart ``src`` to chart ``dst``."""
    if src == dst:
        return np.asarray(z, dtype=complex)
    Z = to_homogeneous(z, src)
    denom = Z[:, dst : dst + 1]
    if np.any(denom == 0):
        raise EvaluationError(f"point outside chart {dst}")
    return np.delete(Z / denom, dst, axis=1)


@dataclass(frozen=True)
class ModelSurface:
    """The projective line or plane with its Fubini-Study data."""

    n: int = 1

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ParameterError("only CP^1 and CP^2 are supported")

    @property
    def n_charts(self) -> int:
        return self.n + 1

    @property
    def volume(self) -> float:
        """Total mass of theta^n / n! (1 on CP^1, 1/2 on CP^2)."""
        return 1.0 / math.factorial(self.n)

    def fs_potential(self, z) -> np.ndarray:
        z = as_points(z, self.n)
        return 0.5 * np.log1p(np.sum(np.abs(z) ** 2, axis=1))

    def fs_hessian(self, z) -> np.ndarray:
        """Complex Hessian of the FS potential, shape (N, n, n)."""
        z = as_points(z, self.n)
        s = 1.0 + np.sum(np.abs(z) ** 2, axis=1)
        eye = np.eye(self.n)[None]
        outer = np.conj(z)[:, :, None] * z[:, None, :]
        return 0.5 * (s[:, None, None] * eye - outer) / (s**2)[:, None, None]

    def theta_matrix(self, z) -> np.ndarray:
        return self.fs_hessian(z) / np.pi

    def metric_matrix(self, z) -> np.ndarray:
        """Hermitian chart matrix of the Riemannian metric theta(., J.)."""
        return 2.0 * self.theta_matrix(z)

    def volume_density(self, z) -> np.ndarray:
        """Density of theta^n/n! against Lebesgue measure on the chart."""
        return np.real(np.linalg.det(self.metric_matrix(z)))


# ---------------------------------------------------------------------------
# weights


def _chart_symbols(n):
    xs = sp.symbols(f"x1:{n + 1}", real=True)
    ys = sp.symbols(f"y1:{n + 1}", real=True)
    return xs, ys


def _homogeneous_symbols(n, chart, xs, ys):
    Z, k = [], 0
    for i in range(n + 1):
        if i == chart:
            Z.append(sp.Integer(1))
        else:
            Z.append(xs[k] + sp.I * ys[k])
            k += 1
    return Z


def _abs2(w):
    return sp.expand(w * sp.conjugate(w))


def _lambdify(args, expr):
    f = sp.lambdify(args, expr, modules="numpy", cse=True)

    def call(*vals):
        out = f(*vals)
        return np.broadcast_to(np.asarray(out), np.shape(vals[0])).astype(
            complex if np.iscomplexobj(out) else float
        )

    return call


class _SymbolicChart:
    """Lambdified closures of one weight expression in one chart."""

    def __init__(self, expr, xs, ys):
        self.expr = expr
        self.xs, self.ys = xs, ys
        self.args = list(xs) + list(ys)
        self._cache = {(): expr}
        self._funcs = {}

    def derivative(self, key):
        key = tuple(sorted(key))
        if key not in self._cache:
            parent = self.derivative(key[:-1])
            self._cache[key] = sp.diff(parent, self.args[key[-1]])
        return self._cache[key]

    def func(self, key):
        key = tuple(sorted(key))
        if key not in self._funcs:
            self._funcs[key] = _lambdify(self.args, self.derivative(key))
        return self._funcs[key]

    def evaluate(self, key, z):
        vals = [z[:, j].real for j in range(z.shape[1])] + [z[:, j].imag for j in range(z.shape[1])]
        return self.func(key)(*vals)


@dataclass(eq=False)
class Weight:
    r"""A real potential :math:`\phi` with :math:`h = e^{-2\phi}h_0`.

    Either backed by a symbolic expression in homogeneous coordinates (analytic
    derivatives in every chart) or by a plain callable on chart 0 (finite
    difference derivatives).  ``scale`` multiplies the underlying potential.
    """

    name: str
    n: int
    builder: Optional[Callable] = None
    func: Optional[Callable] = None
    scale: float = 1.0
    family_param: Optional[float] = None
    rotation_invariant: bool = False
    params: dict = field(default_factory=dict)
    base: Optional["Weight"] = None

    def __post_init__(self):
        if (self.builder is None) == (self.func is None) and self.base is None:
            raise ParameterError("a weight needs exactly one of builder/func")
        self._charts = {}
        self._norm_cache = {}

    # -- construction helpers -------------------------------------------
    def scaled(self, factor: float, name: Optional[str] = None, **kw) -> "Weight":
        root = self.base if self.base is not None else self
        return Weight(
            name=name or f"{factor:g}*{self.name}",
            n=self.n,
            builder=root.builder,
            func=root.func,
            scale=self.scale * factor,
            rotation_invariant=self.rotation_invariant,
            params=dict(self.params),
            base=root,
            **kw,
        )

    @property
    def root(self) -> "Weight":
        return self.base if self.base is not None else self

    @property
    def analytic(self) -> bool:
        return self.root.builder is not None

    @property
    def is_zero(self) -> bool:
        return self.scale == 0.0 or self.root.params.get("identically_zero", False)

    def _chart(self, chart):
        root = self.root
        if chart not in root._charts:
            xs, ys = _chart_symbols(self.n)
            expr = sp.sympify(root.builder(_homogeneous_symbols(self.n, chart, xs, ys)))
            root._charts[chart] = _SymbolicChart(expr, xs, ys)
        return root._charts[chart]

    # -- evaluation -------------------------------------------------------
    def _fd_func(self, z, chart):
        z0 = change_chart(z, chart, 0) if chart != 0 else z
        return np.asarray(self.root.func(z0), dtype=float).reshape(-1)

    def phi(self, z, chart: int = 0) -> np.ndarray:
        z = as_points(z, self.n)
        if self.is_zero:
            return np.zeros(len(z))
        if self.analytic:
            out = self._chart(chart).evaluate((), z).real
        else:
            out = self._fd_func(z, chart)
        out = self.scale * out
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"weight {self.name} non-finite at chart {chart}")
        return out

    def _real_second(self, z, chart):
        """Real Hessian in (x_1..x_n, y_1..y_n), shape (N, 2n, 2n)."""
        m = 2 * self.n
        H = np.empty((len(z), m, m))
        if self.analytic:
            ch = self._chart(chart)
            for a in range(m):
                for b in range(a, m):
                    H[:, a, b] = H[:, b, a] = ch.evaluate((a, b), z).real
            return self.scale * H
        return self.scale * _fd_real_hessian(lambda q: self._fd_func(q, chart), z)

    def d_phi(self, z, chart: int = 0) -> np.ndarray:
        r"""Holomorphic gradient :math:`\partial\phi/\partial z_j`, shape (N, n)."""
        z = as_points(z, self.n)
        n = self.n
        if self.is_zero:
            return np.zeros((len(z), n), dtype=complex)
        if self.analytic:
            ch = self._chart(chart)
            gx = np.stack([ch.evaluate((j,), z).real for j in range(n)], axis=1)
            gy = np.stack([ch.evaluate((n + j,), z).real for j in range(n)], axis=1)
        else:
            g = _fd_real_gradient(lambda q: self._fd_func(q, chart), z)
            gx, gy = g[:, :n], g[:, n:]
        return self.scale * 0.5 * (gx - 1j * gy)

    def hessian(self, z, chart: int = 0) -> np.ndarray:
        r"""Complex Hessian :math:`\partial^2\phi/\partial z_j\partial\bar z_k`."""
        z = as_points(z, self.n)
        n = self.n
        if self.is_zero:
            return np.zeros((len(z), n, n), dtype=complex)
        H = self._real_second(z, chart)
        xx, yy = H[:, :n, :n], H[:, n:, n:]
        xy = H[:, :n, n:]
        out = 0.25 * (xx + yy + 1j * (xy - np.swapaxes(xy, 1, 2)))
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"non-finite Hessian for weight {self.name}")
        return out

    def holomorphic_hessian(self, z, chart: int = 0) -> np.ndarray:
        r""":math:`\partial^2\phi/\partial z_j\partial z_k`, shape (N, n, n)."""
        z = as_points(z, self.n)
        n = self.n
        if self.is_zero:
            return np.zeros((len(z), n, n), dtype=complex)
        H = self._real_second(z, chart)
        xx, yy = H[:, :n, :n], H[:, n:, n:]
        xy = H[:, :n, n:]
        return 0.25 * (xx - yy - 1j * (xy + np.swapaxes(xy, 1, 2)))

    # -- norms --------------------------------------------------------------
    def derivative_sup_norm(self, k: int, grid: Optional["GridPoints"] = None) -> float:
        r"""Grid sup of all real partials of :math:`\phi` of orders 1..k+1.

        This is the chart-based :math:`\|d\phi\|_{C^k}`; the package's
        :math:`|d\phi|_k` is ``1 +`` this value (see :meth:`norm_report`).
        """
        if self.is_zero:
            return 0.0
        root = self.root
        key = (k, None if grid is None else id(grid))
        if key not in root._norm_cache:
            if not self.analytic and k > 1:
                raise ParameterError("finite-difference weights support norms up to k=1 only")
            g = grid if grid is not None else residual_grid(ModelSurface(self.n), *_NORM_GRID[self.n])
            m = 2 * self.n
            best = 0.0
            for chart, z in g.by_chart():
                if self.analytic:
                    ch = root._chart(chart)
                    for order in range(1, k + 2):
                        for combo in itertools.combinations_with_replacement(range(m), order):
                            best = max(best, float(np.max(np.abs(ch.evaluate(combo, z)))))
                else:
                    unit = root.scaled(1.0)
                    grad = _fd_real_gradient(lambda q: unit._fd_func(q, chart), z)
                    best = max(best, float(np.max(np.abs(grad))))
                    if k >= 1:
                        best = max(best, float(np.max(np.abs(unit._real_second(z, chart)))))
            root._norm_cache[key] = best
        return abs(self.scale) * root._norm_cache[key]

    def norm_report(self, k: int, grid: Optional["GridPoints"] = None) -> float:
        r"""Measured :math:`|d\phi|_k = 1 + \|d\phi\|_{C^k}`."""
        return 1.0 + self.derivative_sup_norm(k, grid)

    def __repr__(self):
        return f"Weight({self.name!r}, n={self.n})"


_NORM_GRID = {1: (24, 24), 2: (5, 6)}


def _fd_real_gradient(f, z, h=FD_STEP):
    n = z.shape[1]
    out = np.empty((len(z), 2 * n))
    for a in range(2 * n):
        e = np.zeros(n, dtype=complex)
        e[a % n] = 1.0 if a < n else 1j

        def d(step):
            return (f(z + step * e) - f(z - step * e)) / (2 * step)

        out[:, a] = (4 * d(h / 2) - d(h)) / 3
    return out


def _fd_real_hessian(f, z, h=FD_STEP):
    """Central-difference real Hessian with one Richardson extrapolation."""
    n = z.shape[1]
    m = 2 * n
    units = []
    for a in range(m):
        e = np.zeros(n, dtype=complex)
        e[a % n] = 1.0 if a < n else 1j
        units.append(e)

    def H(step):
        out = np.empty((len(z), m, m))
        f0 = f(z)
        for a in range(m):
            ea = units[a] * step
            out[:, a, a] = (f(z + ea) - 2 * f0 + f(z - ea)) / step**2
            for b in range(a + 1, m):
                eb = units[b] * step
                val = (f(z + ea + eb) - f(z + ea - eb) - f(z - ea + eb) + f(z - ea - eb)) / (4 * step**2)
                out[:, a, b] = out[:, b, a] = val
        return out

    return (4 * H(h / 2) - H(h)) / 3


def fd_complex_hessian(func: Callable, z, n: int = 1, h: float = FD_STEP) -> np.ndarray:
    """Finite-difference complex Hessian of a real function on chart 0.

    Independent of :class:`Weight`; used as an oracle and as the fallback for
    callable weights.
    """
    z = as_points(z, n)
    H = _fd_real_hessian(lambda q: np.asarray(func(q), dtype=float).reshape(-1), z, h)
    xx, yy, xy = H[:, :n, :n], H[:, n:, n:], H[:, :n, n:]
    return 0.25 * (xx + yy + 1j * (xy - np.swapaxes(xy, 1, 2)))


# -- shipped weights -------------------------------------------------------


def _zero_builder(Z):
    return sp.Integer(0)


def _psi_builder(Z):
    total = sum(_abs2(w) for w in Z)
    return -sp.Rational(1, 2) * sum(_abs2(w) for w in Z[1:]) / total


def zero_weight(n: int = 1) -> Weight:
    return Weight("zero", n, builder=_zero_builder, rotation_invariant=True,
                  params={"identically_zero": True})


def default_psi(n: int = 1) -> Weight:
    r"""Degenerate potential :math:`\psi = -\tfrac12 |z|^2/(1+|z|^2)`.

    In homogeneous form :math:`-\tfrac12\sum_{j\ge1}|Z_j|^2/|Z|^2`, smooth on
    :math:`\mathbb{CP}^n`.  Against :math:`\theta` the curvature
    :math:`dd^c\psi+\omega_0` has eigenvalues ``u`` and ``2u`` (``n=2``) or
    ``2u`` (``n=1``) with ``u = |z|^2/(1+|z|^2)``: semi-positive and vanishing
    only at ``z = 0``.
    """
    return Weight("psi", n, builder=_psi_builder, rotation_invariant=True)


def harmonic_weight(n: int = 1, amplitude: float = 0.1) -> Weight:
    r"""Non-radial weight ``amplitude * 2 Re(Z_1 conj(Z_0)) / |Z|^2``.

    On CP^1 this is ``amplitude`` times the first sphere coordinate, so
    :math:`\omega/\theta = 1 - 4\,\mathrm{amplitude}\,X_1`; positive for
    ``|amplitude| < 1/4``.
    """
    a = sp.nsimplify(amplitude)

    def builder(Z):
        total = sum(_abs2(w) for w in Z)
        return a * 2 * sp.re(sp.expand(Z[1] * sp.conjugate(Z[0]))) / total

    return Weight(f"harmonic({amplitude:g})", n, builder=builder,
                  params={"amplitude": amplitude})


# ---------------------------------------------------------------------------
# curvature


@dataclass(frozen=True)
class CurvatureSample:
    point: np.ndarray
    omega_matrix: np.ndarray
    theta_matrix: np.ndarray
    zeta_local: float
    volume_ratio: float
    chart: int = 0


@dataclass(frozen=True)
class CurvatureField:
    """Vectorized curvature data on a point set."""

    zeta_local: np.ndarray
    volume_ratio: np.ndarray
    eigenvalues: np.ndarray  # (N, n) generalized eigenvalues, ascending


def _generalized_eigs(omega, theta):
    L = np.linalg.cholesky(theta)
    Linv = np.linalg.inv(L)
    C = Linv @ omega @ np.conj(np.swapaxes(Linv, 1, 2))
    C = 0.5 * (C + np.conj(np.swapaxes(C, 1, 2)))
    return np.linalg.eigvalsh(C)


def _curvature_mats(surface, weight, z, chart):
    theta = surface.theta_matrix(z)
    omega = theta + weight.hessian(z, chart) / np.pi
    if not np.all(np.isfinite(omega)):
        raise EvaluationError("non-finite curvature matrix")
    if np.any(np.linalg.eigvalsh(theta)[:, 0] <= 0):
        raise RuntimeError("reference metric is not positive definite")
    return omega, theta


def curvature_field(surface: ModelSurface, weight: Weight, z, chart: int = 0) -> CurvatureField:
    z = as_points(z, surface.n)
    omega, theta = _curvature_mats(surface, weight, z, chart)
    eig = _generalized_eigs(omega, theta)
    ratio = np.real(np.linalg.det(omega)) / np.real(np.linalg.det(theta))
    return CurvatureField(eig[:, 0], ratio, eig)


def curvature_at(surface: ModelSurface, weight: Weight, z, chart: int = 0) -> CurvatureSample:
    """Curvature of ``h = e^{-2 phi} h_0`` at one chart point."""
    z = as_points(z, surface.n)
    if len(z) != 1:
        raise ParameterError("curvature_at takes a single point; use curvature_field")
    omega, theta = _curvature_mats(surface, weight, z, chart)
    eig = _generalized_eigs(omega, theta)
    ratio = float(np.real(np.linalg.det(omega[0])) / np.real(np.linalg.det(theta[0])))
    return CurvatureSample(z[0], omega[0], theta[0], float(eig[0, 0]), ratio, chart)


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridPoints:
    """Points on CP^n, each stored in the chart it was generated in."""

    charts: np.ndarray
    coords: np.ndarray

    def __len__(self):
        return len(self.charts)

    def by_chart(self):
        for c in np.unique(self.charts):
            yield int(c), self.coords[self.charts == c]

    def indices_by_chart(self):
        for c in np.unique(self.charts):
            yield int(c), np.nonzero(self.charts == c)[0]


def _canonical_key(Z, digits=10):
    idx = int(np.argmax(np.abs(Z) - 1e-12 * np.arange(len(Z))))
    W = Z / Z[idx]
    W = np.where(np.abs(W) < 10.0 ** (-digits), 0, W)
    return tuple(np.round(np.concatenate([W.real, W.imag]), digits) + 0.0)


def residual_grid(surface: ModelSurface, n_radial: int = 48, n_angular: int = 48) -> GridPoints:
    """Polar grids on the unit polydisc of every chart, deduplicated.

    Each complex coordinate takes ``n_radial`` radii in [0, 1] times
    ``n_angular`` angles; points shared between charts (or repeated at the
    origin) are kept once, in the lowest chart index.
    """
    n = surface.n
    radii = np.linspace(0.0, 1.0, n_radial)
    angles = 2 * np.pi * np.arange(n_angular) / n_angular
    disc = (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()
    seen, charts, coords = set(), [], []
    for chart in range(n + 1):
        for w in itertools.product(disc, repeat=n):
            w = np.array(w)
            key = _canonical_key(to_homogeneous(w[None], chart)[0])
            if key in seen:
                continue
            seen.add(key)
            charts.append(chart)
            coords.append(w)
    return GridPoints(np.array(charts), np.array(coords, dtype=complex).reshape(-1, n))


def certification_grid(surface: ModelSurface) -> GridPoints:
    """At least 10^4 points on CP^1 (fewer per coordinate on CP^2)."""
    if surface.n == 1:
        return residual_grid(surface, 80, 72)
    return residual_grid(surface, 10, 12)


def curvature_on_grid(surface: ModelSurface, weight: Weight, grid: GridPoints) -> CurvatureField:
    zl = np.empty(len(grid))
    vr = np.empty(len(grid))
    ev = np.empty((len(grid), surface.n))
    for chart, idx in grid.indices_by_chart():
        f = curvature_field(surface, weight, grid.coords[idx], chart)
        zl[idx], vr[idx], ev[idx] = f.zeta_local, f.volume_ratio, f.eigenvalues
    return CurvatureField(zl, vr, ev)


# ---------------------------------------------------------------------------
# degenerate family


def certify_semipositive(surface: ModelSurface, psi: Weight, tol: float = 1e-9,
                         grid: Optional[GridPoints] = None) -> float:
    """Check ``dd^c psi + omega_0 >= 0`` on a grid; return the grid minimum."""
    grid = grid if grid is not None else certification_grid(surface)
    field_ = curvature_on_grid(surface, psi, grid)
    i = int(np.argmin(field_.zeta_local))
    worst = float(field_.zeta_local[i])
    if worst < -tol:
        raise PositivityError(
            f"{psi.name} is not omega_0-psh: generalized eigenvalue {worst:.3e} "
            f"at chart {grid.charts[i]} point {grid.coords[i]}",
            worst_point=(int(grid.charts[i]), grid.coords[i]),
            worst_value=worst,
        )
    if worst > 1e-6:
        warnings.warn(f"{psi.name} is strictly positive on the grid (floor {worst:.3e}); "
                      "the family will not be sharp", stacklevel=2)
    return worst


def build_family_weight(surface: ModelSurface, zeta: float, psi: Optional[Weight] = None) -> Weight:
    r"""Return :math:`\phi_\zeta = (1-\zeta)\psi` with curvature floor :math:`\ge\zeta`.

    ``(1-zeta)(dd^c psi + omega_0) + zeta*omega_0 >= zeta*theta`` whenever
    ``psi`` is semi-positive, which is certified on the grid first.
    """
    if not (0.0 < zeta <= 1.0):
        raise ParameterError(f"zeta must lie in (0, 1], got {zeta}")
    psi = psi if psi is not None else default_psi(surface.n)
    certify_semipositive(surface, psi)
    return psi.scaled(
        1.0 - zeta,
        name=f"family(zeta={zeta:g},psi={psi.name})",
        family_param=zeta,
    )


# ---------------------------------------------------------------------------
# Taylor jets


@dataclass(frozen=True)
class TaylorJet:
    """Second-order jet of a weight at ``base_point`` (chart coordinates)."""

    base_point: np.ndarray
    value: float
    jet1: np.ndarray          # d phi / d z_j
    jet2_holomorphic: np.ndarray  # d^2 phi / d z_j d z_k
    jet2_mixed: np.ndarray    # d^2 phi / d z_j d conj(z_k)
    chart: int = 0

    def linear(self, Z) -> np.ndarray:
        Z = as_points(Z, len(self.jet1))
        return 2.0 * np.real(Z @ self.jet1)

    def quadratic(self, Z) -> np.ndarray:
        Z = as_points(Z, len(self.jet1))
        hol = np.einsum("ij,jk,ik->i", Z, self.jet2_holomorphic, Z)
        mixed = np.einsum("ij,jk,ik->i", Z, self.jet2_mixed, np.conj(Z))
        return np.real(hol + mixed)

    def __call__(self, Z) -> np.ndarray:
        return self.value + self.linear(Z) + self.quadratic(Z)


def taylor_jet(weight: Weight, x0, chart: int = 0) -> TaylorJet:
    x = as_points(x0, weight.n)
    if len(x) != 1:
        raise ParameterError("taylor_jet takes a single base point")
    return TaylorJet(
        base_point=x[0],
        value=float(weight.phi(x, chart)[0]),
        jet1=weight.d_phi(x, chart)[0],
        jet2_holomorphic=weight.holomorphic_hessian(x, chart)[0],
        jet2_mixed=weight.hessian(x, chart)[0],
        chart=chart,
    )


def remainder_check(weight: Weight, x0, radius: float, chart: int = 0,
                    n_shells: int = 20, n_directions: int = 64) -> float:
    """Sup over sampled ``0 < |Z| <= radius`` of ``|phi - jet| / |Z|^3``.

    Samples ``n_shells`` radii in ``[radius/20, radius]`` and fixed unit
    directions (a uniform angle set for n=1, a seeded sample on the sphere
    for n=2).
    """
    n = weight.n
    x = as_points(x0, n)[0]
    if not (0.0 < radius <= MAX_JET_RADIUS) or np.linalg.norm(x) + radius > CHART_SAFE_ABS:
        raise ParameterError(
            f"radius {radius} outside the chart safety margin "
            f"(0 < radius <= {MAX_JET_RADIUS}, |x0| + radius <= {CHART_SAFE_ABS})")
    jet = taylor_jet(weight, x, chart)
    if n == 1:
        dirs = np.exp(2j * np.pi * np.arange(n_directions) / n_directions)[:, None]
    else:
        rng = np.random.default_rng(0)
        g = rng.standard_normal((n_directions, n)) + 1j * rng.standard_normal((n_directions, n))
        dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    radii = radius * np.linspace(0.05, 1.0, n_shells)
    Z = (radii[:, None, None] * dirs[None]).reshape(-1, n)
    diff = weight.phi(x[None] + Z, chart) - jet(Z)
    return float(np.max(np.abs(diff) / np.linalg.norm(Z, axis=1) ** 3))
