"""Sweep execution: one cell per (zeta, p), deterministic row order."""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import __version__
from ..bergman import BergmanEvaluator
from ..errors import BergmanLabError, ParameterError
from ..geometry import (ModelSurface, build_family_weight, curvature_on_grid, default_psi,
                        harmonic_weight, residual_grid, zero_weight)
from ..model import diagonal_residual_field, model_params, near_diagonal_residual
from ..quadrature import build_rule
from ..spectral import filter_build, gap_report, projector_gap_bound
from .config import ExperimentConfig
from .fitting import ScalingFit, fit_power_law, zeta_bound_check
from .output import ResultRow, write_csv, write_json

logger = logging.getLogger(__name__)

THREADS_ENV = "BERGMAN_LAB_THREADS"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INCONCLUSIVE = 0, 2, 3, 4


@dataclass
class SweepResult:
    config: ExperimentConfig
    rows: list
    fits: dict = field(default_factory=dict)       # zeta -> ScalingFit
    zeta_report: object = None
    paths: list = field(default_factory=list)

    @property
    def config_hash(self) -> str:
        return self.config.hash

    @property
    def exit_code(self) -> int:
        if any(r.status == "error" for r in self.rows):
            return EXIT_NUMERICAL
        if any(r.status == "inconclusive" for r in self.rows):
            return EXIT_INCONCLUSIVE
        return EXIT_OK

    def select(self, kind=None, metric=None):
        return [r for r in self.rows if (kind is None or r.kind == kind)
                and (metric is None or r.metric == metric)]


def resolve_weight(cfg: ExperimentConfig, surface: ModelSurface, zeta: Optional[float]):
    w = cfg.weight
    name = w["name"]
    if name == "zero":
        return zero_weight(cfg.n)
    if name == "psi":
        return default_psi(cfg.n)
    if name == "harmonic":
        return harmonic_weight(cfg.n, float(w.get("amplitude", 0.1)))
    return build_family_weight(surface, zeta, default_psi(cfg.n))


def _parse_point(x0, n):
    pts = []
    for v in x0:
        if isinstance(v, (list, tuple)):
            pts.append(complex(v[0], v[1]))
        else:
            pts.append(complex(str(v).replace(" ", "")) if isinstance(v, str) else complex(v))
    if len(pts) != n:
        raise ParameterError(f"x0 needs {n} coordinates, got {len(pts)}")
    return np.array(pts)


class _Context:
    """Objects shared read-only between cells."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.surface = ModelSurface(cfg.n)
        self._grid = None
        self._weights = {}

    @property
    def grid(self):
        if self._grid is None:
            self._grid = residual_grid(self.surface, int(self.cfg.grid["n_radial"]),
                                       int(self.cfg.grid["n_angular"]))
        return self._grid

    def weight(self, zeta):
        if zeta not in self._weights:
            self._weights[zeta] = resolve_weight(self.cfg, self.surface, zeta)
        return self._weights[zeta]

    def zeta_floor(self, weight, zeta):
        if zeta is not None:
            return zeta
        if weight.is_zero:
            return 1.0
        return float(np.min(curvature_on_grid(self.surface, weight, self.grid).zeta_local))

    def evaluator(self, weight, p):
        q = self.cfg.quadrature
        rule = build_rule(self.surface, p, n_radial=q.get("n_radial") or None,
                          n_angular=q.get("n_angular") or None)
        return BergmanEvaluator.build(self.surface, weight, p, rule=rule,
                                      precision=self.cfg.precision)


def _cell(ctx: _Context, kind: str, zeta, p) -> list:
    cfg = ctx.cfg
    t0 = time.perf_counter()
    weight = ctx.weight(zeta)
    zf = ctx.zeta_floor(weight, zeta)
    base = dict(kind=kind, weight=weight.name, n=cfg.n, p=p, zeta=zf)
    if kind == "diagonal":
        ev = ctx.evaluator(weight, p)
        res = diagonal_residual_field(ev, weight, ctx.grid, ctx.surface)
        i = res.argmax
        row = ResultRow(metric="sup_residual", value=res.sup, cond_estimate=ev.condition_estimate,
                        quad_nodes=ev.rule_size,
                        extra={"argmax_chart": int(ctx.grid.charts[i]),
                               "argmax_point": ctx.grid.coords[i].tolist(),
                               "precision": ev.gram.precision, "grid_points": len(ctx.grid)},
                        **base)
    elif kind == "near-diagonal":
        x0 = _parse_point(cfg.options["x0"], cfg.n)
        ev = ctx.evaluator(weight, p)
        params = model_params(ctx.surface, weight, x0)
        res = near_diagonal_residual(ev, params, p, sigma=float(cfg.options["sigma"]))
        row = ResultRow(metric="near_diag_residual", value=res.sup,
                        cond_estimate=ev.condition_estimate, quad_nodes=ev.rule_size,
                        extra={"a": params.a.tolist(), "x0": x0.tolist(), "points": len(res.Z)},
                        **base)
    elif kind == "spectrum":
        d = cfg.options.get("d")
        rep = gap_report(ctx.surface, weight, p, d=d, zeta=zf)
        row = ResultRow(metric="gap", value=rep.gap, status="ok" if rep.converged else "inconclusive",
                        detail="" if rep.converged else "gap moved > 1% on the last d refinement",
                        extra={"ratio": rep.ratio, "bound": rep.bound, "kernel_dim": rep.kernel_dim,
                               "d": rep.d, "ladder": rep.ladder, "matrix_size": rep.matrix_size},
                        **base)
    else:
        raise ParameterError(f"no cell handler for {kind}")
    row.wall_time = time.perf_counter() - t0
    return [row]


def _safe_cell(ctx, kind, zeta, p):
    try:
        return _cell(ctx, kind, zeta, p)
    except (BergmanLabError, FloatingPointError, np.linalg.LinAlgError) as exc:
        logger.error("cell kind=%s p=%s zeta=%s failed: %s", kind, p, zeta, exc)
        return [ResultRow(kind=kind, weight=ctx.cfg.weight["name"], n=ctx.cfg.n, p=p, zeta=zeta,
                          metric="error", value=None, status="error",
                          detail=f"{type(exc).__name__}: {exc} (p={p}, zeta={zeta})")]


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def _fit_rows(ctx, rows, zeta, kind="diagonal"):
    pairs = [(r.p, r.value) for r in rows if r.kind == kind and r.status == "ok"
             and (r.zeta == zeta or zeta is None)]
    name = rows[0].weight if rows else ctx.cfg.weight["name"]
    zf = rows[0].zeta if rows else zeta
    out = []
    try:
        fit = fit_power_law(pairs, zeta=zf)
    except ParameterError as exc:
        out.append(ResultRow(kind="fit", weight=name, n=ctx.cfg.n, p=None, zeta=zf, metric="alpha",
                             value=None, status="skipped", detail=str(exc)))
        return None, out
    detail = "; ".join(f"excluded p={int(p)} ({why})" for p, _, why in fit.excluded)
    out.append(ResultRow(kind="fit", weight=name, n=ctx.cfg.n, p=None, zeta=zf, metric="alpha",
                         value=fit.alpha, detail=detail,
                         extra={"C": fit.C, "r2": fit.r2, "residual_band": fit.residual_band,
                                "used_p": [int(p) for p, _ in fit.used]}))
    return fit, out


def _filter_rows(ctx):
    cfg = ctx.cfg
    eps0 = float(cfg.options["eps0"])
    zetas = [z for z in cfg.zetas if z is not None] or [1.0]
    rows = []
    for z in zetas:
        t0 = time.perf_counter()
        prof = filter_build(eps0, z)
        rows.append(ResultRow(kind="filter", weight=f"bump(eps0={eps0:g})", n=cfg.n, p=None, zeta=z,
                              metric="F0", value=float(prof.values[0]),
                              extra={"moments": {str(k): v for k, v in prof.moments.items()},
                                     "cap": prof.cap, "imag_max": prof.imag_max,
                                     "route_gap": prof.route_gap},
                              wall_time=time.perf_counter() - t0))
        for p in cfg.p:
            try:
                val, status, detail = projector_gap_bound(prof, p), "ok", ""
            except ParameterError as exc:
                val, status, detail = None, "error", str(exc)
            rows.append(ResultRow(kind="filter", weight=f"bump(eps0={eps0:g})", n=cfg.n, p=p, zeta=z,
                                  metric="projector_bound", value=val, status=status, detail=detail,
                                  extra={"threshold": float(np.sqrt(z * p))}))
    return rows


def resolve_threads(flag: Optional[int], cfg: Optional[ExperimentConfig] = None) -> int:
    if flag:
        return int(flag)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return cfg.threads if cfg is not None else 1


def run(cfg: ExperimentConfig, threads: Optional[int] = None, write: bool = False) -> SweepResult:
    """Execute ``cfg``; rows come back in (zeta, p) order regardless of threads."""
    threads = resolve_threads(threads, cfg)
    ctx = _Context(cfg)
    result = SweepResult(cfg, [])
    try:
        if cfg.kind == "filter":
            result.rows = _filter_rows(ctx)
        else:
            cell_kind = "diagonal" if cfg.kind == "zeta-sweep" else cfg.kind
            for z in cfg.zetas:        # weights are built serially (certification, caches)
                ctx.weight(z)
            ctx.grid
            items = [(ctx, cell_kind, z, p) for z in cfg.zetas for p in cfg.p]
            for rows in _map(_safe_cell, items, threads):
                result.rows.extend(rows)
            if cfg.kind in ("diagonal", "zeta-sweep"):
                for z in cfg.zetas:
                    sub = [r for r in result.rows if r.kind == "diagonal"
                           and (z is None or ctx.weight(z).name == r.weight)]
                    if len(sub) >= 3:
                        fit, rows = _fit_rows(ctx, sub, None)
                        result.rows.extend(rows)
                        if fit is not None:
                            result.fits[z] = fit
            if cfg.kind == "zeta-sweep":
                result.rows.extend(_zeta_rows(ctx, result))
    except BaseException:
        if write:
            _write(cfg, result, partial=True)
        raise
    if write:
        _write(cfg, result)
    return result


def _zeta_rows(ctx, result):
    cfg = ctx.cfg
    k = cfg.options.get("norm_order") or cfg.n + 5
    norms = {}
    rows = []
    for z in cfg.zetas:
        w = ctx.weight(z)
        norms[z] = w.norm_report(k)
        rows.append(ResultRow(kind="norm", weight=w.name, n=cfg.n, p=None, zeta=z,
                              metric=f"dphi_norm_{k}", value=norms[z]))
    try:
        rep = zeta_bound_check(result.fits, norms, cfg.n)
    except ParameterError as exc:
        rows.append(ResultRow(kind="zeta_bound", weight=cfg.weight["name"], n=cfg.n, p=None,
                              zeta=None, metric="holds", value=None, status="error", detail=str(exc)))
        return rows
    result.zeta_report = rep
    for r in rep.rows:
        rows.append(ResultRow(kind="zeta_bound", weight=cfg.weight["name"], n=cfg.n, p=None,
                              zeta=r.zeta, metric="C", value=r.C,
                              status="ok" if r.holds else "violated",
                              extra={"envelope": r.envelope, "norm": r.norm, "holds": r.holds}))
    rows.append(ResultRow(kind="zeta_bound", weight=cfg.weight["name"], n=cfg.n, p=None, zeta=None,
                          metric="empirical_exponent", value=rep.empirical_exponent,
                          extra={"envelope_exponent": rep.envelope_exponent,
                                 "norm_exponent": rep.norm_exponent, "c": rep.c,
                                 "all_hold": rep.all_hold}))
    return rows


def _write(cfg, result, partial=False):
    out = Path(cfg.output.get("dir", "results"))
    stem = f"{cfg.kind}_{cfg.hash}" + ("_partial" if partial else "")
    result.paths.append(write_csv(out / f"{stem}.csv", result.rows, cfg.hash, __version__))
    if cfg.output.get("json"):
        result.paths.append(write_json(out / f"{stem}.json", result.rows, cfg.to_dict(),
                                       cfg.hash, __version__))
