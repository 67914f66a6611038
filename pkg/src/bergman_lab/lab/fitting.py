"""Power-law fits of residual sweeps and the zeta-envelope check."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ..errors import ParameterError

logger = logging.getLogger(__name__)

MIN_ZETA_P = 16.0


@dataclass(frozen=True)
class ScalingFit:
    """``E_p ~ C p^{-alpha}`` from least squares on ``(log p, log E_p)``."""

    C: float
    alpha: float
    r2: float
    residual_band: float          # max |log E - fitted log E|
    used: tuple = ()              # (p, E) pairs entering the fit
    excluded: tuple = ()          # (p, E, reason)

    def predict(self, p):
        return self.C * np.asarray(p, dtype=float) ** (-self.alpha)


def fit_power_law(pairs: Sequence[tuple], zeta: Optional[float] = None,
                  min_zeta_p: float = MIN_ZETA_P) -> ScalingFit:
    """Least-squares fit of ``log E = log C - alpha log p``.

    Nonpositive residuals are excluded with a warning; when ``zeta`` is given
    pairs with ``zeta * p < min_zeta_p`` are excluded as well.  Every
    exclusion is recorded on the result.
    """
    used, excluded = [], []
    for p, e in pairs:
        p, e = float(p), float(e)
        if not (e > 0 and math.isfinite(e)):
            logger.warning("excluding p=%g: nonpositive residual %r", p, e)
            excluded.append((p, e, "nonpositive"))
        elif zeta is not None and zeta * p < min_zeta_p:
            excluded.append((p, e, f"zeta*p<{min_zeta_p:g}"))
        else:
            used.append((p, e))
    if len(used) < 3:
        raise ParameterError(f"power-law fit needs >= 3 usable points, got {len(used)}")
    x = np.log([u[0] for u in used])
    y = np.log([u[1] for u in used])
    X = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    yhat = X @ coef
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(float(np.exp(coef[0])), float(-coef[1]), r2,
                      float(np.max(np.abs(y - yhat))), tuple(used), tuple(excluded))


@dataclass
class ZetaBoundRow:
    zeta: float
    C: float
    norm: float
    envelope: float
    holds: bool


@dataclass
class ZetaBoundReport:
    c: float
    rows: list
    empirical_exponent: float
    envelope_exponent: int
    norm_exponent: int
    all_hold: bool = field(init=False)

    def __post_init__(self):
        self.all_hold = all(r.holds for r in self.rows)


def zeta_bound_check(fits: Mapping[float, ScalingFit], norms: Mapping[float, float], n: int = 1,
                     required=(1.0, 0.5, 0.25), rtol: float = 1e-12) -> ZetaBoundReport:
    """Check ``C(zeta) <= c zeta^{-(6n+9)} |d phi|^{8n+30}`` with ``c`` fixed at ``zeta = 1``.

    ``norms[zeta]`` is the measured ``|d phi_zeta|`` (a ``1 +`` seminorm, so
    it is at least 1).  The empirical slope of ``log C`` against
    ``log zeta`` is reported, not asserted.
    """
    missing = [z for z in required if z not in fits or z not in norms]
    if missing:
        raise ParameterError(f"missing zeta levels {missing}")
    ez, en = -(6 * n + 9), 8 * n + 30
    c = fits[1.0].C / norms[1.0] ** en
    rows = []
    for z in sorted(fits, reverse=True):
        env = c * z**ez * norms[z] ** en
        rows.append(ZetaBoundRow(z, fits[z].C, norms[z], env, fits[z].C <= env * (1 + rtol)))
    zs = np.array([r.zeta for r in rows])
    Cs = np.array([r.C for r in rows])
    slope = float(np.polyfit(np.log(zs), np.log(Cs), 1)[0]) if len(rows) >= 2 else float("nan")
    return ZetaBoundReport(c, rows, slope, ez, en)
