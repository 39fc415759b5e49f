"""Distances between one-step predictive densities and per-run loss ledgers.

Squared Hellinger distance, Kullback-Leibler divergence, absolute
distance, and the discrete quadratic distance.  Continuous pairs fall
back to adaptive quadrature unless both densities are single Gaussians,
for which closed forms exist.  All distances accept the generalised case
where one side is an unnormalised envelope (mass above one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .predictors import PredictiveDensity
from .quadrature import QuadratureSpec, adaptive_simpson

# column order is the on-disk CSV order and must not be reordered
LEDGER_COLUMNS = (
    "h2_mu_xi",
    "h2_mu_rhobar",
    "h2_rhobar_rho",
    "h2_rho_static",
    "h2_mu_static",
    "kl_mu_rhobar",
)


def hellinger_sq_gaussian(m1: float, s1: float, m2: float, s2: float) -> float:
    """Closed-form squared Hellinger distance between two Gaussians."""
    ssq = s1 * s1 + s2 * s2
    bc = math.sqrt(2.0 * s1 * s2 / ssq) * math.exp(-((m1 - m2) ** 2) / (4.0 * ssq))
    return 2.0 - 2.0 * bc


def kl_gaussian(m1: float, s1: float, m2: float, s2: float) -> float:
    """Closed-form KL divergence KL(N(m1,s1) || N(m2,s2))."""
    return (math.log(s2 / s1)
            + (s1 * s1 + (m1 - m2) ** 2) / (2.0 * s2 * s2) - 0.5)


def _pair_window(p: PredictiveDensity, q: PredictiveDensity,
                 quad: QuadratureSpec):
    lo_p, hi_p = p.quad_interval(quad.domain_padding)
    lo_q, hi_q = q.quad_interval(quad.domain_padding)
    breakpoints = np.concatenate([p.breakpoints, q.breakpoints])
    return min(lo_p, lo_q), max(hi_p, hi_q), breakpoints


def _check_pair(p: PredictiveDensity, q: PredictiveDensity) -> bool:
    if p.is_tabular != q.is_tabular:
        raise ValueError(
            f"cannot compare {p.kind} density with {q.kind} density")
    if p.is_tabular and p.probs.size != q.probs.size:
        raise ValueError(
            f"label counts differ: {p.probs.size} vs {q.probs.size}")
    return p.is_tabular


def hellinger_sq(p: PredictiveDensity, q: PredictiveDensity,
                 quad: QuadratureSpec | None = None) -> float:
    """Squared Hellinger distance, integral or sum of (sqrt p - sqrt q)^2."""
    quad = quad or QuadratureSpec()
    if _check_pair(p, q):
        return float(np.sum((np.sqrt(p.probs) - np.sqrt(q.probs)) ** 2))
    if p.kind == "gaussian" and q.kind == "gaussian":
        return hellinger_sq_gaussian(p.mean, p.sigma, q.mean, q.sigma)

    def integrand(ys: np.ndarray) -> np.ndarray:
        return (np.exp(0.5 * p.log_pdf_fn(ys))
                - np.exp(0.5 * q.log_pdf_fn(ys))) ** 2

    lo, hi, brk = _pair_window(p, q, quad)
    value, _ = adaptive_simpson(integrand, lo, hi, abs_tol=quad.abs_tol,
                                max_depth=quad.max_depth, breakpoints=brk)
    return max(value, 0.0)


def kl_divergence(p: PredictiveDensity, q: PredictiveDensity,
                  quad: QuadratureSpec | None = None) -> float:
    """KL(p || q); +inf when q vanishes somewhere p has mass."""
    quad = quad or QuadratureSpec()
    if _check_pair(p, q):
        pv, qv = p.probs, q.probs
        if np.any((pv > 0) & (qv == 0)):
            return math.inf
        mask = pv > 0
        return float(np.sum(pv[mask] * (np.log(pv[mask]) - np.log(qv[mask]))))
    if p.kind == "gaussian" and q.kind == "gaussian":
        return kl_gaussian(p.mean, p.sigma, q.mean, q.sigma)

    diverged = [False]

    def integrand(ys: np.ndarray) -> np.ndarray:
        lpp = p.log_pdf_fn(ys)
        lpq = q.log_pdf_fn(ys)
        pv = np.exp(lpp)
        live = pv > 0.0
        bad = live & np.isneginf(lpq)
        if np.any(bad):
            diverged[0] = True
        ok = live & ~bad
        out = np.zeros_like(pv)
        np.multiply(pv, lpp - lpq, where=ok, out=out)
        return out

    lo, hi, brk = _pair_window(p, q, quad)
    value, _ = adaptive_simpson(integrand, lo, hi, abs_tol=quad.abs_tol,
                                max_depth=quad.max_depth, breakpoints=brk)
    return math.inf if diverged[0] else value


def abs_distance(p: PredictiveDensity, q: PredictiveDensity,
                 quad: QuadratureSpec | None = None) -> float:
    """Total absolute difference, integral or sum of |p - q|."""
    quad = quad or QuadratureSpec()
    if _check_pair(p, q):
        return float(np.sum(np.abs(p.probs - q.probs)))

    def integrand(ys: np.ndarray) -> np.ndarray:
        return np.abs(np.exp(p.log_pdf_fn(ys)) - np.exp(q.log_pdf_fn(ys)))

    lo, hi, brk = _pair_window(p, q, quad)
    value, _ = adaptive_simpson(integrand, lo, hi, abs_tol=quad.abs_tol,
                                max_depth=quad.max_depth, breakpoints=brk)
    return value


def quadratic_distance(p: PredictiveDensity | np.ndarray,
                       q: PredictiveDensity | np.ndarray) -> float:
    """Sum of squared probability differences for discrete densities."""
    pv = p.probs if isinstance(p, PredictiveDensity) else np.asarray(p, float)
    qv = q.probs if isinstance(q, PredictiveDensity) else np.asarray(q, float)
    if pv is None or qv is None:
        raise ValueError("quadratic distance is defined for discrete densities")
    if pv.size != qv.size:
        raise ValueError(f"label counts differ: {pv.size} vs {qv.size}")
    return float(np.sum((pv - qv) ** 2))


@dataclass
class LossLedger:
    """Per-step distance records for one simulated run.

    ``values`` has one row per step t = 1..horizon and one column per
    entry of ``columns`` (LEDGER_COLUMNS unless overridden).  Quantities
    not produced by the selected predictors stay NaN and serialise as
    'nan'.
    """

    run_id: int
    values: np.ndarray = field(repr=False)
    columns: tuple[str, ...] = LEDGER_COLUMNS

    @classmethod
    def empty(cls, run_id: int, horizon: int,
              columns: tuple[str, ...] = LEDGER_COLUMNS) -> "LossLedger":
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        return cls(run_id=run_id,
                   values=np.full((horizon, len(columns)), math.nan),
                   columns=columns)

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    def _col(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise KeyError(f"unknown ledger column {name!r}") from None

    def record(self, t: int, name: str, value: float) -> None:
        """Store one distance for step t (1-based)."""
        if not 1 <= t <= self.horizon:
            raise IndexError(f"step {t} outside 1..{self.horizon}")
        self.values[t - 1, self._col(name)] = value

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self._col(name)].copy()

    def cumulative(self, name: str) -> float:
        """Sum over all steps; NaN when the column was never recorded."""
        return float(np.sum(self.values[:, self._col(name)]))

    def cumulative_by_step(self, name: str) -> np.ndarray:
        return np.cumsum(self.values[:, self._col(name)])

    def rows(self):
        """Yield (run_id, t, *columns) tuples in CSV order."""
        for t in range(1, self.horizon + 1):
            yield (self.run_id, t, *self.values[t - 1])
