"""Adaptive Simpson quadrature on finite intervals.

The integrator is batch-oriented: the integrand is called with 1-D numpy
arrays of abscissae, so integrands built from vectorised density
evaluations stay cheap even when the panel stack grows.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np


class QuadratureError(RuntimeError):
    """Integration could not meet the requested tolerance.

    Carries the total unresolved local error and the worst offending
    subinterval for diagnostics.
    """

    def __init__(self, message: str, *, unresolved_error: float = float("nan"),
                 worst_interval: tuple[float, float] | None = None):
        super().__init__(message)
        self.unresolved_error = unresolved_error
        self.worst_interval = worst_interval


@dataclass(frozen=True)
class QuadratureSpec:
    """Settings shared by every integral the package computes.

    domain_padding is in units of the largest relevant standard deviation:
    integration covers [min mean - padding * sigma_max,
    max mean + padding * sigma_max].
    """

    scheme: str = "adaptive-simpson"
    abs_tol: float = 1e-9
    max_depth: int = 50
    domain_padding: float = 12.0

    def __post_init__(self) -> None:
        if self.scheme != "adaptive-simpson":
            raise ValueError(f"unknown quadrature scheme: {self.scheme!r}")
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_depth < 10:
            raise ValueError("max_depth must be >= 10")
        if not self.domain_padding > 0:
            raise ValueError("domain_padding must be positive")


def _simpson(h: np.ndarray, f0: np.ndarray, fm: np.ndarray, f1: np.ndarray) -> np.ndarray:
    return h / 6.0 * (f0 + 4.0 * fm + f1)


def adaptive_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    abs_tol: float = 1e-9,
    max_depth: int = 50,
    breakpoints: Sequence[float] | None = None,
    min_panels: int = 16,
) -> tuple[float, float]:
    """Integrate ``f`` over [a, b] to absolute tolerance ``abs_tol``.

    ``f`` must accept a 1-D float array and return an equally shaped array.
    ``breakpoints`` seed the initial partition (density means go here so a
    narrow peak inside a wide domain cannot be missed by the first panels).

    Returns (value, error_estimate).  Accepted panels carry one Richardson
    extrapolation step.  Raises QuadratureError if panels that hit
    ``max_depth`` leave more than ``abs_tol`` of estimated error on the
    table, or if the integrand produces NaN.
    """
    if a == b:
        return 0.0, 0.0
    if a > b:
        value, err = adaptive_simpson(
            f, b, a, abs_tol=abs_tol, max_depth=max_depth,
            breakpoints=breakpoints, min_panels=min_panels)
        return -value, err

    edges = np.linspace(a, b, min_panels + 1)
    if breakpoints is not None:
        inner = np.asarray(breakpoints, dtype=float)
        inner = inner[(inner > a) & (inner < b)]
        if inner.size:
            edges = np.unique(np.concatenate([edges, inner]))

    mids = 0.5 * (edges[:-1] + edges[1:])
    vals = np.asarray(f(np.concatenate([edges, mids])), dtype=float)
    if np.isnan(vals).any():
        raise QuadratureError("integrand returned NaN during initial sweep")
    f_edges, f_mids = vals[: edges.size], vals[edges.size:]

    width = b - a
    cur_a = edges[:-1].copy()
    cur_b = edges[1:].copy()
    cur_fa = f_edges[:-1].copy()
    cur_fm = f_mids.copy()
    cur_fb = f_edges[1:].copy()
    cur_s = _simpson(cur_b - cur_a, cur_fa, cur_fm, cur_fb)
    # tolerance budget proportional to panel width
    cur_tol = abs_tol * (cur_b - cur_a) / width
    depth = 0

    total = 0.0
    err_total = 0.0
    unresolved = 0.0
    worst: tuple[float, float] | None = None
    worst_err = 0.0

    while cur_a.size:
        m = 0.5 * (cur_a + cur_b)
        lm = 0.5 * (cur_a + m)
        rm = 0.5 * (m + cur_b)
        new_vals = np.asarray(f(np.concatenate([lm, rm])), dtype=float)
        if np.isnan(new_vals).any():
            raise QuadratureError(f"integrand returned NaN at depth {depth}")
        f_lm, f_rm = new_vals[: lm.size], new_vals[lm.size:]

        s_left = _simpson(m - cur_a, cur_fa, f_lm, cur_fm)
        s_right = _simpson(cur_b - m, cur_fm, f_rm, cur_fb)
        s2 = s_left + s_right
        err = (s2 - cur_s) / 15.0

        converged = np.abs(err) <= cur_tol
        capped = ~converged & (depth + 1 >= max_depth)
        done = converged | capped

        if done.any():
            total += float(np.sum(s2[done] + err[done]))
            err_total += float(np.sum(np.abs(err[done])))
            if capped.any():
                cap_err = np.abs(err[capped])
                unresolved += float(np.sum(cap_err))
                k = int(np.argmax(cap_err))
                if cap_err[k] > worst_err:
                    worst_err = float(cap_err[k])
                    worst = (float(cur_a[capped][k]), float(cur_b[capped][k]))

        keep = ~done
        if not keep.any():
            break
        half_tol = 0.5 * cur_tol[keep]
        cur_a, cur_b, cur_fa, cur_fm, cur_fb, cur_s, cur_tol = (
            np.concatenate([cur_a[keep], m[keep]]),
            np.concatenate([m[keep], cur_b[keep]]),
            np.concatenate([cur_fa[keep], cur_fm[keep]]),
            np.concatenate([f_lm[keep], f_rm[keep]]),
            np.concatenate([cur_fm[keep], cur_fb[keep]]),
            np.concatenate([s_left[keep], s_right[keep]]),
            np.concatenate([half_tol, half_tol]),
        )
        depth += 1

    if unresolved > abs_tol:
        raise QuadratureError(
            f"quadrature left {unresolved:.3e} estimated error after depth "
            f"{max_depth} (budget {abs_tol:.3e})",
            unresolved_error=unresolved, worst_interval=worst)
    return total, err_total


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    interval: tuple[float, float],
    spec: QuadratureSpec,
    breakpoints: Sequence[float] | None = None,
) -> float:
    """Integrate ``f`` over ``interval`` under the settings in ``spec``."""
    value, _ = adaptive_simpson(
        f, interval[0], interval[1],
        abs_tol=spec.abs_tol, max_depth=spec.max_depth, breakpoints=breakpoints)
    return value
