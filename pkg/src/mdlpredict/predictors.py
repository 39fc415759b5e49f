"""Online per-model scoring and the four predictive densities.

Scores live in natural-log domain: L_i(n) = ln w_i + sum_t ln nu_i(y_t|x_t).
From a scored history the module produces

* the posterior-weighted mixture prediction (marginalisation),
* the static prediction of the single best penalized model,
* the raw pointwise-max envelope obtained by re-selecting the best model
  for every candidate outcome (total mass >= 1), and
* its normalised version.

States are values: ``update`` returns a new state and never mutates the
one passed in.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .models import (
    ConditionalModel,
    GaussianRegressionModel,
    LOG_SQRT_2PI,
    ModelClass,
    ModelClassError,
    TabularClassificationModel,
    InputToken,
    log_joint,
)
from .quadrature import QuadratureSpec, adaptive_simpson

_LOG_TINY = -690.7755278982137  # ln(1e-300)


class SupportExhaustedError(RuntimeError):
    """Every model in the class assigned zero density to the history."""


def _tail_radius(sigma: float) -> float:
    # distance from the mean where an N(m, sigma^2) density falls below 1e-300
    c = -_LOG_TINY - math.log(sigma) - LOG_SQRT_2PI
    return sigma * math.sqrt(2.0 * max(c, 1.0))


@dataclass
class PredictiveDensity:
    """One-step predictive density with total-mass metadata.

    ``kind`` is one of gaussian, gaussian-mixture, envelope,
    normalized-envelope, mixture, tabular.  ``breakpoints`` (component
    means) seed the quadrature partition; ``sigma_max`` scales the
    integration padding.  Tabular densities carry ``probs`` and no
    continuous support.
    """

    kind: str
    total_mass: float
    support_hint: tuple[float, float]
    log_pdf_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    breakpoints: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sigma_max: float = 0.0
    mean: float | None = None
    sigma: float | None = None
    mixture_weights: np.ndarray | None = None
    mixture_means: np.ndarray | None = None
    mixture_sigmas: np.ndarray | None = None
    probs: np.ndarray | None = None

    @property
    def is_tabular(self) -> bool:
        return self.kind == "tabular"

    def log_pdf(self, y):
        ys = np.atleast_1d(np.asarray(y, dtype=float))
        out = self.log_pdf_fn(ys)
        return float(out[0]) if np.isscalar(y) or np.ndim(y) == 0 else out

    def pdf(self, y):
        lp = self.log_pdf(y)
        return np.exp(lp) if isinstance(lp, np.ndarray) else math.exp(lp)

    def quad_interval(self, padding: float) -> tuple[float, float]:
        """Integration window: component means padded by ``padding`` sigmas."""
        if self.is_tabular:
            raise ValueError("tabular densities are summed, not integrated")
        lo = float(self.breakpoints.min()) - padding * self.sigma_max
        hi = float(self.breakpoints.max()) + padding * self.sigma_max
        return lo, hi


def gaussian_density(mean: float, sigma: float) -> PredictiveDensity:
    mean, sigma = float(mean), float(sigma)
    log_norm = math.log(sigma) + LOG_SQRT_2PI

    def log_pdf(ys: np.ndarray) -> np.ndarray:
        z = (ys - mean) / sigma
        return -0.5 * z * z - log_norm

    r = _tail_radius(sigma)
    return PredictiveDensity(
        kind="gaussian", total_mass=1.0, support_hint=(mean - r, mean + r),
        log_pdf_fn=log_pdf, breakpoints=np.array([mean]), sigma_max=sigma,
        mean=mean, sigma=sigma)


def gaussian_mixture_density(weights: np.ndarray, means: np.ndarray,
                             sigmas: np.ndarray) -> PredictiveDensity:
    """Mixture of Gaussians with weights summing to one (exact mass 1)."""
    weights = np.asarray(weights, dtype=float)
    means = np.asarray(means, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    log_norms = np.log(sigmas) + LOG_SQRT_2PI

    def log_pdf(ys: np.ndarray) -> np.ndarray:
        z = (ys[None, :] - means[:, None]) / sigmas[:, None]
        comp = log_w[:, None] - 0.5 * z * z - log_norms[:, None]
        return logsumexp(comp, axis=0)

    radii = _tail_radius(float(sigmas.max()))
    return PredictiveDensity(
        kind="gaussian-mixture", total_mass=1.0,
        support_hint=(float(means.min()) - radii, float(means.max()) + radii),
        log_pdf_fn=log_pdf, breakpoints=means.copy(),
        sigma_max=float(sigmas.max()),
        mixture_weights=weights.copy(), mixture_means=means.copy(),
        mixture_sigmas=sigmas.copy())


def tabular_density(probs: np.ndarray, *, total_mass: float | None = None) -> PredictiveDensity:
    probs = np.asarray(probs, dtype=float)
    mass = float(probs.sum()) if total_mass is None else float(total_mass)

    def log_pdf(ys: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(probs[np.asarray(ys, dtype=int)])

    return PredictiveDensity(
        kind="tabular", total_mass=mass, support_hint=(0.0, float(probs.size - 1)),
        log_pdf_fn=log_pdf, probs=probs.copy())


class PredictorState:
    """Per-model cumulative log scores after ``n`` observed steps.

    For lazy classes the score vector covers the materialised prefix and is
    extended on demand by replaying the stored history; the mixture value
    then omits a tail whose probability mass is at most
    ``tail_weight(k) * C**n``.
    """

    def __init__(self, model_class: ModelClass, xs: tuple = (), ys: tuple = (),
                 log_scores: np.ndarray | None = None):
        self.model_class = model_class
        self.xs = tuple(xs)
        self.ys = tuple(ys)
        if log_scores is None:
            with np.errstate(divide="ignore"):
                log_scores = np.log(model_class.weights)
        self._scores = np.asarray(log_scores, dtype=float)
        self._log_mixture: float | None = None
        self._mdl: tuple[int, float] | None = None

    # -- construction ---------------------------------------------------

    @classmethod
    def initial(cls, model_class: ModelClass) -> "PredictorState":
        return cls(model_class)

    @classmethod
    def from_history(cls, model_class: ModelClass, xs: Sequence[InputToken],
                     ys: Sequence) -> "PredictorState":
        """Score a whole history from scratch (non-incremental path)."""
        xs, ys = tuple(xs), tuple(ys)
        with np.errstate(divide="ignore"):
            scores = np.array([
                math.log(w) + log_joint(m, xs, ys)
                for w, m in model_class.entries])
        state = cls(model_class, xs, ys, scores)
        if xs and np.max(scores) == -math.inf:
            raise SupportExhaustedError(
                "history has zero density under every model "
                f"(first impossible step: {state._first_impossible_step()})")
        return state

    def _first_impossible_step(self) -> int:
        probe = PredictorState(self.model_class)
        for t, (x, y) in enumerate(zip(self.xs, self.ys), start=1):
            try:
                probe = update(probe, x, y)
            except SupportExhaustedError:
                return t
        return -1

    # -- bookkeeping ----------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.xs)

    def _sync(self) -> None:
        # score models materialised after this state was created
        k = self.model_class.n_materialized
        if self._scores.size < k:
            extra = []
            for i in range(self._scores.size, k):
                w = self.model_class.weight(i)
                extra.append(math.log(w) + log_joint(
                    self.model_class.model(i), self.xs, self.ys))
            self._scores = np.concatenate([self._scores, extra])
            self._log_mixture = None

    @property
    def log_scores(self) -> np.ndarray:
        self._sync()
        return self._scores.copy()

    def score(self, i: int) -> float:
        if not self.model_class.ensure(i + 1):
            raise IndexError(f"model index {i} out of range")
        self._sync()
        return float(self._scores[i])

    @property
    def log_mixture(self) -> float:
        """ln of the weighted sum of joint densities over the class."""
        self._sync()
        if self._log_mixture is None:
            self._log_mixture = float(logsumexp(self._scores))
        return self._log_mixture

    @property
    def log_mdl(self) -> float:
        """ln of the largest weighted joint density (the selected model's)."""
        return mdl_select(self)[1]

    def posterior_weights(self) -> np.ndarray:
        """Posterior over (materialised) models given the history."""
        self._sync()
        shifted = self._scores - np.max(self._scores)
        w = np.exp(shifted)
        return w / w.sum()


def update(state: PredictorState, x: InputToken, y) -> PredictorState:
    """Fold one observed (x, y) pair into the scores.

    Raises SupportExhaustedError if every model assigns zero density to
    the pair given its history.
    """
    state._sync()
    step = np.array([m.log_density(y, x) for m in state.model_class.models])
    new_scores = state._scores + step
    if np.max(new_scores) == -math.inf:
        raise SupportExhaustedError(
            f"all models assign zero density at step {state.n + 1}")
    new = PredictorState(state.model_class, state.xs + (x,), state.ys + (y,),
                         new_scores)
    # max <= log-sum-exp holds exactly in floats; trip on real corruption
    if mdl_select(new)[1] > new.log_mixture + 1e-9:
        raise AssertionError("mdl score exceeded the mixture score")
    return new


def mdl_select(state: PredictorState) -> tuple[int, float]:
    """Index and log score of the maximum-penalized-likelihood model.

    Ties break toward the smallest enumeration index.  For lazy classes
    the enumeration stops as soon as ln w_i + n ln C falls below the best
    score found, which no later entry can beat.
    """
    if state._mdl is not None:
        return state._mdl
    mc = state.model_class
    if mc.is_finite:
        state._sync()
        idx = int(np.argmax(state._scores))
        state._mdl = (idx, float(state._scores[idx]))
        return state._mdl
    n_log_c = state.n * math.log(mc.global_bound)
    best_idx, best = -1, -math.inf
    j = 0
    while mc.ensure(j + 1):
        if best_idx >= 0 and math.log(mc.weight(j)) + n_log_c < best:
            break
        score = state.score(j)
        if score > best:
            best_idx, best = j, score
        j += 1
    if best == -math.inf:
        raise SupportExhaustedError("history has zero density under every model")
    state._mdl = (best_idx, best)
    return state._mdl


def _gaussian_profile(state: PredictorState, x: InputToken):
    models = state.model_class.models
    means = np.array([m.mean(x) for m in models])
    sigmas = np.array([m.sigma for m in models])
    return means, sigmas, np.log(sigmas) + LOG_SQRT_2PI


def _envelope_kinks(shifted: np.ndarray, means: np.ndarray,
                    sigmas: np.ndarray, log_norms: np.ndarray) -> np.ndarray:
    """Abscissae where the Gaussian envelope can switch components.

    Each weighted component is a quadratic in log space, so the points
    where the pointwise max changes hands solve pairwise quadratic
    equations in closed form.  Seeding them as quadrature breakpoints
    keeps every Simpson panel smooth, which the error estimate relies on.
    Returns component means plus all real crossings; the integrator drops
    any outside its interval.
    """
    a = -0.5 / (sigmas * sigmas)
    b = means / (sigmas * sigmas)
    c = shifted - log_norms + a * means * means
    i, j = np.triu_indices(means.size, k=1)
    da, db, dc = a[i] - a[j], b[i] - b[j], c[i] - c[j]
    valid = np.isfinite(dc)  # drops pairs with a zero-density component

    pieces = [means]
    lin = valid & (da == 0.0) & (db != 0.0)
    if lin.any():
        pieces.append(-dc[lin] / db[lin])
    quad = valid & (da != 0.0)
    if quad.any():
        da_q, db_q, dc_q = da[quad], db[quad], dc[quad]
        disc = db_q * db_q - 4.0 * da_q * dc_q
        real = disc > 0.0
        if real.any():
            sq = np.sqrt(disc[real])
            db_r = db_q[real]
            # stable quadratic roots: q/da and dc/q avoid cancellation
            q = -0.5 * (db_r + np.where(db_r >= 0.0, sq, -sq))
            pieces.append(q / da_q[real])
            nz = q != 0.0
            pieces.append(dc_q[real][nz] / q[nz])
    pts = np.concatenate(pieces)
    return np.unique(pts[np.isfinite(pts)])


def bayes_predict(state: PredictorState, x: InputToken) -> PredictiveDensity:
    """Posterior-weighted mixture of one-step model predictions."""
    mc = state.model_class
    post = state.posterior_weights()
    if mc.all_gaussian():
        means, sigmas, _ = _gaussian_profile(state, x)
        return gaussian_mixture_density(post, means, sigmas)
    if mc.all_tabular():
        table = np.stack([m.prob_vector(x) for m in mc.models])
        return tabular_density(post @ table, total_mass=1.0)

    models = mc.models
    with np.errstate(divide="ignore"):
        log_post = np.log(post)

    def log_pdf(ys: np.ndarray) -> np.ndarray:
        comp = np.stack([log_post[k] + models[k].log_density_array(ys, x)
                         for k in range(len(models))])
        return logsumexp(comp, axis=0)

    lo, hi = zip(*[m.integration_interval(x, 40.0) for m in models])
    return PredictiveDensity(
        kind="mixture", total_mass=1.0, support_hint=(min(lo), max(hi)),
        log_pdf_fn=log_pdf,
        breakpoints=np.array([m.integration_interval(x, 0.0)[0] for m in models]),
        sigma_max=max((hi_i - lo_i) for lo_i, hi_i in zip(lo, hi)) / 80.0)


def model_density(model: ConditionalModel, x: InputToken) -> PredictiveDensity:
    """One-step density of a single model at input x."""
    if isinstance(model, GaussianRegressionModel):
        return gaussian_density(model.mean(x), model.sigma)
    if isinstance(model, TabularClassificationModel):
        return tabular_density(model.prob_vector(x), total_mass=1.0)

    def log_pdf(ys: np.ndarray) -> np.ndarray:
        return model.log_density_array(ys, x)

    lo, hi = model.integration_interval(x, 40.0)
    return PredictiveDensity(
        kind="mixture", total_mass=1.0, support_hint=(lo, hi),
        log_pdf_fn=log_pdf, breakpoints=np.array([0.5 * (lo + hi)]),
        sigma_max=(hi - lo) / 80.0)


def static_predict(state: PredictorState, x: InputToken) -> PredictiveDensity:
    """Prediction of the single model selected on the history alone."""
    idx, _ = mdl_select(state)
    return model_density(state.model_class.model(idx), x)


def dynamic_predict(state: PredictorState, x: InputToken,
                    quad: QuadratureSpec | None = None) -> PredictiveDensity:
    """Pointwise-max envelope: re-select the best model per candidate y.

    The value at y is the ratio of the best next-step weighted joint
    density to the best history density, so it dominates the static
    prediction pointwise and stays below the class density bound.  Total
    mass (>= 1) is estimated by quadrature.
    """
    quad = quad or QuadratureSpec()
    mc = state.model_class
    _, log_best = mdl_select(state)
    if not math.isfinite(log_best):
        raise SupportExhaustedError("history score is not finite")
    state._sync()
    shifted = state._scores - log_best

    if mc.all_gaussian():
        means, sigmas, log_norms = _gaussian_profile(state, x)

        def log_pdf(ys: np.ndarray) -> np.ndarray:
            z = (ys[None, :] - means[:, None]) / sigmas[:, None]
            return np.max(shifted[:, None] - 0.5 * z * z - log_norms[:, None],
                          axis=0)

        sigma_max = float(sigmas.max())
        radius = _tail_radius(sigma_max)
        support = (float(means.min()) - radius, float(means.max()) + radius)
        breakpoints = _envelope_kinks(shifted, means, sigmas, log_norms)
    else:
        models = mc.models

        def log_pdf(ys: np.ndarray) -> np.ndarray:
            comp = np.stack([shifted[k] + models[k].log_density_array(ys, x)
                             for k in range(len(models))])
            return np.max(comp, axis=0)

        lo, hi = zip(*[m.integration_interval(x, 40.0) for m in models])
        support = (min(lo), max(hi))
        breakpoints = np.array([0.5 * (l + h) for l, h in zip(lo, hi)])
        sigma_max = max((h - l) for l, h in zip(lo, hi)) / 80.0

    density = PredictiveDensity(
        kind="envelope", total_mass=math.nan, support_hint=support,
        log_pdf_fn=log_pdf, breakpoints=np.asarray(breakpoints, dtype=float),
        sigma_max=sigma_max)
    lo, hi = density.quad_interval(quad.domain_padding)
    mass, _ = adaptive_simpson(
        lambda ys: np.exp(log_pdf(ys)), lo, hi,
        abs_tol=quad.abs_tol, max_depth=quad.max_depth,
        breakpoints=density.breakpoints)
    density.total_mass = mass
    return density


def normalize(density: PredictiveDensity,
              quad: QuadratureSpec | None = None) -> PredictiveDensity:
    """Scale a density by its total mass so it integrates to one."""
    mass = density.total_mass
    if not (math.isfinite(mass) and mass > 0):
        raise ValueError(f"cannot normalise density with total mass {mass!r}")
    log_mass = math.log(mass)
    inner = density.log_pdf_fn

    def log_pdf(ys: np.ndarray) -> np.ndarray:
        return inner(ys) - log_mass

    kind = "tabular" if density.is_tabular else "normalized-envelope"
    probs = None if density.probs is None else density.probs / mass
    return PredictiveDensity(
        kind=kind, total_mass=1.0, support_hint=density.support_hint,
        log_pdf_fn=log_pdf, breakpoints=density.breakpoints.copy(),
        sigma_max=density.sigma_max, probs=probs)


def penalized_sse_select(model_class: ModelClass, xs: Sequence[InputToken],
                         ys: Sequence[float]) -> int:
    """Least-squares selection with a 2 sigma^2 ln(1/w) complexity penalty.

    Valid only for constant-sigma Gaussian classes, where minimising
    SSE_i + 2 sigma^2 ln(1/w_i) is algebraically the same selection as the
    maximum-penalized-likelihood rule.
    """
    sigma = model_class.common_sigma()
    if len(xs) != len(ys):
        raise ValueError(f"got {len(xs)} inputs but {len(ys)} outputs")
    models = model_class.models
    sse = np.zeros(len(models))
    for x, y in zip(xs, ys):
        means = np.array([m.mean(x) for m in models])
        sse += (float(y) - means) ** 2
    penalty = 2.0 * sigma * sigma * (-np.log(model_class.weights))
    return int(np.argmin(sse + penalty))
