"""Countable weighted model classes for online regression and classification.

A model class is an ordered enumeration of (prior weight, conditional model)
pairs with non-increasing weights, a shared uniform density bound, and a
weight sum of at most one.  Built-in families: Gaussian regression with a
noise floor (including linear predictors with exact rational coefficients)
and tabular classifiers over a finite label set.
"""

from __future__ import annotations

import math
import threading
import warnings
from abc import ABC, abstractmethod
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .quadrature import QuadratureSpec, adaptive_simpson

DEFAULT_SIGMA_FLOOR = 1e-6

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ModelInputError(TypeError):
    """An input token's payload kind is not accepted by the model."""


class NonFiniteValueError(ValueError):
    """An observation or payload was NaN or infinite."""


class ModelClassError(ValueError):
    """A model or model-class invariant was violated at construction."""


@dataclass(frozen=True)
class InputToken:
    """One side-information input.

    ``payload`` is opaque to the framework (scalar, vector, symbol, ...);
    each model decides which payload kinds it accepts and raises
    ModelInputError for the rest.  ``step_index`` supports time-dependent
    models without widening the payload itself.
    """

    payload: Any
    step_index: int | None = None


def _scalar_payload(x: InputToken) -> float:
    p = x.payload
    if isinstance(p, bool) or not isinstance(p, (int, float, np.integer, np.floating)):
        raise ModelInputError(
            f"expected a real scalar payload, got {type(p).__name__}")
    p = float(p)
    if not math.isfinite(p):
        raise NonFiniteValueError("payload must be finite")
    return p


class ConditionalModel(ABC):
    """A conditional density over outputs given an input token.

    Subclasses must keep ``density_bound`` (the sup of the density over all
    inputs and outputs) finite, and must never return NaN from the
    log-density methods: impossible outcomes map to ``-inf``.
    """

    kind: str = "custom"

    density_bound: float

    @abstractmethod
    def log_density(self, y, x: InputToken) -> float:
        """Natural log of the density (or probability) of ``y`` given ``x``."""

    @abstractmethod
    def log_density_array(self, ys: np.ndarray, x: InputToken) -> np.ndarray:
        """Vectorised ``log_density`` over an array of candidate outputs."""

    @abstractmethod
    def sample(self, x: InputToken, rng: np.random.Generator):
        """Draw one output from the conditional distribution at ``x``."""

    def integration_interval(self, x: InputToken, padding: float) -> tuple[float, float]:
        """Interval carrying all but a negligible sliver of mass at ``x``.

        Continuous models override this so that class validation and
        envelope integration know where to look.  Discrete models need not.
        """
        raise NotImplementedError(f"{type(self).__name__} has no integration interval")


@dataclass(frozen=True)
class LinearMean:
    """Affine mean function with exact rational coefficients.

    Coefficients are stored as Fractions (countability is structural);
    evaluation uses pre-converted floats.
    """

    slope: Fraction
    intercept: Fraction
    _a: float = field(init=False, repr=False, compare=False)
    _b: float = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "slope", Fraction(self.slope))
        object.__setattr__(self, "intercept", Fraction(self.intercept))
        object.__setattr__(self, "_a", float(self.slope))
        object.__setattr__(self, "_b", float(self.intercept))

    def __call__(self, x: InputToken) -> float:
        return self._a * _scalar_payload(x) + self._b


class GaussianRegressionModel(ConditionalModel):
    """Gaussian conditional density y ~ N(mean_fn(x), sigma^2).

    ``sigma`` must stay at or above ``sigma_floor`` so the density bound
    1/sqrt(2*pi*sigma^2) is finite; point-mass limits are rejected.
    """

    kind = "gaussian-regression"

    def __init__(self, mean_fn: Callable[[InputToken], float], sigma: float, *,
                 sigma_floor: float = DEFAULT_SIGMA_FLOOR, name: str | None = None):
        sigma = float(sigma)
        if not sigma_floor > 0:
            raise ModelClassError("sigma_floor must be positive")
        if not sigma >= sigma_floor:
            raise ModelClassError(
                f"sigma={sigma:g} is below the noise floor {sigma_floor:g}")
        self.mean_fn = mean_fn
        self.sigma = sigma
        self.sigma_floor = sigma_floor
        self.name = name
        self._log_norm = math.log(sigma) + LOG_SQRT_2PI
        self.density_bound = math.exp(-self._log_norm)

    def __repr__(self) -> str:
        label = self.name or repr(self.mean_fn)
        return f"GaussianRegressionModel({label}, sigma={self.sigma:g})"

    def mean(self, x: InputToken) -> float:
        return float(self.mean_fn(x))

    def log_density(self, y, x: InputToken) -> float:
        y = float(y)
        if not math.isfinite(y):
            raise NonFiniteValueError("output value must be finite")
        z = (y - self.mean(x)) / self.sigma
        return -0.5 * z * z - self._log_norm

    def log_density_array(self, ys: np.ndarray, x: InputToken) -> np.ndarray:
        z = (np.asarray(ys, dtype=float) - self.mean(x)) / self.sigma
        return -0.5 * z * z - self._log_norm

    def sample(self, x: InputToken, rng: np.random.Generator) -> float:
        return self.mean(x) + self.sigma * rng.standard_normal()

    def integration_interval(self, x: InputToken, padding: float) -> tuple[float, float]:
        m = self.mean(x)
        return m - padding * self.sigma, m + padding * self.sigma


def _check_prob_vector(p: np.ndarray, label_count: int, tol: float = 1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (label_count,):
        raise ModelClassError(
            f"probability vector has shape {p.shape}, expected ({label_count},)")
    if np.any(p < 0):
        raise ModelClassError("probability vector has negative entries")
    if abs(float(p.sum()) - 1.0) > tol:
        raise ModelClassError(
            f"probability vector sums to {p.sum()!r}, not 1 within {tol:g}")
    return p


class TabularClassificationModel(ConditionalModel):
    """Conditional distribution over a finite label set 0..label_count-1."""

    kind = "tabular-classification"

    def __init__(self, prob_fn: Callable[[InputToken], np.ndarray], label_count: int, *,
                 name: str | None = None):
        if label_count < 2:
            raise ModelClassError("label_count must be >= 2")
        self.prob_fn = prob_fn
        self.label_count = int(label_count)
        self.name = name
        self.density_bound = 1.0

    def __repr__(self) -> str:
        label = self.name or repr(self.prob_fn)
        return f"TabularClassificationModel({label}, labels={self.label_count})"

    def prob_vector(self, x: InputToken) -> np.ndarray:
        return _check_prob_vector(self.prob_fn(x), self.label_count)

    def _label(self, y) -> int:
        if isinstance(y, bool) or not isinstance(y, (int, np.integer)):
            raise ModelInputError(
                f"expected an integer class label, got {type(y).__name__}")
        y = int(y)
        if not 0 <= y < self.label_count:
            raise ModelInputError(
                f"label {y} outside 0..{self.label_count - 1}")
        return y

    def log_density(self, y, x: InputToken) -> float:
        p = float(self.prob_vector(x)[self._label(y)])
        return math.log(p) if p > 0.0 else -math.inf

    def log_density_array(self, ys: np.ndarray, x: InputToken) -> np.ndarray:
        probs = self.prob_vector(x)
        idx = np.asarray([self._label(y) for y in np.asarray(ys).ravel()])
        with np.errstate(divide="ignore"):
            return np.log(probs[idx])

    def sample(self, x: InputToken, rng: np.random.Generator) -> int:
        return int(rng.choice(self.label_count, p=self.prob_vector(x)))


@dataclass(frozen=True)
class ConstantTable:
    """Input-independent label distribution (picklable prob_fn)."""

    probs: tuple[float, ...]

    def __call__(self, x: InputToken) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


@dataclass(frozen=True)
class LookupTable:
    """Per-symbol label distributions keyed by the token payload."""

    tables: tuple[tuple[Any, tuple[float, ...]], ...]

    def __call__(self, x: InputToken) -> np.ndarray:
        for key, probs in self.tables:
            if key == x.payload:
                return np.asarray(probs, dtype=float)
        raise ModelInputError(f"no table for payload {x.payload!r}")


class ModelClass:
    """Ordered weighted enumeration of conditional models.

    Weights are positive, non-increasing in enumeration order, and sum to at
    most one; a sum strictly below one is accepted with a semimeasure
    warning.  ``global_bound`` is the sup of member density bounds.  Lazy
    classes materialise entries on demand from a source iterator and must
    declare both the global bound and a tail-weight function.
    """

    def __init__(self, entries: Sequence[tuple[float, ConditionalModel]]):
        entries = [(float(w), m) for w, m in entries]
        if not entries:
            raise ModelClassError("model class must have at least one entry")
        self._entries = []
        self._source: Iterator[tuple[float, ConditionalModel]] | None = None
        self._tail_weight: Callable[[int], float] | None = None
        self._declared_bound: float | None = None
        self._exhausted = True
        self._mode = "finite"
        self._lock = threading.Lock()
        for w, m in entries:
            self._admit(w, m)
        bound = max(m.density_bound for _, m in self._entries)
        if not math.isfinite(bound):
            raise ModelClassError("global density bound must be finite")
        self._declared_bound = bound
        self._check_weight_sum(warn=True)

    @classmethod
    def lazy(cls, source: Iterable[tuple[float, ConditionalModel]],
             tail_weight: Callable[[int], float],
             global_bound: float) -> "ModelClass":
        """Build a lazily enumerated (possibly infinite) class.

        ``tail_weight(k)`` must bound the total weight of entries with index
        >= k; ``global_bound`` must bound every member's density bound.
        """
        self = cls.__new__(cls)
        self._entries = []
        self._source = iter(source)
        self._tail_weight = tail_weight
        if not (math.isfinite(global_bound) and global_bound > 0):
            raise ModelClassError("global_bound must be finite and positive")
        self._declared_bound = float(global_bound)
        self._exhausted = False
        self._mode = "lazy"
        self._lock = threading.Lock()
        if not self.ensure(1):
            raise ModelClassError("lazy model class produced no entries")
        if self.weight_sum > 1.0 + 1e-9:
            raise ModelClassError(
                f"declared weight budget {self.weight_sum!r} exceeds 1")
        return self

    def _admit(self, w: float, m: ConditionalModel) -> None:
        if not (math.isfinite(w) and w > 0):
            raise ModelClassError(f"prior weight must be positive, got {w!r}")
        if self._entries and w > self._entries[-1][0]:
            raise ModelClassError(
                "weights must be non-increasing in enumeration order "
                f"(entry {len(self._entries)} has weight {w!r} > previous "
                f"{self._entries[-1][0]!r})")
        if self._declared_bound is not None and m.density_bound > self._declared_bound:
            raise ModelClassError(
                f"member density bound {m.density_bound!r} exceeds declared "
                f"global bound {self._declared_bound!r}")
        self._entries.append((w, m))

    def _check_weight_sum(self, warn: bool) -> None:
        total = self.weight_sum
        if total > 1.0 + 1e-9:
            raise ModelClassError(f"weights sum to {total!r} > 1")
        if warn and total < 1.0 - 1e-9:
            warnings.warn(
                f"weights sum to {total:.12g} < 1: treating the class as a "
                "semimeasure", UserWarning, stacklevel=3)

    # -- enumeration ----------------------------------------------------

    def ensure(self, count: int) -> bool:
        """Materialise at least ``count`` entries; False if fewer exist."""
        if len(self._entries) >= count:
            return True
        if self._exhausted:
            return False
        with self._lock:
            while len(self._entries) < count and not self._exhausted:
                try:
                    w, m = next(self._source)
                except StopIteration:
                    self._exhausted = True
                    self._source = None
                    break
                self._admit(float(w), m)
                if sum(w for w, _ in self._entries) > 1.0 + 1e-9:
                    raise ModelClassError("materialised weights sum above 1")
        return len(self._entries) >= count

    def __getstate__(self):
        if self._mode == "lazy":
            raise TypeError("lazy model classes cannot be pickled; "
                            "run them in a single process")
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    @property
    def enumeration_mode(self) -> str:
        return self._mode

    @property
    def is_finite(self) -> bool:
        return self.enumeration_mode == "finite"

    def __len__(self) -> int:
        if not self.is_finite:
            raise TypeError("lazy model class has no definite length")
        return len(self._entries)

    @property
    def n_materialized(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> list[tuple[float, ConditionalModel]]:
        return list(self._entries)

    @property
    def weights(self) -> np.ndarray:
        """Weights of the materialised entries (all of them, if finite)."""
        return np.array([w for w, _ in self._entries])

    @property
    def models(self) -> list[ConditionalModel]:
        return [m for _, m in self._entries]

    def weight(self, i: int) -> float:
        return self._entries[i][0]

    def model(self, i: int) -> ConditionalModel:
        return self._entries[i][1]

    def tail_weight(self, k: int) -> float:
        """Upper bound on the total weight of entries with index >= k."""
        if self._tail_weight is not None:
            return float(self._tail_weight(k))
        return 0.0 if k >= len(self._entries) else float(
            sum(w for w, _ in self._entries[k:]))

    @property
    def weight_sum(self) -> float:
        materialised = sum(w for w, _ in self._entries)
        if self._tail_weight is not None:
            return materialised + self.tail_weight(len(self._entries))
        return materialised

    @property
    def global_bound(self) -> float:
        return self._declared_bound

    @property
    def semimeasure(self) -> bool:
        return self.weight_sum < 1.0 - 1e-9

    def all_gaussian(self) -> bool:
        return all(isinstance(m, GaussianRegressionModel) for _, m in self._entries)

    def all_tabular(self) -> bool:
        return all(isinstance(m, TabularClassificationModel) for _, m in self._entries)

    def common_sigma(self) -> float:
        """The shared noise level of a constant-sigma Gaussian class."""
        if not self.is_finite or not self.all_gaussian():
            raise ModelClassError("constant-sigma check needs a finite Gaussian class")
        sigmas = {m.sigma for _, m in self._entries}
        if len(sigmas) != 1:
            raise ModelClassError(f"models have {len(sigmas)} distinct sigma values")
        return sigmas.pop()


def log_joint(model: ConditionalModel, xs: Sequence[InputToken], ys: Sequence) -> float:
    """Log of the product density of ``ys`` given ``xs`` under ``model``.

    Empty sequences give 0 (empty product).  A zero-density factor gives
    ``-inf``; the result is never NaN.
    """
    if len(xs) != len(ys):
        raise ValueError(f"got {len(xs)} inputs but {len(ys)} outputs")
    terms = []
    for x, y in zip(xs, ys):
        lp = model.log_density(y, x)
        if lp == -math.inf:
            return -math.inf
        terms.append(lp)
    return math.fsum(terms)


def rational_code_length(value: Fraction) -> int:
    """Declared prefix-code length (bits) for an exact rational.

    One sign bit plus the magnitude bits of numerator and denominator.
    Only relative lengths matter for the code-length prior.
    """
    q = Fraction(value)
    return 1 + abs(q.numerator).bit_length() + q.denominator.bit_length()


def build_linear_rational_class(
    coef_grid: Sequence[tuple], sigma: float, prior: str = "uniform", *,
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
) -> ModelClass:
    """Finite class of affine-mean Gaussian models over a rational grid.

    ``coef_grid`` holds (slope, intercept) pairs; each coordinate may be an
    int, a Fraction, or a string like ``"3/7"``.  ``prior`` is ``uniform``
    or ``code-length`` (weight proportional to 2**-bits, rescaled to sum to
    one, entries reordered by non-increasing weight).
    """
    coef_grid = list(coef_grid)
    if not coef_grid:
        raise ModelClassError("coefficient grid must be nonempty")
    models = []
    for a, b in coef_grid:
        mean = LinearMean(Fraction(a), Fraction(b))
        models.append(GaussianRegressionModel(
            mean, sigma, sigma_floor=sigma_floor,
            name=f"{mean.slope}*x+{mean.intercept}"))
    if prior == "uniform":
        w = 1.0 / len(models)
        return ModelClass([(w, m) for m in models])
    if prior == "code-length":
        lengths = [rational_code_length(m.mean_fn.slope)
                   + rational_code_length(m.mean_fn.intercept) for m in models]
        raw = np.exp2([-float(bits) for bits in lengths])
        scaled = raw / raw.sum()
        order = sorted(range(len(models)), key=lambda i: (-scaled[i], i))
        return ModelClass([(float(scaled[i]), models[i]) for i in order])
    raise ModelClassError(f"unknown prior {prior!r}")


@dataclass
class ClassValidationReport:
    """Numerical audit of the model-class contract on probe inputs."""

    max_density: np.ndarray        # (n_models,) largest density seen
    integrals: np.ndarray          # (n_models, n_probes) total mass per probe
    weight_sum: float
    semimeasure: bool
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_class(
    model_class: ModelClass,
    probe_inputs: Sequence[InputToken],
    quad: QuadratureSpec | None = None,
    *,
    integral_tol: float = 1e-8,
    grid_points: int = 2001,
) -> ClassValidationReport:
    """Check density normalisation and boundedness on probe inputs.

    Violations are collected, not raised.  Continuous members are
    integrated by quadrature over their own integration interval and their
    density maximised on a dense grid; tabular members are summed exactly.
    """
    if not probe_inputs:
        raise ValueError("probe_inputs must be nonempty")
    quad = quad or QuadratureSpec()
    weights = model_class.weights
    models = model_class.models
    bound = model_class.global_bound
    n = len(models)
    max_density = np.zeros(n)
    integrals = np.zeros((n, len(probe_inputs)))
    violations: list[str] = []

    for i, model in enumerate(models):
        for j, x in enumerate(probe_inputs):
            if isinstance(model, TabularClassificationModel):
                p = model.prob_vector(x)
                total = float(p.sum())
                peak = float(p.max())
                tol = 1e-12
            else:
                try:
                    lo, hi = model.integration_interval(x, quad.domain_padding)
                except NotImplementedError:
                    violations.append(
                        f"model {i}: no integration interval, probe {j} skipped")
                    continue
                total, _ = adaptive_simpson(
                    lambda ys: np.exp(model.log_density_array(ys, x)), lo, hi,
                    abs_tol=quad.abs_tol, max_depth=quad.max_depth)
                grid = np.linspace(lo, hi, grid_points)
                peak = float(np.exp(model.log_density_array(grid, x)).max())
                tol = integral_tol
            integrals[i, j] = total
            max_density[i] = max(max_density[i], peak)
            if abs(total - 1.0) > tol:
                violations.append(
                    f"model {i}: mass {total:.12g} at probe {j} deviates from 1")
        if max_density[i] > model.density_bound * (1.0 + 1e-9):
            violations.append(
                f"model {i}: observed density {max_density[i]:.12g} exceeds "
                f"its bound {model.density_bound:.12g}")
        if max_density[i] > bound * (1.0 + 1e-9):
            violations.append(
                f"model {i}: observed density {max_density[i]:.12g} exceeds "
                f"the class bound {bound:.12g}")

    total_weight = float(weights.sum()) if model_class.is_finite else model_class.weight_sum
    if total_weight > 1.0 + 1e-9:
        violations.append(f"weights sum to {total_weight!r} > 1")
    return ClassValidationReport(
        max_density=max_density,
        integrals=integrals,
        weight_sum=total_weight,
        semimeasure=total_weight < 1.0 - 1e-9,
        violations=violations,
    )
