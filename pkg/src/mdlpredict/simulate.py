"""Monte Carlo harness: stream generation, the online loop, bound checks.

A scenario fixes a model class, the true member generating outputs, an
input process, a horizon, and a run count.  Each run draws its streams
from an independent seeded substream, walks the online loop recording
per-step distances into a LossLedger, and the harness averages the
cumulative sums against the theoretical bounds implied by the true
model's prior weight.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .metrics import (
    LEDGER_COLUMNS,
    LossLedger,
    hellinger_sq,
    kl_divergence,
)
from .models import InputToken, ModelClass
from .predictors import (
    PredictorState,
    bayes_predict,
    dynamic_predict,
    mdl_select,
    model_density,
    normalize,
    penalized_sse_select,
    static_predict,
    update,
)
from .quadrature import QuadratureSpec

PREDICTOR_NAMES = ("bayes", "static", "dynamic", "normalized")

# bound formulas as functions of the true model's prior weight w
_BOUND_FORMULAS = {
    "h2_mu_xi": lambda w: math.log(1.0 / w),
    "h2_mu_rhobar": lambda w: 1.0 / w + math.log(1.0 / w),
    "h2_rhobar_rho": lambda w: 2.0 / w,
    "h2_rho_static": lambda w: 3.0 / w,
    "h2_mu_static": lambda w: 21.0 / w,
    "kl_mu_rhobar": lambda w: 1.0 / w + math.log(1.0 / w),
}

# which enabled predictors each ledger column requires
_COLUMN_NEEDS = {
    "h2_mu_xi": {"bayes"},
    "h2_mu_rhobar": {"normalized"},
    "h2_rhobar_rho": {"normalized", "dynamic"},
    "h2_rho_static": {"dynamic", "static"},
    "h2_mu_static": {"static"},
    "kl_mu_rhobar": {"normalized"},
}


class SimulationError(RuntimeError):
    """A run failed; carries the run id and 1-based step."""

    def __init__(self, message: str, run_id: int, step: int):
        super().__init__(message)
        self.run_id = run_id
        self.step = step


@dataclass(frozen=True)
class IIDUniform:
    """Inputs drawn independently and uniformly from [low, high]."""

    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"need low < high, got [{self.low}, {self.high}]")

    def stream(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=horizon)


@dataclass(frozen=True)
class FixedCycle:
    """Deterministic inputs cycling through a fixed list of values."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError("fixed cycle needs at least one value")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def stream(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        reps = -(-horizon // len(self.values))
        return np.tile(np.asarray(self.values), reps)[:horizon]


@dataclass(frozen=True)
class GaussianWalk:
    """Random-walk inputs: x_t = start + sum of N(0, step^2) increments."""

    step: float = 0.25
    start: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.step) and self.step > 0):
            raise ValueError(f"step must be positive, got {self.step!r}")

    def stream(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        return self.start + np.cumsum(rng.normal(0.0, self.step, size=horizon))


@dataclass(frozen=True)
class Scenario:
    """A repeatable experiment: class, true member, inputs, horizon, runs."""

    name: str
    model_class: ModelClass
    true_model_index: int
    input_process: object
    horizon: int
    runs: int
    seed: int
    predictors_enabled: tuple[str, ...] = ("bayes", "static")

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        if not self.model_class.ensure(self.true_model_index + 1) or self.true_model_index < 0:
            raise ValueError(
                f"true_model_index {self.true_model_index} is not a valid "
                "index into the model class")
        bad = set(self.predictors_enabled) - set(PREDICTOR_NAMES)
        if bad:
            raise ValueError(
                f"unknown predictors {sorted(bad)}; "
                f"choose from {list(PREDICTOR_NAMES)}")
        if not self.predictors_enabled:
            raise ValueError("at least one predictor must be enabled")

    @property
    def true_model(self):
        return self.model_class.model(self.true_model_index)

    @property
    def w_mu(self) -> float:
        return self.model_class.weight(self.true_model_index)

    def enabled_columns(self) -> tuple[str, ...]:
        on = set(self.predictors_enabled)
        return tuple(c for c in LEDGER_COLUMNS if _COLUMN_NEEDS[c] <= on)


def generate_stream(scenario: Scenario, run_id: int):
    """Draw (x_t, y_t) for one run; fully determined by (seed, run_id)."""
    rng = np.random.default_rng((scenario.seed, run_id))
    payloads = scenario.input_process.stream(rng, scenario.horizon)
    xs = tuple(InputToken(float(p), t) for t, p in enumerate(payloads, start=1))
    mu = scenario.true_model
    ys = tuple(mu.sample(x, rng) for x in xs)
    return xs, ys


def _record_checked(ledger: LossLedger, t: int, name: str, value: float,
                    floor: float = -1e-12) -> None:
    # Hellinger integrands are squares, so those columns cannot go
    # negative; KL of near-identical densities can, by a few multiples of
    # the quadrature tolerance.  Clamp noise, reject anything larger.
    if not math.isfinite(value) or value < floor:
        raise ValueError(f"{name} at step {t} is {value!r}, expected a "
                         "finite non-negative distance")
    if name == "h2_mu_xi" and value > 2.0 + 1e-9:
        raise ValueError(f"h2_mu_xi at step {t} is {value!r} > 2")
    ledger.record(t, name, max(value, 0.0))


def run_online(scenario: Scenario, run_id: int,
               quad: QuadratureSpec | None = None) -> LossLedger:
    """Walk one run: predict at each x_t, score distances, then absorb y_t."""
    quad = quad or QuadratureSpec()
    xs, ys = generate_stream(scenario, run_id)
    state = PredictorState.initial(scenario.model_class)
    mu = scenario.true_model
    ledger = LossLedger.empty(run_id, scenario.horizon)
    on = set(scenario.predictors_enabled)
    need_envelope = bool(on & {"dynamic", "normalized"})

    for t in range(1, scenario.horizon + 1):
        x, y = xs[t - 1], ys[t - 1]
        try:
            mu_density = model_density(mu, x)
            static_density = static_predict(state, x) if "static" in on else None
            if "bayes" in on:
                mix = bayes_predict(state, x)
                _record_checked(ledger, t, "h2_mu_xi",
                                hellinger_sq(mu_density, mix, quad))
            if static_density is not None:
                _record_checked(ledger, t, "h2_mu_static",
                                hellinger_sq(mu_density, static_density, quad))
            if need_envelope:
                envelope = dynamic_predict(state, x, quad)
                normalized = normalize(envelope)
                if "normalized" in on:
                    _record_checked(ledger, t, "h2_mu_rhobar",
                                    hellinger_sq(mu_density, normalized, quad))
                    _record_checked(ledger, t, "kl_mu_rhobar",
                                    kl_divergence(mu_density, normalized, quad),
                                    floor=-100.0 * quad.abs_tol)
                    if "dynamic" in on:
                        _record_checked(ledger, t, "h2_rhobar_rho",
                                        hellinger_sq(normalized, envelope, quad))
                if "dynamic" in on and static_density is not None:
                    _record_checked(ledger, t, "h2_rho_static",
                                    hellinger_sq(envelope, static_density, quad))
            state = update(state, x, y)
        except SimulationError:
            raise
        except Exception as exc:
            raise SimulationError(
                f"run {run_id} failed at step {t}: {exc}", run_id, t) from exc
    return ledger


@dataclass(frozen=True)
class BoundQuantity:
    """One cumulative quantity averaged over runs against its bound."""

    name: str
    mean: float
    std_error: float
    bound: float
    passed: bool | None

    @property
    def slack(self) -> float:
        return self.bound - self.mean

    @property
    def enabled(self) -> bool:
        return self.passed is not None


@dataclass
class BoundReport:
    """Monte Carlo aggregate of cumulative distances vs theoretical bounds."""

    scenario_name: str
    runs: int
    horizon: int
    w_mu: float
    quantities: dict[str, BoundQuantity]
    tail_stats: np.ndarray = field(repr=False)  # per-run max late-step h2_mu_static
    ledgers: list[LossLedger] = field(repr=False, default_factory=list)

    @property
    def all_pass(self) -> bool:
        return all(q.passed for q in self.quantities.values() if q.enabled)

    def tail_fraction_below(self, threshold: float) -> float:
        """Fraction of runs whose late-step static loss stays below threshold."""
        if np.all(np.isnan(self.tail_stats)):
            return math.nan
        return float(np.mean(self.tail_stats < threshold))


def _aggregate(scenario: Scenario, ledgers: list[LossLedger],
               columns=LEDGER_COLUMNS, bound_formulas=None,
               tail_column: str = "h2_mu_static") -> BoundReport:
    bound_formulas = bound_formulas or _BOUND_FORMULAS
    w = scenario.w_mu
    m = len(ledgers)
    quantities = {}
    for name in columns:
        sums = np.array([led.cumulative(name) for led in ledgers])
        formula = bound_formulas.get(name)
        bound = formula(w) if formula else math.nan
        if np.all(np.isnan(sums)):
            quantities[name] = BoundQuantity(name, math.nan, math.nan, bound, None)
            continue
        mean = float(np.mean(sums))
        se = float(np.std(sums, ddof=1) / math.sqrt(m)) if m > 1 else math.nan
        # epsilon keeps exactly-zero bounds (prior weight 1) from failing
        # on accumulated quadrature roundoff
        passed = (mean <= bound + 1e-9) if math.isfinite(bound) else None
        quantities[name] = BoundQuantity(name, mean, se, bound, passed)

    half = scenario.horizon // 2
    tails = []
    for led in ledgers:
        col = led.column(tail_column)[half:]
        tails.append(math.nan if np.all(np.isnan(col)) else float(np.max(col)))
    return BoundReport(scenario.name, m, scenario.horizon, w, quantities,
                       np.array(tails), ledgers)


def _run_one(args) -> LossLedger:
    scenario, run_id, quad = args
    return run_online(scenario, run_id, quad)


def worker_count() -> int:
    """Worker processes for Monte Carlo runs, from MDLPREDICT_WORKERS."""
    raw = os.environ.get("MDLPREDICT_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"MDLPREDICT_WORKERS must be an integer, got {raw!r}")
    return max(n, 1)


def monte_carlo(scenario: Scenario, quad: QuadratureSpec | None = None,
                max_workers: int | None = None) -> BoundReport:
    """Average cumulative distances over all runs and check the bounds.

    Results are collected in run-id order, so the report is identical for
    any worker count.
    """
    quad = quad or QuadratureSpec()
    if max_workers is None:
        max_workers = worker_count()
    jobs = [(scenario, run_id, quad) for run_id in range(scenario.runs)]
    if max_workers > 1 and scenario.runs > 1 and scenario.model_class.is_finite:
        chunk = -(-scenario.runs // (4 * max_workers))
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            ledgers = list(pool.map(_run_one, jobs, chunksize=chunk))
    else:
        ledgers = [_run_one(job) for job in jobs]
    return _aggregate(scenario, ledgers)


@dataclass
class Corollary2Report:
    """Selection-equivalence and closed-form static-loss bound check."""

    scenario_name: str
    runs: int
    prefixes_checked: int
    mismatches: int
    mean_hellinger_sum: float
    std_error: float
    bound: float
    convergence_fraction: float
    per_run_sums: np.ndarray = field(repr=False)

    @property
    def match_fraction(self) -> float:
        if self.prefixes_checked == 0:
            return math.nan
        return 1.0 - self.mismatches / self.prefixes_checked

    @property
    def passed(self) -> bool:
        return self.mismatches == 0 and self.mean_hellinger_sum <= self.bound


def check_corollary2(scenario: Scenario,
                     check_every_prefix: bool = True) -> Corollary2Report:
    """Verify the least-squares view of static MDL selection.

    (a) the penalized-SSE rule picks the same model as the weighted
    maximum-likelihood rule on every history prefix; (b) the cumulative
    equal-sigma closed-form Hellinger loss of the selected mean function
    stays below 21 / w_mu on average; (c) fraction of runs whose
    last-quarter selections all equal the true model.
    """
    mc = scenario.model_class
    sigma = mc.common_sigma()
    mu = scenario.true_model
    w = scenario.w_mu
    denom = 8.0 * sigma * sigma

    sums = np.zeros(scenario.runs)
    prefixes = 0
    mismatches = 0
    converged_runs = 0
    last_quarter = scenario.horizon - scenario.horizon // 4
    for run_id in range(scenario.runs):
        xs, ys = generate_stream(scenario, run_id)
        state = PredictorState.initial(mc)
        total = 0.0
        all_true_late = True
        for t in range(1, scenario.horizon + 1):
            x = xs[t - 1]
            idx, _ = mdl_select(state)
            if check_every_prefix:
                prefixes += 1
                if penalized_sse_select(mc, xs[:t - 1], ys[:t - 1]) != idx:
                    mismatches += 1
            delta = mc.model(idx).mean(x) - mu.mean(x)
            total += 2.0 * (1.0 - math.exp(-(delta * delta) / denom))
            if t > last_quarter and idx != scenario.true_model_index:
                all_true_late = False
            state = update(state, x, ys[t - 1])
        if check_every_prefix:
            prefixes += 1
            if penalized_sse_select(mc, xs, ys) != mdl_select(state)[0]:
                mismatches += 1
        sums[run_id] = total
        converged_runs += all_true_late

    se = (float(np.std(sums, ddof=1) / math.sqrt(scenario.runs))
          if scenario.runs > 1 else math.nan)
    return Corollary2Report(
        scenario_name=scenario.name, runs=scenario.runs,
        prefixes_checked=prefixes, mismatches=mismatches,
        mean_hellinger_sum=float(np.mean(sums)), std_error=se,
        bound=21.0 / w, convergence_fraction=converged_runs / scenario.runs,
        per_run_sums=sums)
