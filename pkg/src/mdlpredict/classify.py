"""Label-space specialisation: exact finite-sum predictions and bounds.

Over a finite label set every predictive object is a probability vector
and all distances are finite sums, so no quadrature is involved.  The
module mirrors the regression harness (same scenario shape, ledger and
report types) and adds an exact enumeration oracle that walks every
outcome sequence of a short horizon to compute expected losses in closed
form.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .metrics import LossLedger
from .models import InputToken, ModelClassError
from .predictors import PredictorState, mdl_select, update
from .simulate import (
    BoundQuantity,
    BoundReport,
    FixedCycle,
    Scenario,
    SimulationError,
    generate_stream,
    worker_count,
)

CLASS_LEDGER_COLUMNS = (
    "h2_bayes", "quad_bayes",
    "h2_static", "quad_static",
    "h2_dynamic", "quad_dynamic",
    "h2_normalized", "quad_normalized",
)

# only the static sums carry a guaranteed bound; the rest are diagnostics
_CLASS_BOUND_FORMULAS = {
    "h2_static": lambda w: 21.0 / w,
    "quad_static": lambda w: 21.0 / w,
}

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ClassificationScenario(Scenario):
    """Scenario whose class members all emit distributions over one label set."""

    def __post_init__(self):
        super().__post_init__()
        if not self.model_class.all_tabular():
            raise ModelClassError(
                "classification scenarios need tabular models throughout")
        counts = {m.label_count for m in self.model_class.models}
        if len(counts) != 1:
            raise ModelClassError(
                f"members disagree on label count: {sorted(counts)}")

    @property
    def label_count(self) -> int:
        return self.model_class.model(0).label_count

    def enabled_columns(self) -> tuple[str, ...]:
        on = set(self.predictors_enabled)
        return tuple(c for c in CLASS_LEDGER_COLUMNS
                     if c.split("_", 1)[1] in on)


def _step_table(state: PredictorState, x) -> np.ndarray:
    return np.stack([m.prob_vector(x) for m in state.model_class.models])


def _predict_from_table(state: PredictorState, table: np.ndarray,
                        predictor: str) -> np.ndarray:
    if predictor == "bayes":
        vec = state.posterior_weights() @ table
    elif predictor == "static":
        vec = table[mdl_select(state)[0]].copy()
    elif predictor in ("dynamic", "normalized"):
        _, log_best = mdl_select(state)
        ratios = np.exp(state.log_scores - log_best)
        vec = np.max(ratios[:, None] * table, axis=0)
        if vec.sum() < 1.0 - _SUM_TOL:
            raise AssertionError(
                f"label envelope mass {vec.sum()!r} fell below 1")
        if predictor == "normalized":
            vec = vec / vec.sum()
    else:
        raise ValueError(f"unknown predictor {predictor!r}")
    if np.any(vec < 0):
        raise AssertionError("prediction vector has negative entries")
    if predictor != "dynamic" and abs(float(vec.sum()) - 1.0) > _SUM_TOL:
        raise AssertionError(
            f"{predictor} prediction sums to {vec.sum()!r}, not 1")
    return vec


def classify_predict(state: PredictorState, x, predictor: str) -> np.ndarray:
    """Exact next-label probability vector for one predictor at input x."""
    return _predict_from_table(state, _step_table(state, x), predictor)


def _discrete_losses(mu_vec: np.ndarray, vec: np.ndarray) -> tuple[float, float]:
    h2 = float(np.sum((np.sqrt(mu_vec) - np.sqrt(vec)) ** 2))
    quad = float(np.sum((mu_vec - vec) ** 2))
    return h2, quad


def run_classification_online(scenario: ClassificationScenario,
                              run_id: int) -> tuple[LossLedger, float]:
    """One run's per-step label losses plus its final-step static gap."""
    xs, ys = generate_stream(scenario, run_id)
    state = PredictorState.initial(scenario.model_class)
    mu = scenario.true_model
    ledger = LossLedger.empty(run_id, scenario.horizon, CLASS_LEDGER_COLUMNS)
    on = [p for p in ("bayes", "static", "dynamic", "normalized")
          if p in scenario.predictors_enabled]
    final_gap = math.nan
    for t in range(1, scenario.horizon + 1):
        x, y = xs[t - 1], ys[t - 1]
        try:
            mu_vec = mu.prob_vector(x)
            table = _step_table(state, x)
            for predictor in on:
                vec = _predict_from_table(state, table, predictor)
                h2, quad = _discrete_losses(mu_vec, vec)
                ledger.record(t, f"h2_{predictor}", h2)
                ledger.record(t, f"quad_{predictor}", quad)
                if predictor == "static" and t == scenario.horizon:
                    final_gap = float(np.max(np.abs(mu_vec - vec)))
            state = update(state, x, y)
        except SimulationError:
            raise
        except Exception as exc:
            raise SimulationError(
                f"run {run_id} failed at step {t}: {exc}", run_id, t) from exc
    return ledger, final_gap


def _class_run_one(args):
    scenario, run_id = args
    return run_classification_online(scenario, run_id)


def run_classification(scenario: ClassificationScenario,
                       max_workers: int | None = None) -> BoundReport:
    """Monte Carlo label-loss sums against the 21/w static bounds.

    The report's tail statistic is each run's final-step max absolute
    probability gap between the true model and the static prediction.
    """
    if max_workers is None:
        max_workers = worker_count()
    jobs = [(scenario, run_id) for run_id in range(scenario.runs)]
    if max_workers > 1 and scenario.runs > 1 and scenario.model_class.is_finite:
        chunk = -(-scenario.runs // (4 * max_workers))
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(_class_run_one, jobs, chunksize=chunk))
    else:
        results = [_class_run_one(job) for job in jobs]
    ledgers = [r[0] for r in results]
    final_gaps = np.array([r[1] for r in results])

    w = scenario.w_mu
    m = len(ledgers)
    quantities = {}
    for name in CLASS_LEDGER_COLUMNS:
        sums = np.array([led.cumulative(name) for led in ledgers])
        formula = _CLASS_BOUND_FORMULAS.get(name)
        bound = formula(w) if formula else math.nan
        if np.all(np.isnan(sums)):
            quantities[name] = BoundQuantity(name, math.nan, math.nan, bound, None)
            continue
        mean = float(np.mean(sums))
        se = float(np.std(sums, ddof=1) / math.sqrt(m)) if m > 1 else math.nan
        passed = (mean <= bound) if math.isfinite(bound) else None
        quantities[name] = BoundQuantity(name, mean, se, bound, passed)
    return BoundReport(scenario.name, m, scenario.horizon, w, quantities,
                       final_gaps, ledgers)


def enumerate_expected_sums(scenario: ClassificationScenario,
                            predictor: str = "static") -> tuple[float, float]:
    """Exact expected cumulative (Hellinger, quadratic) label-loss sums.

    Walks every outcome sequence of the horizon, weighting each prefix by
    its probability under the true model.  Requires a fixed-cycle input
    process (so the x stream is deterministic) and a horizon small enough
    to enumerate: label_count ** horizon sequences, horizon <= 8.
    """
    if not isinstance(scenario.input_process, FixedCycle):
        raise ValueError("exact enumeration needs a fixed-cycle input process")
    if scenario.horizon > 8:
        raise ValueError(
            f"horizon {scenario.horizon} too large to enumerate (max 8)")
    rng = np.random.default_rng(0)  # fixed cycle ignores it
    payloads = scenario.input_process.stream(rng, scenario.horizon)
    xs = [InputToken(float(p), t) for t, p in enumerate(payloads, start=1)]
    mu = scenario.true_model
    labels = range(scenario.label_count)

    totals = [0.0, 0.0]

    def walk(state: PredictorState, t: int, prob: float) -> None:
        if t == scenario.horizon:
            return
        x = xs[t]
        mu_vec = mu.prob_vector(x)
        vec = classify_predict(state, x, predictor)
        h2, quad = _discrete_losses(mu_vec, vec)
        totals[0] += prob * h2
        totals[1] += prob * quad
        for y in labels:
            p_y = float(mu_vec[y])
            if p_y > 0.0:
                walk(update(state, x, y), t + 1, prob * p_y)

    walk(PredictorState.initial(scenario.model_class), 0, 1.0)
    return totals[0], totals[1]
