"""Experiment configuration: YAML parsing, validation, scenario assembly.

A config file names one or more scenarios plus optional global settings:

    output_dir: results
    seed: 20260823            # fallback for scenarios without their own
    quadrature: {abs_tol: 1.0e-9, max_depth: 50, domain_padding: 12.0}
    scenarios:
      standard-k10:
        kind: regression      # or classification
        horizon: 400
        runs: 200
        seed: 7
        predictors: [bayes, static]
        true_model_index: 0
        input_process: {kind: iid-uniform, low: -1.0, high: 1.0}
        model_class:
          type: linear-gaussian
          sigma: 1.0
          prior: uniform      # or code-length
          members:
            - {slope: 0, intercept: 0}
            - {slope: "1/2", intercept: -1}

Tabular classes use ``type: tabular`` with ``labels``, ``prior`` (uniform
or an explicit non-increasing ``weights`` list), and members that carry
either a single ``probs`` row or per-payload ``tables``.  All validation
errors are raised as ConfigError with the offending scenario named.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .classify import ClassificationScenario
from .models import (
    ConstantTable,
    LookupTable,
    ModelClass,
    ModelClassError,
    TabularClassificationModel,
    build_linear_rational_class,
)
from .quadrature import QuadratureSpec
from .simulate import (
    FixedCycle,
    GaussianWalk,
    IIDUniform,
    PREDICTOR_NAMES,
    Scenario,
)


class ConfigError(ValueError):
    """A configuration file failed to parse or validate."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated config: built scenarios plus output and quadrature settings."""

    path: Path
    scenarios: dict[str, Scenario] = field(repr=False)
    output_dir: Path = Path("results")
    quad: QuadratureSpec = QuadratureSpec()

    def scenario(self, name: str) -> Scenario:
        try:
            return self.scenarios[name]
        except KeyError:
            known = ", ".join(sorted(self.scenarios)) or "none"
            raise ConfigError(
                f"unknown scenario {name!r}; defined scenarios: {known}") from None


def _expect_mapping(value, what: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{what} must be a mapping, got {type(value).__name__}")
    return value


def _reject_unknown(block: dict, allowed: set[str], what: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(
            f"{what} has unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}")


def _int_field(block: dict, key: str, what: str, minimum: int | None = None,
               default=None):
    value = block.get(key, default)
    if value is None:
        raise ConfigError(f"{what}: missing required key {key!r}")
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{what}: {key} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        if key == "horizon":
            raise ConfigError(f"{what}: horizon must be >= 1, got {value}")
        raise ConfigError(f"{what}: {key} must be >= {minimum}, got {value}")
    return value


def _number_field(block: dict, key: str, what: str, default=None):
    value = block.get(key, default)
    if value is None:
        raise ConfigError(f"{what}: missing required key {key!r}")
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ConfigError(f"{what}: {key} must be a number, got {value!r}")
    return float(value)


def _build_input_process(block, what: str):
    block = _expect_mapping(block, f"{what}: input_process")
    kind = block.get("kind")
    if kind == "iid-uniform":
        _reject_unknown(block, {"kind", "low", "high"}, f"{what}: input_process")
        low = _number_field(block, "low", what, default=-1.0)
        high = _number_field(block, "high", what, default=1.0)
        if not low < high:
            raise ConfigError(f"{what}: iid-uniform needs low < high, "
                              f"got [{low}, {high}]")
        return IIDUniform(low, high)
    if kind == "fixed-cycle":
        _reject_unknown(block, {"kind", "values"}, f"{what}: input_process")
        values = block.get("values")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"{what}: fixed-cycle needs a nonempty values list")
        for v in values:
            if isinstance(v, bool) or not isinstance(v, numbers.Real):
                raise ConfigError(f"{what}: fixed-cycle value {v!r} is not a number")
        return FixedCycle(tuple(float(v) for v in values))
    if kind == "gaussian-walk":
        _reject_unknown(block, {"kind", "step", "start"}, f"{what}: input_process")
        step = _number_field(block, "step", what, default=0.25)
        start = _number_field(block, "start", what, default=0.0)
        if step <= 0:
            raise ConfigError(f"{what}: gaussian-walk step must be positive")
        return GaussianWalk(step, start)
    raise ConfigError(
        f"{what}: input_process kind must be one of iid-uniform, fixed-cycle, "
        f"gaussian-walk; got {kind!r}")


def _coef(member: dict, key: str, what: str):
    if key not in member:
        raise ConfigError(f"{what}: member missing {key!r}")
    value = member[key]
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(
            f"{what}: {key} must be a number or rational string, got {value!r}")
    return value


def _build_linear_class(block: dict, what: str) -> ModelClass:
    _reject_unknown(block, {"type", "sigma", "prior", "members"}, what)
    sigma = _number_field(block, "sigma", what)
    prior = block.get("prior", "uniform")
    members = block.get("members")
    if not isinstance(members, list) or not members:
        raise ConfigError(f"{what}: members must be a nonempty list")
    grid = []
    for member in members:
        member = _expect_mapping(member, f"{what}: member")
        _reject_unknown(member, {"slope", "intercept"}, f"{what}: member")
        grid.append((_coef(member, "slope", what), _coef(member, "intercept", what)))
    try:
        return build_linear_rational_class(grid, sigma, prior)
    except (ModelClassError, ValueError) as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def _prob_row(raw, labels: int, what: str) -> tuple[float, ...]:
    if not isinstance(raw, list) or len(raw) != labels:
        raise ConfigError(f"{what}: expected a list of {labels} probabilities")
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, numbers.Real):
            raise ConfigError(f"{what}: probability {v!r} is not a number")
    return tuple(float(v) for v in raw)


def _build_tabular_class(block: dict, what: str) -> ModelClass:
    _reject_unknown(block, {"type", "labels", "prior", "weights", "members"}, what)
    labels = _int_field(block, "labels", what, minimum=2)
    members = block.get("members")
    if not isinstance(members, list) or not members:
        raise ConfigError(f"{what}: members must be a nonempty list")
    models = []
    for i, member in enumerate(members):
        member = _expect_mapping(member, f"{what}: member {i}")
        _reject_unknown(member, {"probs", "tables", "name"}, f"{what}: member {i}")
        name = member.get("name", f"table-{i}")
        if ("probs" in member) == ("tables" in member):
            raise ConfigError(
                f"{what}: member {i} needs exactly one of 'probs' or 'tables'")
        if "probs" in member:
            fn = ConstantTable(_prob_row(member["probs"], labels,
                                         f"{what}: member {i}"))
        else:
            tables = _expect_mapping(member["tables"], f"{what}: member {i} tables")
            entries = tuple(
                (float(payload), _prob_row(row, labels,
                                           f"{what}: member {i} payload {payload!r}"))
                for payload, row in tables.items())
            fn = LookupTable(entries)
        try:
            models.append(TabularClassificationModel(fn, labels, name=name))
        except ModelClassError as exc:
            raise ConfigError(f"{what}: member {i}: {exc}") from exc

    prior = block.get("prior", "uniform")
    if prior == "uniform":
        weights = [1.0 / len(models)] * len(models)
    elif prior == "weights":
        raw = block.get("weights")
        if not isinstance(raw, list) or len(raw) != len(models):
            raise ConfigError(
                f"{what}: weights must list one value per member")
        weights = [_number_field({"w": v}, "w", what) for v in raw]
    else:
        raise ConfigError(f"{what}: prior must be 'uniform' or 'weights', "
                          f"got {prior!r}")
    try:
        return ModelClass(list(zip(weights, models)))
    except ModelClassError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def _build_model_class(block, what: str) -> tuple[ModelClass, str]:
    block = _expect_mapping(block, f"{what}: model_class")
    kind = block.get("type")
    if kind == "linear-gaussian":
        return _build_linear_class(block, f"{what}: model_class"), "regression"
    if kind == "tabular":
        return _build_tabular_class(block, f"{what}: model_class"), "classification"
    raise ConfigError(
        f"{what}: model_class type must be 'linear-gaussian' or 'tabular', "
        f"got {kind!r}")


_SCENARIO_KEYS = {"kind", "horizon", "runs", "seed", "predictors",
                  "true_model_index", "input_process", "model_class"}


def _build_scenario(name: str, block: dict, root_seed) -> Scenario:
    what = f"scenario {name!r}"
    block = _expect_mapping(block, what)
    _reject_unknown(block, _SCENARIO_KEYS, what)

    model_class, inferred_kind = _build_model_class(block.get("model_class"), what)
    kind = block.get("kind", inferred_kind)
    if kind not in ("regression", "classification"):
        raise ConfigError(f"{what}: kind must be 'regression' or "
                          f"'classification', got {kind!r}")
    if kind != inferred_kind:
        raise ConfigError(f"{what}: kind {kind!r} does not match the "
                          f"{inferred_kind} model class")

    horizon = _int_field(block, "horizon", what, minimum=1)
    runs = _int_field(block, "runs", what, minimum=1)
    seed = block.get("seed", root_seed)
    if seed is None:
        raise ConfigError(f"{what}: no seed given and no global seed set")
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"{what}: seed must be an integer, got {seed!r}")
    true_index = _int_field(block, "true_model_index", what, minimum=0, default=0)

    predictors = block.get("predictors", ["bayes", "static"])
    if not isinstance(predictors, list) or not predictors:
        raise ConfigError(f"{what}: predictors must be a nonempty list")
    bad = set(predictors) - set(PREDICTOR_NAMES)
    if bad:
        raise ConfigError(f"{what}: unknown predictors {sorted(bad)}; "
                          f"choose from {list(PREDICTOR_NAMES)}")

    process = _build_input_process(block.get("input_process"), what)
    cls = ClassificationScenario if kind == "classification" else Scenario
    try:
        return cls(name=name, model_class=model_class,
                   true_model_index=true_index, input_process=process,
                   horizon=horizon, runs=runs, seed=seed,
                   predictors_enabled=tuple(predictors))
    except (ValueError, ModelClassError) as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML experiment config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        # the YAML error text carries line/column anchors
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    raw = _expect_mapping(raw, f"config {path}")
    _reject_unknown(raw, {"output_dir", "seed", "quadrature", "scenarios"},
                    f"config {path}")

    root_seed = raw.get("seed")
    if root_seed is not None and (isinstance(root_seed, bool)
                                  or not isinstance(root_seed, int)):
        raise ConfigError(f"config {path}: seed must be an integer")

    quad = QuadratureSpec()
    if "quadrature" in raw:
        q = _expect_mapping(raw["quadrature"], f"config {path}: quadrature")
        _reject_unknown(q, {"abs_tol", "max_depth", "domain_padding"},
                        f"config {path}: quadrature")
        try:
            quad = QuadratureSpec(
                abs_tol=q.get("abs_tol", QuadratureSpec.abs_tol),
                max_depth=q.get("max_depth", QuadratureSpec.max_depth),
                domain_padding=q.get("domain_padding",
                                     QuadratureSpec.domain_padding))
        except ValueError as exc:
            raise ConfigError(f"config {path}: quadrature: {exc}") from exc

    scenarios_block = raw.get("scenarios")
    if not scenarios_block:
        raise ConfigError(f"config {path}: no scenarios defined")
    scenarios_block = _expect_mapping(scenarios_block, f"config {path}: scenarios")
    scenarios = {str(name): _build_scenario(str(name), block, root_seed)
                 for name, block in scenarios_block.items()}

    output_dir = raw.get("output_dir", "results")
    if not isinstance(output_dir, str):
        raise ConfigError(f"config {path}: output_dir must be a string")
    return ExperimentConfig(path=path, scenarios=scenarios,
                            output_dir=Path(output_dir), quad=quad)
