"""Command-line interface: run scenarios, summarise results, self-test.

Subcommands:

* ``run --config cfg.yaml --scenario name [--seed N] [--runs M]
  [--horizon T] [--out dir] [--predictors a,b]`` executes one scenario's
  Monte Carlo, writes ``<name>_ledger.csv`` (fixed header, one row per
  run and step), ``<name>_bounds.csv`` and ``<name>_summary.txt``.
* ``report --in dir [--svg]`` re-reads emitted ledgers and prints the
  aggregate table, optionally rendering cumulative-trajectory SVG charts.
* ``selftest`` runs the built-in numerical cross-checks.

Exit codes: 0 success, 2 bound-check or self-test violation, 1 any
execution or configuration error.  MDLPREDICT_WORKERS sets the number of
worker processes for Monte Carlo runs (default 1).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from .charts import render_line_chart
from .classify import (
    CLASS_LEDGER_COLUMNS,
    ClassificationScenario,
    enumerate_expected_sums,
    run_classification,
)
from .config import ConfigError, load_config
from .metrics import (
    LEDGER_COLUMNS,
    abs_distance,
    hellinger_sq_gaussian,
    kl_gaussian,
)
from .models import (
    ConstantTable,
    ModelClass,
    TabularClassificationModel,
    build_linear_rational_class,
    log_joint,
)
from .predictors import (
    PredictorState,
    dynamic_predict,
    gaussian_density,
    normalize,
    static_predict,
    update,
)
from .quadrature import QuadratureError, QuadratureSpec, adaptive_simpson
from .simulate import (
    BoundReport,
    FixedCycle,
    IIDUniform,
    Scenario,
    SimulationError,
    generate_stream,
    monte_carlo,
)

REGRESSION_HEADER = "run_id,t," + ",".join(LEDGER_COLUMNS)
CLASSIFICATION_HEADER = "run_id,t," + ",".join(CLASS_LEDGER_COLUMNS)
BOUNDS_HEADER = "quantity,mean,std_error,bound,slack,status"


def _fmt17(value: float) -> str:
    return f"{float(value):.17g}"


def write_ledger_csv(path: Path, ledgers, header: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for ledger in ledgers:
            for run_id, t, *values in ledger.rows():
                fh.write(f"{run_id},{t}," +
                         ",".join(_fmt17(v) for v in values) + "\n")


def _status(quantity) -> str:
    if quantity.passed is None:
        return "skipped"
    return "pass" if quantity.passed else "FAIL"


def write_bounds_csv(path: Path, report: BoundReport) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(BOUNDS_HEADER + "\n")
        for q in report.quantities.values():
            fh.write(f"{q.name},{_fmt17(q.mean)},{_fmt17(q.std_error)},"
                     f"{_fmt17(q.bound)},{_fmt17(q.slack)},{_status(q)}\n")


def summary_text(scenario: Scenario, report: BoundReport) -> str:
    kind = ("classification" if isinstance(scenario, ClassificationScenario)
            else "regression")
    lines = [
        f"scenario: {report.scenario_name} ({kind})",
        f"runs: {report.runs}  horizon: {report.horizon}  "
        f"seed: {scenario.seed}",
        f"predictors: {', '.join(scenario.predictors_enabled)}",
        f"true model prior weight w_mu = {report.w_mu:.12g}",
        "",
        f"{'quantity':<16}{'mean':>14}{'std err':>12}{'bound':>14}"
        f"{'slack':>14}  status",
    ]
    for q in report.quantities.values():
        lines.append(
            f"{q.name:<16}{q.mean:>14.6g}{q.std_error:>12.3g}"
            f"{q.bound:>14.6g}{q.slack:>14.6g}  {_status(q)}")
    frac = report.tail_fraction_below
    if not np.all(np.isnan(report.tail_stats)):
        if kind == "regression":
            lines.append("")
            lines.append(
                "late-run convergence: fraction of runs with "
                f"max late-step h2(mu, static) < 0.01: {frac(0.01):.4g}")
        else:
            lines.append("")
            lines.append(
                "final-step convergence: fraction of runs with "
                f"max label gap |mu - static| < 0.05: {frac(0.05):.4g}")
    lines.append("")
    lines.append(f"overall: {'PASS' if report.all_pass else 'FAIL'}")
    return "\n".join(lines) + "\n"


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.runs is not None:
        changes["runs"] = args.runs
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if args.predictors is not None:
        names = tuple(p.strip() for p in args.predictors.split(",") if p.strip())
        changes["predictors_enabled"] = names
    return dataclasses.replace(scenario, **changes) if changes else scenario


def run_command(args) -> int:
    config = load_config(args.config)
    scenario = _apply_overrides(config.scenario(args.scenario), args)
    out_dir = Path(args.out) if args.out else config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    if isinstance(scenario, ClassificationScenario):
        report = run_classification(scenario)
        header = CLASSIFICATION_HEADER
    else:
        report = monte_carlo(scenario, config.quad)
        header = REGRESSION_HEADER

    base = out_dir / scenario.name
    write_ledger_csv(Path(f"{base}_ledger.csv"), report.ledgers, header)
    write_bounds_csv(Path(f"{base}_bounds.csv"), report)
    text = summary_text(scenario, report)
    Path(f"{base}_summary.txt").write_text(text)
    sys.stdout.write(text)
    sys.stdout.write(f"wrote {base}_ledger.csv, {base}_bounds.csv, "
                     f"{base}_summary.txt\n")
    return 0 if report.all_pass else 2


def _read_ledger_csv(path: Path):
    """Header columns and {run_id: (T, C) value array} from one ledger CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        expected = {REGRESSION_HEADER: LEDGER_COLUMNS,
                    CLASSIFICATION_HEADER: CLASS_LEDGER_COLUMNS}
        joined = ",".join(header)
        if joined not in expected:
            raise ValueError(
                f"{path}: unrecognised ledger header {joined!r}")
        columns = expected[joined]
        rows = {}
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 2 + len(columns):
                raise ValueError(f"{path}: line {line_no}: expected "
                                 f"{2 + len(columns)} fields, got {len(row)}")
            try:
                run_id, t = int(row[0]), int(row[1])
                values = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise ValueError(f"{path}: line {line_no}: {exc}") from exc
            rows.setdefault(run_id, []).append((t, values))
    runs = {}
    for run_id, entries in rows.items():
        entries.sort(key=lambda e: e[0])
        runs[run_id] = np.array([v for _, v in entries])
    return columns, runs


def _read_bounds_csv(path: Path) -> dict[str, float]:
    bounds = {}
    if not path.exists():
        return bounds
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or ",".join(header) != BOUNDS_HEADER:
            raise ValueError(f"{path}: unrecognised bounds header")
        for row in reader:
            bounds[row[0]] = float(row[3])
    return bounds


def report_command(args) -> int:
    in_dir = Path(args.indir)
    ledger_paths = sorted(in_dir.glob("*_ledger.csv"))
    if not ledger_paths:
        sys.stderr.write(f"error: no *_ledger.csv files in {in_dir}\n")
        return 1
    for path in ledger_paths:
        prefix = path.name[:-len("_ledger.csv")]
        columns, runs = _read_ledger_csv(path)
        bounds = _read_bounds_csv(in_dir / f"{prefix}_bounds.csv")
        sys.stdout.write(f"{prefix}: {len(runs)} runs, "
                         f"{next(iter(runs.values())).shape[0]} steps\n")
        sys.stdout.write(f"{'quantity':<16}{'mean cumulative':>18}"
                         f"{'bound':>14}\n")
        for j, name in enumerate(columns):
            sums = np.array([values[:, j].sum() for values in runs.values()])
            if np.all(np.isnan(sums)):
                continue
            bound = bounds.get(name, math.nan)
            sys.stdout.write(f"{name:<16}{np.mean(sums):>18.6g}"
                             f"{bound:>14.6g}\n")
            if args.svg:
                series = [(f"run {rid}", np.nancumsum(values[:, j]))
                          for rid, values in sorted(runs.items())]
                svg = render_line_chart(
                    series, title=f"{prefix}: cumulative {name}",
                    bound=None if math.isnan(bound) else bound,
                    y_label=f"cumulative {name}")
                out = in_dir / f"{prefix}_{name}.svg"
                out.write_text(svg)
                sys.stdout.write(f"  chart: {out}\n")
        sys.stdout.write("\n")
    return 0


# -- selftest -----------------------------------------------------------


def _selftest_quadrature() -> tuple[bool, str]:
    spec = QuadratureSpec()
    mass, _ = adaptive_simpson(
        lambda ys: np.exp(-0.5 * ys * ys) / math.sqrt(2 * math.pi),
        -10.0, 10.0, abs_tol=spec.abs_tol, max_depth=spec.max_depth)
    moment, _ = adaptive_simpson(
        lambda ys: ys * ys * np.exp(-0.5 * ys * ys) / math.sqrt(2 * math.pi),
        -10.0, 10.0, abs_tol=spec.abs_tol, max_depth=spec.max_depth)
    err = max(abs(mass - 1.0), abs(moment - 1.0))
    return err < 1e-8, f"max deviation {err:.3g} on Gaussian moments"


def _random_gaussian_pairs(rng, count):
    for _ in range(count):
        m1, m2 = rng.uniform(-3, 3, size=2)
        s1, s2 = rng.uniform(0.3, 2.5, size=2)
        yield m1, s1, m2, s2


def _selftest_closed_forms() -> tuple[bool, str]:
    rng = np.random.default_rng(20260823)
    worst = 0.0
    for m1, s1, m2, s2 in _random_gaussian_pairs(rng, 200):
        p, q = gaussian_density(m1, s1), gaussian_density(m2, s2)

        def integrand(ys):
            return (np.exp(0.5 * p.log_pdf_fn(ys))
                    - np.exp(0.5 * q.log_pdf_fn(ys))) ** 2

        lo = min(m1 - 12 * s1, m2 - 12 * s2)
        hi = max(m1 + 12 * s1, m2 + 12 * s2)
        by_quad, _ = adaptive_simpson(integrand, lo, hi, abs_tol=1e-10,
                                      max_depth=50,
                                      breakpoints=np.array([m1, m2]))
        worst = max(worst, abs(by_quad - hellinger_sq_gaussian(m1, s1, m2, s2)))
    return worst < 1e-7, f"max |quadrature - closed form| = {worst:.3g}"


def _selftest_inequality_chain() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    violations = 0
    for m1, s1, m2, s2 in _random_gaussian_pairs(rng, 2000):
        p, q = gaussian_density(m1, s1), gaussian_density(m2, s2)
        h2 = hellinger_sq_gaussian(m1, s1, m2, s2)
        if h2 > kl_gaussian(m1, s1, m2, s2) + 1e-9:
            violations += 1
        if h2 > abs_distance(p, q) + 1e-9:
            violations += 1
    return violations == 0, f"{violations} violations in 2000 pairs"


def _selftest_dominance() -> tuple[bool, str]:
    grid = [(a, b) for a in (-1, 0, 1) for b in (0, "1/2")]
    mc = build_linear_rational_class(grid, sigma=1.0)
    scenario = Scenario(name="selftest", model_class=mc, true_model_index=0,
                        input_process=IIDUniform(-1, 1), horizon=25, runs=1,
                        seed=99,
                        predictors_enabled=("bayes", "static", "dynamic",
                                            "normalized"))
    xs, ys = generate_stream(scenario, 0)
    state = PredictorState.initial(mc)
    quad = QuadratureSpec()
    worst_gap = 0.0
    worst_mass = 0.0
    for t in range(scenario.horizon):
        x = xs[t]
        envelope = dynamic_predict(state, x, quad)
        rhobar = normalize(envelope)
        static = static_predict(state, x)
        probe = np.linspace(*envelope.quad_interval(2.0), 41)
        gap = float(np.max(static.log_pdf(probe) - envelope.log_pdf(probe)))
        worst_gap = max(worst_gap, gap)
        worst_mass = max(worst_mass, 1.0 - envelope.total_mass)
        lo, hi = rhobar.quad_interval(quad.domain_padding)
        mass, _ = adaptive_simpson(lambda v: rhobar.pdf(v), lo, hi,
                                   abs_tol=quad.abs_tol,
                                   max_depth=quad.max_depth,
                                   breakpoints=rhobar.breakpoints)
        worst_mass = max(worst_mass, abs(mass - 1.0))
        for i, (w, model) in enumerate(mc.entries):
            lhs = state.log_mdl
            rhs = math.log(w) + log_joint(model, state.xs, state.ys)
            if lhs < rhs - 1e-9:
                return False, f"weighted joint {i} beat the selected score"
        if state.log_mdl > state.log_mixture + 1e-12:
            return False, "selected score exceeded the mixture score"
        state = update(state, x, ys[t])
    ok = worst_gap <= 1e-12 and worst_mass <= 1e-6
    return ok, (f"envelope-vs-static max log gap {worst_gap:.3g}, "
                f"worst mass deviation {worst_mass:.3g}")


def _selftest_classification_oracle() -> tuple[bool, str]:
    mc = ModelClass([
        (0.5, TabularClassificationModel(ConstantTable((0.8, 0.2)), 2, name="a")),
        (0.5, TabularClassificationModel(ConstantTable((0.35, 0.65)), 2, name="b")),
    ])
    scenario = ClassificationScenario(
        name="selftest-oracle", model_class=mc, true_model_index=0,
        input_process=FixedCycle((0.0,)), horizon=3, runs=3000, seed=4242,
        predictors_enabled=("static",))
    exact_h2, exact_quad = enumerate_expected_sums(scenario, "static")
    report = run_classification(scenario)
    checks = []
    for name, exact in (("h2_static", exact_h2), ("quad_static", exact_quad)):
        q = report.quantities[name]
        checks.append(abs(q.mean - exact) <= 3.0 * q.std_error)
    detail = (f"h2 exact {exact_h2:.6f} vs mean {report.quantities['h2_static'].mean:.6f}"
              f" (SE {report.quantities['h2_static'].std_error:.6f})")
    return all(checks), detail


def selftest_command(_args) -> int:
    checks = [
        ("quadrature Gaussian moments", _selftest_quadrature),
        ("Hellinger closed form vs quadrature", _selftest_closed_forms),
        ("Hellinger <= KL and <= absolute distance", _selftest_inequality_chain),
        ("predictor dominance and mass invariants", _selftest_dominance),
        ("classification enumeration oracle", _selftest_classification_oracle),
    ]
    failures = 0
    for name, fn in checks:
        ok, detail = fn()
        tag = "ok  " if ok else "FAIL"
        sys.stdout.write(f"[{tag}] {name}: {detail}\n")
        failures += not ok
    sys.stdout.write("selftest: "
                     f"{len(checks) - failures}/{len(checks)} checks passed\n")
    return 0 if failures == 0 else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdlpredict",
        description="Online MDL and Bayes-mixture prediction experiments.",
        epilog="Set MDLPREDICT_WORKERS to parallelise Monte Carlo runs.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one scenario from a config")
    run_p.add_argument("--config", required=True, help="YAML config path")
    run_p.add_argument("--scenario", required=True, help="scenario name")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--runs", type=int, default=None)
    run_p.add_argument("--horizon", type=int, default=None)
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--predictors", default=None,
                       help="comma-separated subset of "
                            "bayes,static,dynamic,normalized")
    run_p.set_defaults(fn=run_command)

    rep_p = sub.add_parser("report", help="summarise emitted ledger CSVs")
    rep_p.add_argument("--in", dest="indir", required=True,
                       help="directory holding *_ledger.csv files")
    rep_p.add_argument("--svg", action="store_true",
                       help="render cumulative-trajectory charts")
    rep_p.set_defaults(fn=report_command)

    self_p = sub.add_parser("selftest", help="run built-in numerical checks")
    self_p.set_defaults(fn=selftest_command)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except SimulationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (QuadratureError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
