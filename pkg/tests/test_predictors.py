import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import logsumexp

from mdlpredict.models import (
    ConstantTable,
    GaussianRegressionModel,
    InputToken,
    LinearMean,
    ModelClass,
    TabularClassificationModel,
    build_linear_rational_class,
    log_joint,
)
from mdlpredict.predictors import (
    PredictiveDensity,
    PredictorState,
    SupportExhaustedError,
    bayes_predict,
    dynamic_predict,
    gaussian_density,
    mdl_select,
    normalize,
    penalized_sse_select,
    static_predict,
    update,
)
from mdlpredict.quadrature import QuadratureSpec

X0 = InputToken(0.0)
X1 = InputToken(1.0)


def gauss(slope, intercept, sigma=1.0):
    return GaussianRegressionModel(LinearMean(Fraction(slope), Fraction(intercept)), sigma)


def standard_class():
    return build_linear_rational_class(
        [(a, b) for a in (-1, 0, 1) for b in (0, 2)], sigma=1.0)


def random_history(mc, rng, n, spread=2.0):
    xs = tuple(InputToken(float(v)) for v in rng.uniform(-1, 1, size=n))
    true = mc.model(rng.integers(len(mc)))
    ys = tuple(true.mean(x) + spread * rng.standard_normal() for x in xs)
    return xs, ys


class TestPredictorState:
    def test_initial_scores_are_log_weights(self):
        mc = standard_class()
        state = PredictorState.initial(mc)
        assert np.allclose(state.log_scores, np.log(mc.weights))
        assert state.n == 0
        # empty-history joint is the weight sum and its max weight
        assert state.log_mixture == pytest.approx(math.log(mc.weights.sum()))
        assert state.log_mdl == pytest.approx(math.log(mc.weights.max()))

    def test_update_equals_from_history(self):
        mc = standard_class()
        rng = np.random.default_rng(42)
        xs, ys = random_history(mc, rng, 12)
        state = PredictorState.initial(mc)
        for x, y in zip(xs, ys):
            state = update(state, x, y)
        rebuilt = PredictorState.from_history(mc, xs, ys)
        assert np.allclose(state.log_scores, rebuilt.log_scores, atol=1e-10)
        assert state.log_mixture == pytest.approx(rebuilt.log_mixture, abs=1e-10)

    def test_mixture_matches_manual_logsumexp(self):
        mc = standard_class()
        rng = np.random.default_rng(1)
        xs, ys = random_history(mc, rng, 8)
        state = PredictorState.from_history(mc, xs, ys)
        manual = logsumexp([math.log(w) + log_joint(m, xs, ys)
                            for w, m in mc.entries])
        assert state.log_mixture == pytest.approx(manual, abs=1e-12)

    def test_states_are_values(self):
        mc = standard_class()
        state = PredictorState.initial(mc)
        next_state = update(state, X0, 0.3)
        assert state.n == 0
        assert next_state.n == 1
        assert np.allclose(state.log_scores, np.log(mc.weights))

    def test_support_exhausted_reports_step(self):
        mc = ModelClass([
            (0.5, TabularClassificationModel(ConstantTable((1.0, 0.0)), 2)),
            (0.5, TabularClassificationModel(ConstantTable((1.0, 0.0)), 2)),
        ])
        state = update(PredictorState.initial(mc), X0, 0)
        with pytest.raises(SupportExhaustedError, match="step 2"):
            update(state, X0, 1)
        with pytest.raises(SupportExhaustedError):
            PredictorState.from_history(mc, (X0, X0), (0, 1))


class TestMDLSelection:
    def test_empty_history_picks_heaviest(self):
        # selection on no data is by prior weight alone
        mc = ModelClass([(0.5, gauss(0, 0)), (0.3, gauss(1, 0)), (0.2, gauss(0, 5))])
        idx, score = mdl_select(PredictorState.initial(mc))
        assert idx == 0
        assert score == pytest.approx(math.log(0.5))

    def test_tie_breaks_to_smallest_index(self):
        mc = ModelClass([(0.5, gauss(0, 0)), (0.5, gauss(0, 0))])
        state = update(PredictorState.initial(mc), X1, 0.7)
        idx, _ = mdl_select(state)
        assert idx == 0

    def test_dominance_over_weighted_joints(self):
        mc = standard_class()
        rng = np.random.default_rng(42)
        for _ in range(20):
            xs, ys = random_history(mc, rng, rng.integers(1, 15))
            state = PredictorState.from_history(mc, xs, ys)
            _, best = mdl_select(state)
            for w, model in mc.entries:
                assert best >= math.log(w) + log_joint(model, xs, ys) - 1e-12
            assert best <= state.log_mixture + 1e-12

    def test_lazy_matches_finite(self):
        entries = [(2.0 ** -(i + 1), gauss(0, i)) for i in range(12)]
        with pytest.warns(UserWarning, match="semimeasure"):
            # geometric weights sum to 1 - 2^-12
            finite = ModelClass(entries)
        rng = np.random.default_rng(5)
        xs = tuple(InputToken(0.0) for _ in range(6))
        ys = tuple(3.0 + rng.standard_normal() for _ in range(6))

        lazy = ModelClass.lazy(iter(entries), tail_weight=lambda k: 2.0 ** -k,
                               global_bound=finite.global_bound)
        lazy_state = PredictorState.from_history(lazy, xs, ys)
        finite_state = PredictorState.from_history(finite, xs, ys)
        assert mdl_select(lazy_state) == mdl_select(finite_state)


class TestBayesPredict:
    def test_gaussian_mixture_mass_and_pdf(self):
        mc = standard_class()
        rng = np.random.default_rng(42)
        xs, ys = random_history(mc, rng, 10)
        state = PredictorState.from_history(mc, xs, ys)
        density = bayes_predict(state, X1)
        assert density.kind == "gaussian-mixture"
        assert density.total_mass == 1.0

        post = state.posterior_weights()
        means = np.array([m.mean(X1) for m in mc.models])
        for y in (-2.0, 0.4, 3.1):
            manual = float(post @ stats.norm.pdf(y, means, 1.0))
            assert density.pdf(y) == pytest.approx(manual, rel=1e-12)

    def test_mass_one_by_quadrature(self):
        mc = standard_class()
        state = update(PredictorState.initial(mc), X0, 0.2)
        density = bayes_predict(state, X1)
        lo, hi = density.quad_interval(12.0)
        mass, _ = integrate.quad(lambda y: density.pdf(np.array([y]))[0],
                                 lo, hi, points=sorted(set(density.breakpoints)),
                                 limit=300)
        assert mass == pytest.approx(1.0, abs=1e-9)

    def test_identical_models_collapse(self):
        mc = ModelClass([(0.5, gauss(1, 0)), (0.5, gauss(1, 0))])
        density = bayes_predict(PredictorState.initial(mc), X1)
        single = gaussian_density(1.0, 1.0)
        ys = np.linspace(-3, 5, 33)
        assert np.allclose(density.pdf(ys), single.pdf(ys), atol=1e-15)

    def test_tabular_mixture(self):
        mc = ModelClass([
            (0.5, TabularClassificationModel(ConstantTable((0.8, 0.2)), 2)),
            (0.5, TabularClassificationModel(ConstantTable((0.4, 0.6)), 2)),
        ])
        density = bayes_predict(PredictorState.initial(mc), X0)
        assert density.kind == "tabular"
        assert np.allclose(density.probs, [0.6, 0.4])


class TestStaticPredict:
    def test_returns_selected_model_density(self):
        mc = ModelClass([(0.6, gauss(0, 0)), (0.4, gauss(0, 8))])
        state = update(PredictorState.initial(mc), X0, 7.9)
        density = static_predict(state, X0)
        assert density.kind == "gaussian"
        assert density.mean == pytest.approx(8.0)
        assert density.sigma == 1.0

    def test_initial_selection_is_prior_mode(self):
        mc = ModelClass([(0.6, gauss(0, 0)), (0.4, gauss(0, 8))])
        density = static_predict(PredictorState.initial(mc), X0)
        assert density.mean == 0.0


class TestDynamicPredict:
    def test_far_pair_envelope_mass_frozen(self):
        # equal scores, means 0 and 10: mass is 2 - 2*Phi(-5)
        mc = ModelClass([(0.5, gauss(0, 0)), (0.5, gauss(0, 10))])
        density = dynamic_predict(PredictorState.initial(mc), X0)
        assert density.kind == "envelope"
        assert density.total_mass == pytest.approx(1.9999994266968562, abs=1e-7)

    def test_mass_at_least_one(self):
        mc = standard_class()
        rng = np.random.default_rng(42)
        for trial in range(5):
            xs, ys = random_history(mc, rng, rng.integers(1, 12))
            state = PredictorState.from_history(mc, xs, ys)
            density = dynamic_predict(state, X1)
            assert density.total_mass >= 1.0 - 1e-6

    def test_envelope_dominates_static_pointwise(self):
        mc = standard_class()
        rng = np.random.default_rng(9)
        xs, ys = random_history(mc, rng, 6)
        state = PredictorState.from_history(mc, xs, ys)
        envelope = dynamic_predict(state, X1)
        static = static_predict(state, X1)
        probe = np.linspace(-8, 10, 181)
        assert np.all(envelope.log_pdf(probe) >= static.log_pdf(probe) - 1e-12)

    def test_envelope_below_class_bound(self):
        mc = standard_class()
        state = update(PredictorState.initial(mc), X0, 0.5)
        envelope = dynamic_predict(state, X1)
        probe = np.linspace(-10, 12, 221)
        assert np.all(envelope.pdf(probe) <= mc.global_bound * (1 + 1e-12))

    def test_mass_matches_scipy(self):
        mc = standard_class()
        state = update(PredictorState.initial(mc), X0, 1.0)
        envelope = dynamic_predict(state, X1)
        lo, hi = envelope.quad_interval(12.0)
        oracle, _ = integrate.quad(
            lambda y: envelope.pdf(np.array([y]))[0], lo, hi,
            points=sorted(set(envelope.breakpoints)), limit=400)
        assert envelope.total_mass == pytest.approx(oracle, abs=1e-7)


class TestNormalize:
    def test_normalized_mass_is_one(self):
        mc = standard_class()
        state = update(PredictorState.initial(mc), X0, -0.4)
        envelope = dynamic_predict(state, X1)
        rhobar = normalize(envelope)
        assert rhobar.kind == "normalized-envelope"
        assert rhobar.total_mass == 1.0
        lo, hi = rhobar.quad_interval(12.0)
        mass, _ = integrate.quad(lambda y: rhobar.pdf(np.array([y]))[0],
                                 lo, hi, points=sorted(set(rhobar.breakpoints)),
                                 limit=400)
        assert mass == pytest.approx(1.0, abs=1e-6)

    def test_mass_one_input_unchanged(self):
        density = gaussian_density(0.5, 1.2)
        scaled = normalize(density)
        ys = np.linspace(-4, 5, 41)
        assert np.allclose(scaled.pdf(ys), density.pdf(ys), rtol=1e-9)

    def test_rejects_degenerate_mass(self):
        broken = PredictiveDensity(
            kind="envelope", total_mass=math.nan, support_hint=(0.0, 1.0),
            log_pdf_fn=lambda ys: np.zeros_like(ys))
        with pytest.raises(ValueError):
            normalize(broken)


class TestPenalizedSSE:
    def test_equals_mdl_select_on_random_data(self):
        mc = standard_class()
        rng = np.random.default_rng(42)
        for _ in range(100):
            xs, ys = random_history(mc, rng, rng.integers(0, 30))
            state = PredictorState.from_history(mc, xs, ys)
            assert penalized_sse_select(mc, xs, ys) == mdl_select(state)[0]

    def test_requires_constant_sigma(self):
        mixed = ModelClass([(0.5, gauss(0, 0, 1.0)), (0.5, gauss(1, 0, 2.0))])
        with pytest.raises(Exception):
            penalized_sse_select(mixed, (), ())

    def test_penalty_decides_empty_history(self):
        mc = ModelClass([(0.7, gauss(0, 0)), (0.3, gauss(1, 0))])
        assert penalized_sse_select(mc, (), ()) == 0


class TestDensityInterface:
    def test_scalar_and_array_pdf(self):
        density = gaussian_density(0.0, 1.0)
        assert isinstance(density.pdf(0.0), float)
        assert density.pdf(0.0) == pytest.approx(0.3989422804014327, abs=1e-15)
        arr = density.pdf(np.array([0.0, 1.0]))
        assert arr.shape == (2,)

    def test_support_hint_covers_tiny_density(self):
        density = gaussian_density(2.0, 0.5)
        lo, hi = density.support_hint
        assert density.pdf(lo) < 1e-299
        assert density.pdf(hi) < 1e-299

    def test_tabular_has_no_interval(self):
        mc = ModelClass([
            (1.0, TabularClassificationModel(ConstantTable((0.5, 0.5)), 2))])
        density = bayes_predict(PredictorState.initial(mc), X0)
        with pytest.raises(ValueError):
            density.quad_interval(12.0)

    def test_quadrature_spec_plumbs_through(self):
        mc = standard_class()
        state = update(PredictorState.initial(mc), X0, 0.1)
        loose = dynamic_predict(state, X1, QuadratureSpec(abs_tol=1e-6))
        tight = dynamic_predict(state, X1, QuadratureSpec(abs_tol=1e-11))
        assert loose.total_mass == pytest.approx(tight.total_mass, abs=1e-5)
