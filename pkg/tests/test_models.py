import math
import pickle
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from mdlpredict.models import (
    ConstantTable,
    GaussianRegressionModel,
    InputToken,
    LinearMean,
    LookupTable,
    ModelClass,
    ModelClassError,
    ModelInputError,
    NonFiniteValueError,
    TabularClassificationModel,
    build_linear_rational_class,
    log_joint,
    rational_code_length,
    validate_class,
)

X0 = InputToken(0.0)
X1 = InputToken(1.0)


def gauss(slope, intercept, sigma=1.0):
    mean = LinearMean(Fraction(slope), Fraction(intercept))
    return GaussianRegressionModel(mean, sigma)


class TestInputHandling:
    def test_linear_mean_exact_rationals(self):
        m = LinearMean(Fraction(1, 3), Fraction(-2))
        assert m.slope == Fraction(1, 3)
        assert m(InputToken(3.0)) == pytest.approx(1.0 - 2.0, abs=1e-15)

    def test_string_fraction_coercion(self):
        m = LinearMean("3/7", "0")
        assert m.slope == Fraction(3, 7)

    def test_bool_payload_rejected(self):
        with pytest.raises(ModelInputError):
            gauss(1, 0).mean(InputToken(True))

    def test_non_numeric_payload_rejected(self):
        with pytest.raises(ModelInputError):
            gauss(1, 0).mean(InputToken("west"))

    def test_nan_payload_rejected(self):
        with pytest.raises(NonFiniteValueError):
            gauss(1, 0).mean(InputToken(math.nan))

    def test_nan_output_rejected(self):
        with pytest.raises(NonFiniteValueError):
            gauss(1, 0).log_density(math.inf, X0)


class TestGaussianModel:
    def test_log_density_matches_scipy(self):
        model = gauss(2, "1/2", sigma=0.7)
        rng = np.random.default_rng(42)
        for _ in range(50):
            x = InputToken(rng.uniform(-3, 3))
            y = rng.uniform(-5, 5)
            expected = stats.norm.logpdf(y, 2 * x.payload + 0.5, 0.7)
            assert model.log_density(y, x) == pytest.approx(expected, abs=1e-12)

    def test_array_matches_scalar(self):
        model = gauss(1, 0)
        ys = np.linspace(-4, 4, 17)
        arr = model.log_density_array(ys, X1)
        for y, lp in zip(ys, arr):
            assert lp == pytest.approx(model.log_density(y, X1), abs=1e-15)

    def test_density_bound(self):
        assert gauss(0, 0, sigma=1.0).density_bound == pytest.approx(
            0.3989422804014327, abs=1e-15)

    def test_sigma_floor(self):
        with pytest.raises(ModelClassError):
            gauss(0, 0, sigma=1e-9)
        with pytest.raises(ModelClassError):
            GaussianRegressionModel(LinearMean(0, 0), 0.0)

    def test_sample_statistics(self):
        model = gauss(1, 1, sigma=0.5)
        rng = np.random.default_rng(7)
        draws = np.array([model.sample(X1, rng) for _ in range(4000)])
        assert abs(draws.mean() - 2.0) < 4 * 0.5 / math.sqrt(4000)

    def test_integration_interval(self):
        lo, hi = gauss(0, 3, sigma=2.0).integration_interval(X0, 12.0)
        assert (lo, hi) == (3 - 24, 3 + 24)


class TestTabularModel:
    def test_prob_vector_validation(self):
        bad = TabularClassificationModel(ConstantTable((0.6, 0.6)), 2)
        with pytest.raises(ModelClassError):
            bad.prob_vector(X0)
        negative = TabularClassificationModel(ConstantTable((1.2, -0.2)), 2)
        with pytest.raises(ModelClassError):
            negative.prob_vector(X0)

    def test_label_validation(self):
        model = TabularClassificationModel(ConstantTable((0.3, 0.7)), 2)
        with pytest.raises(ModelInputError):
            model.log_density(2, X0)
        with pytest.raises(ModelInputError):
            model.log_density(0.5, X0)
        with pytest.raises(ModelInputError):
            model.log_density(True, X0)

    def test_zero_probability_label(self):
        model = TabularClassificationModel(ConstantTable((1.0, 0.0)), 2)
        assert model.log_density(1, X0) == -math.inf
        assert model.log_density(0, X0) == 0.0

    def test_label_count_floor(self):
        with pytest.raises(ModelClassError):
            TabularClassificationModel(ConstantTable((1.0,)), 1)

    def test_lookup_table(self):
        model = TabularClassificationModel(LookupTable((
            (0.0, (0.9, 0.1)), (1.0, (0.2, 0.8)))), 2)
        assert model.prob_vector(X0)[0] == 0.9
        assert model.prob_vector(X1)[1] == 0.8
        with pytest.raises(ModelInputError):
            model.prob_vector(InputToken(2.0))

    def test_sample_distribution(self):
        model = TabularClassificationModel(ConstantTable((0.25, 0.75)), 2)
        rng = np.random.default_rng(3)
        draws = [model.sample(X0, rng) for _ in range(2000)]
        assert abs(np.mean(draws) - 0.75) < 0.04


class TestLogJoint:
    def test_zero_residual_two_points(self):
        # both observations on the mean line, sigma 1: density (2 pi)^-1
        model = gauss(1, 0)
        xs = [InputToken(0.5), InputToken(-0.25)]
        lj = log_joint(model, xs, [0.5, -0.25])
        assert lj == pytest.approx(-1.8378770664093453, abs=1e-14)

    def test_empty_history(self):
        assert log_joint(gauss(1, 0), [], []) == 0.0

    def test_impossible_outcome_short_circuits(self):
        model = TabularClassificationModel(ConstantTable((1.0, 0.0)), 2)
        assert log_joint(model, [X0, X0], [0, 1]) == -math.inf

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            log_joint(gauss(1, 0), [X0], [1.0, 2.0])


class TestModelClass:
    def test_basic_accessors(self):
        mc = ModelClass([(0.6, gauss(0, 0)), (0.4, gauss(1, 0))])
        assert len(mc) == 2
        assert mc.is_finite
        assert mc.enumeration_mode == "finite"
        assert mc.weight(1) == 0.4
        assert list(mc.weights) == [0.6, 0.4]
        assert mc.global_bound == pytest.approx(0.3989422804014327)
        assert not mc.semimeasure

    def test_weight_order_enforced(self):
        with pytest.raises(ModelClassError):
            ModelClass([(0.3, gauss(0, 0)), (0.7, gauss(1, 0))])

    def test_weight_sum_above_one(self):
        with pytest.raises(ModelClassError):
            ModelClass([(0.7, gauss(0, 0)), (0.7, gauss(1, 0))])

    def test_nonpositive_weight(self):
        with pytest.raises(ModelClassError):
            ModelClass([(0.0, gauss(0, 0))])

    def test_empty_class(self):
        with pytest.raises(ModelClassError):
            ModelClass([])

    def test_semimeasure_warns(self):
        with pytest.warns(UserWarning, match="semimeasure"):
            mc = ModelClass([(0.25, gauss(0, 0)), (0.25, gauss(1, 0))])
        assert mc.semimeasure

    def test_common_sigma(self):
        mc = ModelClass([(0.5, gauss(0, 0, 1.0)), (0.5, gauss(1, 0, 1.0))])
        assert mc.common_sigma() == 1.0
        mixed = ModelClass([(0.5, gauss(0, 0, 1.0)), (0.5, gauss(1, 0, 2.0))])
        with pytest.raises(ModelClassError):
            mixed.common_sigma()

    def test_pickle_roundtrip(self):
        mc = build_linear_rational_class([(0, 0), ("1/2", 1)], sigma=1.0)
        clone = pickle.loads(pickle.dumps(mc))
        assert len(clone) == 2
        assert clone.model(1).mean(X1) == mc.model(1).mean(X1)
        assert list(clone.weights) == list(mc.weights)


class TestLazyClass:
    @staticmethod
    def geometric_class(count=None):
        # weights 2^-(i+1), i = 0, 1, ...; tail after k is 2^-k
        def source():
            i = 0
            while count is None or i < count:
                yield 2.0 ** -(i + 1), gauss(0, 2 * i)
                i += 1

        return ModelClass.lazy(source(), tail_weight=lambda k: 2.0 ** -k,
                               global_bound=0.3989422804014327)

    def test_materialises_on_demand(self):
        mc = self.geometric_class()
        assert mc.enumeration_mode == "lazy"
        assert not mc.is_finite
        assert mc.n_materialized == 1
        assert mc.ensure(4)
        assert mc.n_materialized == 4
        assert mc.weight(3) == 2.0 ** -4
        assert mc.tail_weight(4) == 2.0 ** -4
        assert mc.weight_sum == pytest.approx(1.0)

    def test_finite_source_exhausts(self):
        mc = self.geometric_class(count=3)
        assert mc.ensure(3)
        assert not mc.ensure(4)

    def test_len_undefined(self):
        with pytest.raises(TypeError):
            len(self.geometric_class())

    def test_lazy_not_picklable(self):
        with pytest.raises(TypeError):
            pickle.dumps(self.geometric_class())

    def test_requires_positive_bound(self):
        with pytest.raises(ModelClassError):
            ModelClass.lazy(iter([(0.5, gauss(0, 0))]),
                            tail_weight=lambda k: 0.0,
                            global_bound=math.inf)


class TestRationalPriors:
    def test_code_length_values(self):
        assert rational_code_length(Fraction(0)) == 2
        assert rational_code_length(Fraction(1)) == 3
        assert rational_code_length(Fraction(1, 2)) == 4
        assert rational_code_length(Fraction(-3, 7)) == 6

    def test_uniform_prior(self):
        mc = build_linear_rational_class([(0, 0), (1, 0), (2, 0)], sigma=1.0)
        assert np.allclose(mc.weights, 1 / 3)

    def test_code_length_prior_frozen_values(self):
        # bits: (0,0) -> 4, (1,0) -> 5, (1,1/2) -> 7; weights 8:4:1 over 13
        mc = build_linear_rational_class([(0, 0), (1, 0), (1, "1/2")],
                                         sigma=1.0, prior="code-length")
        assert np.allclose(mc.weights, [8 / 13, 4 / 13, 1 / 13], atol=1e-15)
        assert mc.model(0).mean(X1) == 0.0
        assert mc.model(2).mean(X1) == 1.5

    def test_code_length_prior_sorted(self):
        mc = build_linear_rational_class([("22/7", 0), (0, 0)], sigma=1.0,
                                         prior="code-length")
        diffs = np.diff(mc.weights)
        assert np.all(diffs <= 0)

    def test_unknown_prior(self):
        with pytest.raises(ModelClassError):
            build_linear_rational_class([(0, 0)], sigma=1.0, prior="jeffreys")


class TestValidateClass:
    def test_clean_class_passes(self):
        mc = build_linear_rational_class([(0, 0), (1, 1)], sigma=1.0)
        report = validate_class(mc, [X0, X1])
        assert report.ok
        assert np.allclose(report.integrals, 1.0, atol=1e-8)
        assert report.weight_sum == pytest.approx(1.0)

    def test_broken_density_flagged(self):
        class HalfGaussian(GaussianRegressionModel):
            def log_density_array(self, ys, x):
                return super().log_density_array(ys, x) + math.log(0.5)

        bad = HalfGaussian(LinearMean(0, 0), 1.0)
        with pytest.warns(UserWarning):
            mc = ModelClass([(0.5, bad)])
        report = validate_class(mc, [X0])
        assert not report.ok
        assert any("deviates from 1" in v for v in report.violations)

    def test_tabular_exact_sums(self):
        mc = ModelClass([
            (0.5, TabularClassificationModel(ConstantTable((0.5, 0.5)), 2)),
            (0.5, TabularClassificationModel(ConstantTable((0.1, 0.9)), 2)),
        ])
        report = validate_class(mc, [X0])
        assert report.ok
        assert report.max_density[1] == pytest.approx(0.9)

    def test_needs_probes(self):
        mc = build_linear_rational_class([(0, 0)], sigma=1.0)
        with pytest.raises(ValueError):
            validate_class(mc, [])
