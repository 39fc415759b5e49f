import math

import numpy as np
import pytest
from scipy import integrate, stats

from mdlpredict.metrics import (
    LEDGER_COLUMNS,
    LossLedger,
    abs_distance,
    hellinger_sq,
    hellinger_sq_gaussian,
    kl_divergence,
    kl_gaussian,
    quadratic_distance,
)
from mdlpredict.predictors import (
    PredictiveDensity,
    gaussian_density,
    gaussian_mixture_density,
    tabular_density,
)
from mdlpredict.quadrature import QuadratureSpec


def random_pair(rng):
    m1, m2 = rng.uniform(-3, 3, size=2)
    s1, s2 = rng.uniform(0.3, 2.5, size=2)
    return m1, s1, m2, s2


class TestGaussianClosedForms:
    def test_hellinger_frozen_values(self):
        # oracle: scipy.integrate.quad of (sqrt p - sqrt q)^2
        assert hellinger_sq_gaussian(0, 1, 2, 1) == pytest.approx(
            0.7869386805747332, abs=1e-14)
        assert hellinger_sq_gaussian(0, 1, 0, 2) == pytest.approx(
            0.2111456180001683, abs=1e-14)
        assert hellinger_sq_gaussian(1, 0.5, -1, 1.5) == pytest.approx(
            0.961544650029992, abs=1e-13)

    def test_hellinger_identity_and_symmetry(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            m1, s1, m2, s2 = random_pair(rng)
            assert hellinger_sq_gaussian(m1, s1, m1, s1) == 0.0
            a = hellinger_sq_gaussian(m1, s1, m2, s2)
            b = hellinger_sq_gaussian(m2, s2, m1, s1)
            assert a == pytest.approx(b, abs=1e-14)
            assert 0.0 <= a < 2.0

    def test_equal_sigma_reduction(self):
        # same-sigma form: 2(1 - exp(-delta^2 / (8 sigma^2)))
        rng = np.random.default_rng(7)
        for _ in range(100):
            m1, m2 = rng.uniform(-4, 4, size=2)
            s = rng.uniform(0.2, 3.0)
            direct = hellinger_sq_gaussian(m1, s, m2, s)
            reduced = 2.0 * (1.0 - math.exp(-((m1 - m2) ** 2) / (8 * s * s)))
            assert direct == pytest.approx(reduced, abs=1e-14)

    def test_kl_frozen_values(self):
        assert kl_gaussian(0, 1, 2, 1) == pytest.approx(2.0, abs=1e-14)
        assert kl_gaussian(1, 2, 3, 1) == pytest.approx(
            2.8068528194400546, abs=1e-14)
        assert kl_gaussian(0.3, 1.1, 0.3, 1.1) == 0.0

    def test_closed_forms_match_scipy_quadrature(self):
        rng = np.random.default_rng(42)
        for _ in range(30):
            m1, s1, m2, s2 = random_pair(rng)
            lo = min(m1 - 14 * s1, m2 - 14 * s2)
            hi = max(m1 + 14 * s1, m2 + 14 * s2)
            h2_oracle, _ = integrate.quad(
                lambda y: (math.sqrt(stats.norm.pdf(y, m1, s1))
                           - math.sqrt(stats.norm.pdf(y, m2, s2))) ** 2,
                lo, hi, points=[m1, m2], limit=300)
            assert hellinger_sq_gaussian(m1, s1, m2, s2) == pytest.approx(
                h2_oracle, abs=1e-8)
            kl_oracle, _ = integrate.quad(
                lambda y: stats.norm.pdf(y, m1, s1)
                * (stats.norm.logpdf(y, m1, s1) - stats.norm.logpdf(y, m2, s2)),
                lo, hi, points=[m1, m2], limit=300)
            assert kl_gaussian(m1, s1, m2, s2) == pytest.approx(
                kl_oracle, abs=1e-8)


class TestHellingerDispatch:
    def test_gaussian_pair_uses_closed_form(self):
        p = gaussian_density(0.0, 1.0)
        q = gaussian_density(2.0, 1.0)
        assert hellinger_sq(p, q) == pytest.approx(0.7869386805747332, abs=1e-14)

    def test_quadrature_route_agrees_with_closed_form(self):
        rng = np.random.default_rng(42)
        quad = QuadratureSpec()
        for _ in range(20):
            m1, s1, m2, s2 = random_pair(rng)
            p = gaussian_density(m1, s1)
            # a one-component mixture forces the quadrature path
            q = gaussian_mixture_density(np.array([1.0]), np.array([m2]),
                                         np.array([s2]))
            via_quad = hellinger_sq(p, q, quad)
            closed = hellinger_sq_gaussian(m1, s1, m2, s2)
            assert via_quad == pytest.approx(closed, abs=1e-7)

    def test_discrete_pairs(self):
        p = tabular_density(np.array([0.5, 0.5]))
        assert hellinger_sq(p, p) == 0.0
        disjoint = hellinger_sq(tabular_density(np.array([1.0, 0.0])),
                                tabular_density(np.array([0.0, 1.0])))
        assert disjoint == pytest.approx(2.0, abs=1e-15)

    def test_mixed_kinds_rejected(self):
        with pytest.raises(ValueError):
            hellinger_sq(gaussian_density(0, 1), tabular_density(np.array([1.0, 0.0])))

    def test_label_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            hellinger_sq(tabular_density(np.array([0.5, 0.5])),
                         tabular_density(np.array([0.2, 0.3, 0.5])))


class TestKLDivergence:
    def test_discrete_values(self):
        p = tabular_density(np.array([0.5, 0.5]))
        q = tabular_density(np.array([0.25, 0.75]))
        manual = 0.5 * math.log(2.0) + 0.5 * math.log(2.0 / 3.0)
        assert kl_divergence(p, q) == pytest.approx(manual, abs=1e-14)
        assert kl_divergence(p, p) == 0.0

    def test_discrete_infinite_when_support_lost(self):
        p = tabular_density(np.array([0.5, 0.5]))
        q = tabular_density(np.array([1.0, 0.0]))
        assert kl_divergence(p, q) == math.inf
        # the other direction is finite: 0 * log 0 contributes nothing
        assert kl_divergence(q, p) == pytest.approx(math.log(2.0), abs=1e-14)

    def test_continuous_infinite_when_support_lost(self):
        p = gaussian_density(0.0, 1.0)

        def truncated(ys):
            out = -0.5 * ys * ys - 0.5 * math.log(2 * math.pi)
            return np.where(np.abs(ys) <= 1.0, out, -math.inf)

        q = PredictiveDensity(
            kind="mixture", total_mass=0.68, support_hint=(-1.0, 1.0),
            log_pdf_fn=truncated, breakpoints=np.array([0.0]), sigma_max=1.0)
        assert kl_divergence(p, q) == math.inf

    def test_quadrature_route_matches_closed_form(self):
        rng = np.random.default_rng(11)
        for _ in range(15):
            m1, s1, m2, s2 = random_pair(rng)
            p = gaussian_density(m1, s1)
            q = gaussian_mixture_density(np.array([1.0]), np.array([m2]),
                                         np.array([s2]))
            assert kl_divergence(p, q) == pytest.approx(
                kl_gaussian(m1, s1, m2, s2), abs=1e-7)


class TestAbsDistance:
    def test_frozen_value(self):
        # closed form for unit sigmas two apart: 2 erf(1/sqrt 2)
        p = gaussian_density(0.0, 1.0)
        q = gaussian_density(2.0, 1.0)
        assert abs_distance(p, q) == pytest.approx(1.3653789842741718, abs=1e-9)

    def test_discrete(self):
        p = tabular_density(np.array([0.5, 0.5]))
        q = tabular_density(np.array([0.25, 0.75]))
        assert abs_distance(p, q) == pytest.approx(0.5, abs=1e-15)

    def test_identical_is_zero(self):
        p = gaussian_density(1.0, 0.8)
        assert abs_distance(p, p) == pytest.approx(0.0, abs=1e-12)


class TestQuadraticDistance:
    def test_spec_values(self):
        assert quadratic_distance(np.array([0.5, 0.5]), np.array([0.5, 0.5])) == 0.0
        assert quadratic_distance(np.array([1.0, 0.0]),
                                  np.array([0.0, 1.0])) == pytest.approx(2.0)
        assert quadratic_distance(np.array([0.5, 0.5]),
                                  np.array([0.25, 0.75])) == pytest.approx(0.125)

    def test_accepts_densities(self):
        p = tabular_density(np.array([0.5, 0.5]))
        q = tabular_density(np.array([0.25, 0.75]))
        assert quadratic_distance(p, q) == pytest.approx(0.125)

    def test_rejects_continuous(self):
        with pytest.raises(ValueError):
            quadratic_distance(gaussian_density(0, 1), gaussian_density(1, 1))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            quadratic_distance(np.array([0.5, 0.5]), np.array([1.0, 0.0, 0.0]))


class TestInequalityChain:
    def test_hellinger_below_kl_and_abs(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            m1, s1, m2, s2 = random_pair(rng)
            h2 = hellinger_sq_gaussian(m1, s1, m2, s2)
            assert h2 <= kl_gaussian(m1, s1, m2, s2) + 1e-9
        for _ in range(50):
            m1, s1, m2, s2 = random_pair(rng)
            p, q = gaussian_density(m1, s1), gaussian_density(m2, s2)
            assert hellinger_sq(p, q) <= abs_distance(p, q) + 1e-9

    def test_sqrt_hellinger_triangle_inequality(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            m = rng.uniform(-3, 3, size=3)
            s = rng.uniform(0.3, 2.5, size=3)
            d01 = math.sqrt(hellinger_sq_gaussian(m[0], s[0], m[1], s[1]))
            d12 = math.sqrt(hellinger_sq_gaussian(m[1], s[1], m[2], s[2]))
            d02 = math.sqrt(hellinger_sq_gaussian(m[0], s[0], m[2], s[2]))
            assert d02 <= d01 + d12 + 1e-8


class TestLossLedger:
    def test_column_order_is_csv_order(self):
        assert LEDGER_COLUMNS == ("h2_mu_xi", "h2_mu_rhobar", "h2_rhobar_rho",
                                  "h2_rho_static", "h2_mu_static",
                                  "kl_mu_rhobar")

    def test_record_and_cumulate(self):
        ledger = LossLedger.empty(3, 4)
        for t in range(1, 5):
            ledger.record(t, "h2_mu_xi", 0.25 * t)
        assert ledger.cumulative("h2_mu_xi") == pytest.approx(2.5)
        assert np.allclose(ledger.cumulative_by_step("h2_mu_xi"),
                           [0.25, 0.75, 1.5, 2.5])

    def test_unrecorded_column_is_nan(self):
        ledger = LossLedger.empty(0, 2)
        assert math.isnan(ledger.cumulative("kl_mu_rhobar"))
        assert np.all(np.isnan(ledger.column("h2_mu_static")))

    def test_rows_shape(self):
        ledger = LossLedger.empty(5, 3)
        ledger.record(2, "h2_mu_xi", 1.0)
        rows = list(ledger.rows())
        assert len(rows) == 3
        assert rows[1][0] == 5 and rows[1][1] == 2
        assert rows[1][2] == 1.0
        assert len(rows[0]) == 2 + len(LEDGER_COLUMNS)

    def test_custom_columns(self):
        ledger = LossLedger.empty(0, 2, columns=("a", "b"))
        ledger.record(1, "b", 0.5)
        ledger.record(2, "b", 0.25)
        assert ledger.cumulative("b") == pytest.approx(0.75)
        with pytest.raises(KeyError):
            ledger.record(1, "h2_mu_xi", 0.1)

    def test_bad_step_rejected(self):
        ledger = LossLedger.empty(0, 2)
        with pytest.raises(IndexError):
            ledger.record(0, "h2_mu_xi", 0.1)
        with pytest.raises(IndexError):
            ledger.record(3, "h2_mu_xi", 0.1)

    def test_horizon_floor(self):
        with pytest.raises(ValueError, match="horizon must be"):
            LossLedger.empty(0, 0)
