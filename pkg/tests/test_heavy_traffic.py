"""Exponential heavy-traffic limit of the scaled queue length."""
import numpy as np
import pytest
from scipy import integrate

from models.batch_model import GeometricBatch
from models.distributions import Exponential
from models.model_spec import KernelEntry, ModelSpec
from services.errors import InvalidHTDenominator, NotN2
from services.heavy_traffic import (
    build_ht_result,
    det_m_expansion,
    gamma,
    gamma_bar,
    ht_distribution,
    ht_rate,
    ht_rate_n2,
    independence_condition,
    q_cofactors,
)
from services.inversion import mean_queue_length
from services.model_library import two_type_exact_p22, two_type_model
from services.queue_model import moment_set, rate_for_rho, solve_lambda_critical
from services.stationary_solver import solve

from conftest import erlang_mg1, random_model


def _at_critical(model: ModelSpec):
    return moment_set(model.with_rate(solve_lambda_critical(model)))


def _extrapolated_expansion(model: ModelSpec, s: float = 0.7, epsilon: float = 4e-3, levels: int = 4) -> float:
    """Richardson extrapolation of det_m_expansion to rho = 1."""
    table = [det_m_expansion(model, 1.0 - epsilon / 2**k, s) for k in range(levels)]
    for order in range(1, levels):
        factor = 2.0**order
        table = [(factor * fine - coarse) / (factor - 1) for coarse, fine in zip(table, table[1:])]
    return table[0]


class TestClassicalLimits:
    def test_mm1_rate_is_one(self, mm1):
        result = ht_rate(mm1)
        assert result.valid
        assert result.alphahat_bar == pytest.approx(3.0, rel=1e-12)
        assert result.eta == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("shape", [1, 2, 5])
    def test_mg1_rate_is_squared_coefficient_of_variation(self, shape):
        model = erlang_mg1(0.1, shape=shape, rate=3.0)
        expected = (shape * (shape + 1)) / (2 * shape**2)
        assert 1.0 / ht_rate(model).eta == pytest.approx(expected, rel=1e-10)

    def test_batch_moments_enter_the_rate(self):
        batch = GeometricBatch(p=0.5)
        model = ModelSpec(lam=0.1, batch=batch, N=1, G=[[KernelEntry(weight=1.0, duration=Exponential(rate=1.0))]])
        # (alphahat - 1) / 2 with lambda* E[B] E[G] = 1
        lam = 1.0 / batch.mean()
        alphahat = lam**2 * batch.mean() ** 2 * 2.0 + lam * (batch.second_moment() - batch.mean()) + 1.0
        assert ht_rate(model).mean == pytest.approx((alphahat - 1) / 2, rel=1e-12)

    def test_single_type_gamma_and_q(self, mm1):
        moments = _at_critical(mm1)
        np.testing.assert_allclose(gamma_bar(moments), [1.0])
        assert q_cofactors(moments).size == 0


class TestCorrectionTerms:
    def test_type_independent_loads(self):
        duration = Exponential(rate=2.0)
        weights = [[0.6, 0.4], [0.2, 0.8]]
        G = [[KernelEntry(weight=w, duration=duration) for w in row] for row in weights]
        model = ModelSpec(lam=0.5, N=2, G=G)
        moments = _at_critical(model)
        np.testing.assert_allclose(gamma_bar(moments), [1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(q_cofactors(moments), [0.0], atol=1e-12)
        result = ht_rate(model)
        assert result.correction_term == pytest.approx(0.0, abs=1e-12)
        assert result.eta == pytest.approx(2.0 / (result.alphahat_bar - 1.0), rel=1e-12)

    def test_two_type_gamma(self, two_type):
        moments = _at_critical(two_type)
        lam, pi = moments.lam, moments.pi
        gammas = gamma_bar(moments)
        assert lam == pytest.approx(0.046585, rel=1e-4)
        assert gammas[0] == pytest.approx((pi[0] * lam + pi[1] * 10 * lam) / pi[0], rel=1e-12)
        assert gammas[1] == pytest.approx((pi[0] * 3 * lam + pi[1] * 20 * lam) / pi[1], rel=1e-12)
        assert pi @ gammas == pytest.approx(1.0, abs=1e-12)

    def test_gamma_averages_to_rho_below_saturation(self, rng):
        for n in (1, 2, 4):
            moments = moment_set(random_model(rng, n))
            assert moments.pi @ gamma(moments) == pytest.approx(moments.rho, rel=1e-12)
        with pytest.raises(ValueError):
            gamma_bar(moment_set(random_model(rng, 3, rho_high=0.9)))

    def test_two_type_q_cofactor(self, rng):
        moments = _at_critical(random_model(rng, 2))
        np.testing.assert_allclose(q_cofactors(moments), [-(1.0 - moments.alpha_i[1])], atol=1e-14)

    def test_general_and_two_type_rates_agree(self):
        rng = np.random.default_rng(777)
        for _ in range(200):
            model = random_model(rng, 2)
            general, explicit = ht_rate(model), ht_rate_n2(model)
            assert general.denominator == pytest.approx(explicit.denominator, abs=1e-10)
            assert general.correction_term == pytest.approx(explicit.correction_term, abs=1e-10)

    def test_exceptional_kernel_is_irrelevant(self, rng):
        model = random_model(rng, 3)
        regular_only = model.model_copy(update={"Gstar": model.G})
        assert ht_rate(model).denominator == ht_rate(regular_only).denominator

    def test_rate_ignores_the_current_lambda(self, two_type):
        assert ht_rate(two_type).eta == ht_rate(two_type.with_rate(0.001)).eta

    def test_n2_rate_needs_two_types(self, mm1):
        with pytest.raises(NotN2):
            ht_rate_n2(mm1)
        with pytest.raises(NotN2):
            independence_condition(mm1)


class TestTwoTypeExample:
    def test_independence_condition_vanishes_at_exact_p22(self):
        model = two_type_model(0.02, p22=two_type_exact_p22())
        assert abs(independence_condition(model)) < 1e-12
        result = ht_rate(model)
        assert result.eta == pytest.approx(2.0 / (result.alphahat_bar - 1.0), rel=1e-8)

    def test_independence_condition_small_at_rounded_p22(self, two_type):
        # P22 = 0.951138 is the exact value rounded to six decimals
        assert abs(independence_condition(two_type)) < 1e-5
        assert ht_rate(two_type).independence_condition == pytest.approx(independence_condition(two_type))

    def test_perturbed_p22_shifts_the_rate(self):
        model = two_type_model(0.02, p22=0.961138)
        result = ht_rate(model)
        assert abs(result.independence_condition) > 1e-3
        estimate = _extrapolated_expansion(model)
        assert estimate == pytest.approx(result.denominator, abs=1e-6)
        assert np.sign(estimate - (result.alphahat_bar - 1.0) / 2.0) == np.sign(result.independence_condition)

    def test_three_type_correction_matches_determinant_expansion(self):
        model = random_model(np.random.default_rng(31), 3)
        assert _extrapolated_expansion(model) == pytest.approx(ht_rate(model).denominator, abs=1e-6)

    def test_mm1_expansion(self, mm1):
        assert _extrapolated_expansion(mm1) == pytest.approx(1.0, abs=1e-7)


class TestLimitingDistribution:
    def test_origin(self, two_type):
        result = ht_rate(two_type)
        pdf, cdf = ht_distribution(result, 0.0)
        assert float(cdf) == 0.0
        assert float(pdf) == pytest.approx(result.eta)

    def test_mean_by_integration(self, two_type):
        result = ht_rate(two_type)
        mean, _ = integrate.quad(lambda x: x * ht_distribution(result, x)[0], 0, np.inf, epsabs=1e-13, epsrel=1e-13)
        assert mean == pytest.approx(1.0 / result.eta, abs=1e-10)

    def test_invalid_denominator(self):
        result = build_ht_result(
            lambda_critical=1.0,
            pi=[0.5, 0.5],
            alphabar=[0.8, 1.2],
            alphahat_bar=2.0,
            gammabar=[1.5, 0.5],
            qbar=[10.0],
            d1=0.5,
        )
        assert result.correction_term == pytest.approx(-5.0)
        assert not result.valid
        assert result.eta is None and result.mean is None
        with pytest.raises(InvalidHTDenominator):
            ht_distribution(result, 1.0)

    def test_scaled_means_converge(self, two_type):
        target = ht_rate(two_type).mean
        errors = []
        for rho in (0.9, 0.95, 0.99):
            solution = solve(two_type.with_rate(rate_for_rho(two_type, rho)))
            errors.append(abs(mean_queue_length(solution).scaled_mean - target))
        assert all(a > b for a, b in zip(errors, errors[1:]))
        assert errors[-1] / target < 0.05
