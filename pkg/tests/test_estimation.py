import math

import numpy as np
import pytest

from postselect.errors import ConfigurationError, DegenerateFlagError, DimensionError
from postselect.estimation import (
    EstimationConfig,
    SwapTestPurity,
    bias_bound,
    ensemble_average,
    estimate_nonlinear,
    swap_test_acceptance,
    swap_test_purity,
)
from postselect import estimation
from postselect.linalg_core import Operator, Projector, StateVector, qubit_dims, random_state
from postselect.protocols import project_ensemble


def ghz(n: int) -> StateVector:
    amplitudes = np.zeros(2 ** n, dtype=complex)
    amplitudes[0] = amplitudes[-1] = 1 / math.sqrt(2)
    return StateVector(amplitudes, qubit_dims(n))


class TestSwapTest:
    def test_equal_pure_states(self, rng):
        rho = random_state((4,), rng).density()
        assert np.isclose(swap_test_acceptance(rho, rho), 1.0)

    def test_maximally_mixed_qubits(self):
        mixed = Operator.square(np.eye(2) / 2, (2,))
        assert np.isclose(swap_test_acceptance(mixed, mixed), 0.75)

    def test_orthogonal_states(self):
        zero = Operator.square(np.diag([1.0, 0.0]), (2,))
        one = Operator.square(np.diag([0.0, 1.0]), (2,))
        assert np.isclose(swap_test_acceptance(zero, one), 0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            swap_test_acceptance(Operator.square(np.eye(2) / 2, (2,)), Operator.square(np.eye(4) / 4, (4,)))

    def test_single_shot_on_product_state(self, rng):
        state = StateVector(np.eye(4, dtype=complex)[0], (2, 2))
        assert all(swap_test_purity(state, state, [0], rng) == 1 for _ in range(20))


class TestPurity:
    def test_exact_purity(self):
        assert np.isclose(SwapTestPurity([0]).exact(ghz(3)), 0.5)
        assert np.isclose(SwapTestPurity([0, 1, 2]).exact(ghz(3)), 1.0)

    def test_ensemble_average_of_ghz(self):
        # each branch of a GHZ state is a product state
        ensemble = project_ensemble(ghz(3), [0])
        assert np.isclose(ensemble_average(ensemble, SwapTestPurity([1])), 1.0)

    def test_bias_bound(self):
        assert np.isclose(bias_bound(np.array([0.5, 0.3, 0.2]), 0.25, 0.01), 0.216)
        assert np.isclose(bias_bound(np.array([0.5, 0.5]), 0.25, 0.0), 0.0)


class TestEstimationConfig:
    @pytest.mark.parametrize('kwargs', [{'k': 1}, {'n_samples': 0}, {'p_star': 1.0}, {'delta': 1.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            EstimationConfig(**kwargs)

    def test_estimator_order_must_match(self, rng):
        class ThreeCopy(SwapTestPurity):
            k = 3

        with pytest.raises(ConfigurationError):
            estimate_nonlinear(random_state(qubit_dims(2), rng), [0], ThreeCopy([1]), EstimationConfig())


class TestEstimateNonlinear:
    def test_exact_copies(self):
        state = random_state(qubit_dims(3), 17)
        estimator = SwapTestPurity([1])
        result = estimate_nonlinear(state, [0], estimator, EstimationConfig(delta=0.0, n_samples=400, seed=3))
        exact = ensemble_average(project_ensemble(state, [0]), estimator)
        assert result.flag_fail_rate == 0.0
        assert result.n_attempts == 400
        assert abs(result.estimate - exact) <= 5 * result.stderr

    def test_fpaa_copies(self):
        state = random_state(qubit_dims(3), 19)
        estimator = SwapTestPurity([1])
        cfg = EstimationConfig(p_star=0.25, delta=0.01, n_samples=400, seed=5)
        result = estimate_nonlinear(state, [0], estimator, cfg)
        exact = ensemble_average(project_ensemble(state, [0]), estimator)
        assert abs(result.estimate - exact) <= result.bias_bound + 5 * result.stderr
        assert result.n_attempts >= result.n_samples

    def test_deterministic_for_fixed_seed(self):
        state = random_state(qubit_dims(3), 23)
        cfg = EstimationConfig(delta=0.0, n_samples=50, seed=9)
        first = estimate_nonlinear(state, [0], SwapTestPurity([1]), cfg)
        second = estimate_nonlinear(state, [0], SwapTestPurity([1]), cfg)
        assert first == second

    def test_unbiased_with_exact_copies(self):
        state = random_state(qubit_dims(4), 29)
        estimator = SwapTestPurity([1, 2])
        result = estimate_nonlinear(state, [0], estimator, EstimationConfig(delta=0.0, n_samples=4000, seed=11))
        exact = ensemble_average(project_ensemble(state, [0]), estimator)
        assert abs(result.estimate - exact) <= 4 * result.stderr

    @pytest.mark.parametrize('seed', range(5))
    def test_flag_failures_within_bias_bound(self, seed):
        state = random_state(qubit_dims(3), 100 + seed)
        cfg = EstimationConfig(p_star=0.25, delta=0.01, n_samples=300, seed=seed)
        result = estimate_nonlinear(state, [0, 1], SwapTestPurity([2]), cfg)
        # one FPAA call per attempt when k = 2
        stderr = math.sqrt(max(result.bias_bound * (1 - result.bias_bound), 1e-4) / result.n_attempts)
        assert result.flag_fail_rate <= result.bias_bound + 3 * stderr

    def test_vanishing_flag_counts_as_failure(self, monkeypatch):
        state = ghz(3)
        one = Projector.computational(state.dims, {0: 1}).operator.entries
        fpaa_from_state = estimation.fpaa_from_state

        def never_flag_one(psi, target, *args):
            if np.allclose(target.operator.entries, one):
                raise DegenerateFlagError("flag probability vanishes")
            return fpaa_from_state(psi, target, *args)

        monkeypatch.setattr(estimation, 'fpaa_from_state', never_flag_one)
        cfg = EstimationConfig(p_star=0.25, delta=0.01, n_samples=400, seed=13)
        result = estimate_nonlinear(state, [0], SwapTestPurity([1]), cfg)
        # every accepted trial comes from the product branch |000>
        assert result.estimate == pytest.approx(1.0)
        assert 0.3 < result.flag_fail_rate < 0.7
        assert result.n_attempts > result.n_samples
