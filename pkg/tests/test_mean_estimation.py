import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsopt.errors import CapabilityError, ContractViolation
from qsopt.ledger import CostModel, QueryLedger
from qsopt.mean_estimation import (
    ConstantSource,
    ContractBackend,
    DifferenceSource,
    GradientSource,
    ProjectedSource,
    SampleBackend,
    approx_gradient,
    estimate_mean,
    estimate_mean_batch,
    finite_source,
    group_count,
    make_backend,
    mlmc_batch,
    mlmc_variance_reduce,
    qme_plus,
    qme_plus_batch,
    qme_plus_parameters,
    qme_wrapper,
)
from qsopt.oracles import NoisyGradientOracle
from qsopt.rng import Rng

BACKENDS = [
    ContractBackend("honest"),
    ContractBackend("adversarial"),
    ContractBackend("adversarial", failure_injection=True),
    SampleBackend(),
]


def signed_basis(d):
    return finite_source(np.vstack([np.eye(d), -np.eye(d)]))


class TestEstimateMean:
    @pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: f"{b.mode}")
    def test_constant_source_exact(self, backend, rng):
        src = ConstantSource([1.5, -2.0], L_eff=1.0)
        np.testing.assert_array_equal(estimate_mean(backend, src, 0.1, 0.01, None, rng), [1.5, -2.0])

    def test_adversarial_norm(self, rng, pm_source):
        for _ in range(20):
            est = estimate_mean(ContractBackend("adversarial"), pm_source, 0.1, 0.01, None, rng)
            np.testing.assert_allclose(np.linalg.norm(est), 0.1)

    def test_honest_within_radius(self, rng, pm_source):
        est = estimate_mean_batch(ContractBackend("honest"), pm_source, np.full(5000, 0.2), 0.01, None, rng)
        assert np.all(np.linalg.norm(est, axis=1) <= 0.2 + 1e-12)

    def test_failure_injection_rate(self, rng, pm_source):
        backend = ContractBackend("honest", failure_injection=True)
        est = estimate_mean_batch(backend, pm_source, np.full(100_000, 0.5), 0.05, None, rng)
        fails = np.linalg.norm(est, axis=1) > 1.0
        # radius 10 L^3 / sigma^2 = 40
        np.testing.assert_allclose(np.linalg.norm(est[fails], axis=1), 40.0)
        assert abs(fails.mean() - 0.05) < 5 * math.sqrt(0.05 * 0.95 / 100_000)

    def test_sample_backend_guarantee(self):
        src = signed_basis(2)
        rng = Rng(21)
        bad = 0
        n = 10_000
        for _ in range(n):
            bad += np.linalg.norm(estimate_mean(SampleBackend(), src, 0.2, 1e-3, None, rng)) > 0.2
        assert bad / n <= 2e-3

    def test_one_charge_per_call(self, rng, pm_source):
        led = QueryLedger()
        estimate_mean_batch(ContractBackend(), pm_source, [0.1, 0.2, 0.4], [0.01, 0.1, 0.5], led, rng)
        expected = sum(CostModel().cost(1.0, s, p, 2) for s, p in [(0.1, 0.01), (0.2, 0.1), (0.4, 0.5)])
        assert led.backend_invocations == 3
        assert led.quantum_queries_charged == expected

    def test_sample_backend_draws_recorded(self, rng, pm_source):
        led = QueryLedger()
        estimate_mean(SampleBackend(), pm_source, 0.5, 1 / 64, led, rng)
        assert led.classical_samples_drawn == math.ceil(16 / 0.25) * 16

    def test_sample_backend_truncation_degrades(self, rng):
        src = GradientSource(NoisyGradientOracle(2, lambda X: X, 1.0, wave_scale=1.0), np.zeros(2))
        led = QueryLedger()
        estimate_mean(SampleBackend(max_group_draws=64), src, 0.1, 0.1, led, rng)
        assert led.degraded

    def test_errors(self, rng, pm_source):
        with pytest.raises(ContractViolation):
            estimate_mean(ContractBackend(), pm_source, 1.5, 0.1, None, rng)
        with pytest.raises(ValueError):
            estimate_mean(ContractBackend(), pm_source, 0.0, 0.1, None, rng)
        with pytest.raises(ValueError):
            estimate_mean(ContractBackend(), pm_source, 0.1, 0.0, None, rng)
        src = GradientSource(NoisyGradientOracle(2, lambda X: X, 1.0, gauss_scale=1.0, expose_mean=False), np.zeros(2))
        with pytest.raises(CapabilityError):
            estimate_mean(ContractBackend(), src, 0.5, 0.1, None, rng)
        with pytest.raises(ValueError):
            make_backend("quantum")
        with pytest.raises(ValueError):
            ContractBackend("lazy")


class TestQmePlus:
    def test_parameters(self):
        delta, D = qme_plus_parameters(1.0, 0.4)
        np.testing.assert_allclose(delta, 1e-6)
        np.testing.assert_allclose(D, 100.1)

    def test_constant(self, rng):
        src = ConstantSource([2.0], L_eff=1.0)
        np.testing.assert_array_equal(qme_plus(src, 0.3, ContractBackend(), None, rng), [2.0])

    def test_accounting(self, rng, pm_source):
        led = QueryLedger()
        qme_plus(pm_source, 0.4, ContractBackend(), led, rng)
        delta, _ = qme_plus_parameters(1.0, 0.4)
        # one backend call at sigma/4 plus one classical draw charged as one query
        assert led.quantum_queries_charged == CostModel().cost(1.0, 0.1, delta, 2) + 1
        assert led.classical_samples_drawn == 1

    def test_loose_sigma_falls_back_to_draw(self, rng, pm_source):
        led = QueryLedger()
        out = qme_plus(pm_source, 2.0, ContractBackend(), led, rng)
        assert led.backend_invocations == 0 and led.quantum_queries_charged == 1
        assert any(np.array_equal(out, v) for v in pm_source.oracle.vectors)

    def test_failure_stress(self, pm_source):
        s = 0.4
        est = qme_plus_batch(pm_source, np.full(100_000, s), ContractBackend("adversarial", failure_injection=True), None, Rng(3))
        assert float((est**2).sum(axis=1).mean()) <= s**2

    def test_wrapper_replaces_outliers(self, rng, pm_source):
        backend = ContractBackend("honest", failure_injection=True, failure_radius=100.0)
        out, kept = qme_wrapper(pm_source, 0.3, 0.999, 2.0, backend, None, rng)
        assert not kept
        assert np.linalg.norm(out) == 1.0


class TestMlmc:
    @given(seed=st.integers(0, 2**32), sigma=st.floats(0.01, 2.0))
    @settings(max_examples=25, deadline=None)
    def test_constant_any_level(self, seed, sigma):
        src = ConstantSource([0.25, -1.0, 3.0], L_eff=1.0)
        out = mlmc_variance_reduce(src, sigma, ContractBackend(), None, Rng(seed))
        np.testing.assert_array_equal(out, src.value)

    def test_level_law(self):
        _, J = mlmc_batch(ConstantSource([0.0]), 0.1, 1_000_000, ContractBackend(), None, Rng(5), return_levels=True)
        counts = np.bincount(J, minlength=14)[1:13]
        expected = 1_000_000 * 0.5 ** np.arange(1, 13)
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        # 99.9% quantile of chi-square with 12 degrees of freedom is 32.9
        assert chi2 < 32.9

    @pytest.mark.parametrize("backend", BACKENDS[:3], ids=["honest", "adversarial", "failures"])
    def test_unbiased_and_variance(self, backend, pm_source):
        s = 0.3
        out = mlmc_batch(pm_source, s, 100_000, backend, None, Rng(8))
        assert np.linalg.norm(out.mean(axis=0)) <= 4 * s / math.sqrt(100_000)
        assert float((out**2).sum(axis=1).mean()) <= 1.2 * s**2

    def test_return_level(self, rng, pm_source):
        out, j = mlmc_variance_reduce(pm_source, 0.3, ContractBackend(), None, rng, return_level=True)
        assert out.shape == (2,) and j >= 1

    def test_cost_scales_with_sqrt_d(self):
        means = []
        for d in (2, 8, 32):
            src = signed_basis(d)
            qs = []
            for i in range(2000):
                led = QueryLedger()
                mlmc_variance_reduce(src, 0.2, ContractBackend(), led, Rng(11, i))
                qs.append(led.quantum_queries_charged)
            means.append(np.mean(qs))
        ratios = np.array(means[1:]) / np.array(means[:-1])
        # d grows 4x per step: sqrt(4) = 2 = sqrt(2)^2, so +-15% per doubling compounds to +-32%
        assert np.all(np.abs(ratios / 2.0 - 1) <= 1.15**2 - 1)


class TestApproxGradient:
    def test_group_count(self):
        assert group_count(1 / 64) == 16

    def test_noiseless_exact(self, rng):
        oracle = NoisyGradientOracle(2, lambda X: 2 * np.asarray(X), 3.0)
        g = approx_gradient(GradientSource(oracle, np.array([0.5, 1.0])), 0.1, 0.01, ContractBackend(), None, rng)
        np.testing.assert_array_equal(g, [1.0, 2.0])

    def test_failure_rate(self):
        oracle = NoisyGradientOracle(2, lambda X: np.asarray(X), 2.0, gauss_scale=1.0)
        x = np.array([0.3, -0.4])
        rng = Rng(31)
        bad = 0
        n = 10_000
        for _ in range(n):
            g = approx_gradient(GradientSource(oracle, x), 0.05, 1e-3, ContractBackend(), None, rng)
            bad += np.linalg.norm(g - x) > 0.05
        assert bad / n <= 2e-3

    def test_degraded_fallback(self, rng, pm_source):
        # an adversary that always fails leaves no consensus; the medoid is returned
        backend = ContractBackend("adversarial", failure_injection=True, failure_radius=50.0)
        src = GradientSource(pm_source.oracle, np.zeros(2), L_eff=1.0)
        led = QueryLedger()
        orig = backend._estimate_batch

        def always_fail(src_, sigmas, deltas, ledger_, rng_):
            return orig(src_, sigmas, np.ones_like(deltas), ledger_, rng_)

        backend._estimate_batch = always_fail
        approx_gradient(src, 0.1, 0.01, backend, led, rng)
        assert led.degraded

    def test_bad_arguments(self, rng, pm_source):
        with pytest.raises(ValueError):
            approx_gradient(pm_source, 0.0, 0.1, ContractBackend(), None, rng)
        with pytest.raises(ValueError):
            approx_gradient(pm_source, 0.1, 1.0, ContractBackend(), None, rng)


class TestSources:
    def test_projected_is_scalar(self, rng):
        oracle = NoisyGradientOracle(3, lambda X: np.asarray(X), 2.0, gauss_scale=0.5)
        src = ProjectedSource(oracle, np.array([1.0, 2.0, 3.0]), np.array([0.0, 1.0, 0.0]))
        assert src.dim == 1
        np.testing.assert_array_equal(src.exact_mean(), [2.0])
        led = QueryLedger()
        estimate_mean(ContractBackend(), src, 0.5, 0.1, led, rng)
        # scalar estimation is charged with d = 1
        assert led.quantum_queries_charged == CostModel().cost(2.0, 0.5, 0.1, 1)

    def test_difference_source(self, rng):
        oracle = NoisyGradientOracle(2, lambda X: np.asarray(X), 2.0, gauss_scale=1.0, smoothness=1.0)
        x, y = np.array([1.0, 0.0]), np.array([0.0, 0.0])
        src = DifferenceSource(oracle, x, y)
        assert src.L_eff == pytest.approx(1.0)
        # Gaussian noise cancels exactly under a shared seed
        np.testing.assert_allclose(src.draw(rng, 10), np.tile(x - y, (10, 1)))
        assert DifferenceSource(oracle, x, x).degenerate

    def test_difference_needs_shared_seed(self, pm_source):
        from qsopt.oracles import ConvolvedOracle, StochasticGradientOracle

        with pytest.raises(CapabilityError):
            DifferenceSource(StochasticGradientOracle(2, 1.0), np.zeros(2), np.ones(2), L_eff=1.0)
        assert ConvolvedOracle(pm_source.oracle, 0.1).supports_shared_seed
