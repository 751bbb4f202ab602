import math

import numpy as np
import pytest
from scipy import stats

from qsopt.errors import CapabilityError, ParameterDomainError
from qsopt.fixtures import make_fixture
from qsopt.ledger import QueryLedger
from qsopt.mean_estimation import ContractBackend
from qsopt.nonconvex import qsgd_parameters, qspider_parameters, run_qsgd, run_qspider, sgd_baseline
from qsopt.oracles import StochasticGradientOracle
from qsopt.rng import Rng
from qsopt.verify import spider_variance_checks


class TestQsgd:
    def test_parameters(self):
        T, s = qsgd_parameters(0.5, 1.0, 0.1)
        assert T == 600
        np.testing.assert_allclose(s, 0.1 / 3)
        with pytest.raises(ValueError):
            qsgd_parameters(0.5, 1.0, 0.0)

    def test_critical_start(self, rng):
        problem = make_fixture("quadratic-noisy", 2, {"center": [0.0, 0.0], "noise": 0.0})
        x, rec = run_qsgd(problem, 0.1, ContractBackend(), QueryLedger(), rng)
        np.testing.assert_array_equal(x, 0)
        assert rec.achieved_metric == 0

    def test_stopping_index_uniform(self, monkeypatch):
        # the estimator is stubbed out; only the law of N is under test
        monkeypatch.setattr("qsopt.nonconvex.mlmc_variance_reduce", lambda src, *a: np.zeros(src.dim))
        problem = make_fixture("quadratic-noisy", 2, {"center": [0.3, 0.0], "noise": 0.0})
        T = qsgd_parameters(problem.Delta, problem.ell, 0.15)[0]
        assert 20 <= T <= 30
        rng = Rng(17)
        counts = np.zeros(T + 1, dtype=int)
        for _ in range(100_000):
            _, rec = run_qsgd(problem, 0.15, ContractBackend(), None, rng)
            counts[rec.extra["N"]] += 1
        assert counts[0] == 0
        assert stats.chisquare(counts[1:]).pvalue > 1e-3

    def test_expected_criticality(self):
        problem = make_fixture("quadratic-noisy", 2)
        eps = 0.2
        sq = [run_qsgd(problem, eps, ContractBackend(), None, Rng(4, i))[1].achieved_metric ** 2 for i in range(100)]
        assert np.mean(sq) <= eps**2 + 2 * np.std(sq, ddof=1) / 10


class TestQspider:
    def test_parameters(self):
        q, s1, s2, T = qspider_parameters(1.0, 2.0, 0.5, 0.1)
        assert (q, T) == (200, 1600)
        np.testing.assert_allclose([s1, s2], [0.0025, 0.0025 * 0.1])
        with pytest.raises(ParameterDomainError):
            qspider_parameters(1.0, 2.0, 0.5, 1.5)
        with pytest.raises(ParameterDomainError):
            qspider_parameters(1.0, 2.0, 0.5, 0.0)

    def test_capability(self, rng):
        problem = make_fixture("seeded-smooth-nonconvex", 2)
        problem.oracle = StochasticGradientOracle(2, problem.L)
        with pytest.raises(CapabilityError):
            run_qspider(problem, 0.1, ContractBackend(), None, rng)

    def test_steps_and_anchors(self):
        problem = make_fixture("seeded-smooth-nonconvex", 2)
        eps = 0.1
        for i in range(5):
            _, rec = run_qspider(problem, eps, ContractBackend(), None, Rng(6, i))
            ex = rec.extra
            np.testing.assert_allclose(ex["step_lengths"], eps / problem.ell, rtol=0, atol=1e-12)
            assert ex["anchors"] == ex["t_final"] // ex["q"] + 1
            assert len(ex["step_lengths"]) == ex["t_final"]

    def test_difference_variance(self):
        problem = make_fixture("seeded-smooth-nonconvex", 2)
        _, rec = run_qspider(problem, 0.1, ContractBackend(), None, Rng(8), keep_path=True)
        assert len(rec.extra["path"]) >= 2
        assert spider_variance_checks(problem, rec.extra["path"], Rng(9)) <= 1.0

    def test_ledger_phase(self, rng):
        problem = make_fixture("seeded-smooth-nonconvex", 2)
        led = QueryLedger()
        run_qspider(problem, 0.2, ContractBackend(), led, rng)
        assert led.per_phase["qspider"][0] == led.quantum_queries_charged > 0


class TestBaseline:
    def test_budget_and_charge(self, rng):
        problem = make_fixture("ball-distance", 2, {"noise": 0.5})
        led = QueryLedger()
        x, rec = sgd_baseline(problem, 0.5, led, rng)
        T = math.ceil((2 * problem.L / 0.5) ** 2)
        assert rec.extra["T"] == T
        assert led.quantum_queries_charged == led.classical_samples_drawn == T
        assert np.linalg.norm(x) <= 1.0
        assert rec.achieved_metric <= 0.5
