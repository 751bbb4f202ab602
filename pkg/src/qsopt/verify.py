"""Statistical self-checks run by ``qsopt verify``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .acsa import acsa_bound, run_acsa
from .fixtures import make_fixture
from .ledger import QueryLedger
from .mean_estimation import (
    ConstantSource,
    ContractBackend,
    DifferenceSource,
    finite_source,
    make_backend,
    mlmc_batch,
    qme_wrapper_batch,
)
from .nonconvex import run_qspider
from .rng import Rng
from .tournament import run_qscp

SUITES = ("mlmc", "lemma22", "acsa-bound", "qscp-success", "spider-variance")

PLUS_MINUS_E = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


@dataclass
class Check:
    name: str
    measured: float
    bound: float

    @property
    def passed(self) -> bool:
        return bool(self.measured <= self.bound)

    @property
    def margin(self) -> float:
        return self.bound - self.measured

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: measured={self.measured:.6g} bound={self.bound:.6g} margin={self.margin:.6g}"


def suite_mlmc(seed=0, runs=20000):
    sigma = 0.3
    rng = Rng(seed, 1)
    const = ConstantSource(np.array([0.5, -0.25]), L_eff=1.0)
    out = mlmc_batch(const, sigma, 100, make_backend("contract"), None, rng)
    checks = [Check("constant source exact", float(np.abs(out - const.value).max()), 0.0)]
    src = finite_source(PLUS_MINUS_E)
    for name, backend in [
        ("sample", make_backend("sample")),
        ("contract-honest", ContractBackend("honest")),
        ("contract-adversarial-failures", ContractBackend("adversarial", failure_injection=True)),
    ]:
        n = runs if name != "sample" else runs // 4
        est = mlmc_batch(src, sigma, n, backend, None, rng.child(name))
        checks.append(
            Check(f"{name} mean norm", float(np.linalg.norm(est.mean(axis=0))), 5.0 * sigma / math.sqrt(n))
        )
        checks.append(Check(f"{name} E||err||^2 / sigma^2", float((est**2).sum(axis=1).mean()) / sigma**2, 1.2))
    return checks


def suite_lemma22(seed=0, runs=100000):
    rng = Rng(seed, 2)
    src = finite_source(PLUS_MINUS_E)
    L = src.L_eff
    checks = []
    for sigma in (0.3, 0.5):
        backend = ContractBackend("adversarial", failure_injection=True)
        delta = sigma**6 / L**6
        D = sigma + L**3 / sigma**2
        est, _ = qme_wrapper_batch(src, np.full(runs, sigma), delta, D, backend, None, rng.child(sigma))
        mse = float((est**2).sum(axis=1).mean())
        checks.append(Check(f"sigma={sigma} E||Z-mu||^2 / sigma^2", mse / sigma**2, 13.0))
    return checks


def suite_acsa_bound(seed=0, trials=100, epsilon=0.2):
    problem = make_fixture("quadratic", 2)
    gaps = []
    params = None
    for i in range(trials):
        _, rec = run_acsa(problem, epsilon, make_backend("contract"), QueryLedger(), Rng(seed, 100 + i))
        params = rec.extra["state"].params
        gaps.append(rec.achieved_metric)
    # F_r - F_r* equals f - f* for a quadratic whose minimiser lies in the ball
    bound = acsa_bound(problem.L, problem.R, params.r, params.T, params.sigma_hat)
    return [Check(f"E[F_r(x_ag) - F_r*] at eps={epsilon}", float(np.mean(gaps)), bound)]


def suite_qscp_success(seed=0, trials=100, epsilon=0.1):
    problem = make_fixture("ball-distance", 2, {"noise": 0.5})
    ok = []
    for i in range(trials):
        _, rec = run_qscp(problem, epsilon, make_backend("contract"), QueryLedger(), Rng(seed, 200 + i))
        ok.append(rec.achieved_metric <= epsilon)
    p = float(np.mean(ok))
    se = math.sqrt(max(p * (1 - p), 1e-12) / trials)
    # reported as failure frequency against its allowance
    return [Check("failure frequency", 1.0 - p, 1.0 / 3.0 + 3.0 * se)]


def spider_variance_checks(problem, path, rng, probes=1000):
    ell = problem.ell
    worst = 0.0
    for x_prev, x in zip(path[:-1], path[1:]):
        src = DifferenceSource(problem.oracle, x, x_prev, L_eff=0.0)
        D = src.draw(rng, probes)
        var = float(D.var(axis=0).sum())
        dx = x - x_prev
        worst = max(worst, var / (ell**2 * float(dx @ dx)))
    return worst


def suite_spider_variance(seed=0, epsilon=0.1, probes=1000):
    problem = make_fixture("seeded-smooth-nonconvex", 2)
    _, rec = run_qspider(problem, epsilon, make_backend("contract"), QueryLedger(), Rng(seed, 3), keep_path=True)
    worst = spider_variance_checks(problem, rec.extra["path"], Rng(seed, 4), probes)
    steps = np.asarray(rec.extra["step_lengths"])
    dev = float(np.abs(steps - epsilon / problem.ell).max()) if steps.size else 0.0
    return [
        Check("max Var[D] / (ell^2 ||dx||^2)", worst, 1.0),
        Check("max |step - eps/ell|", dev, 1e-12),
    ]


SUITE_FUNCS = {
    "mlmc": suite_mlmc,
    "lemma22": suite_lemma22,
    "acsa-bound": suite_acsa_bound,
    "qscp-success": suite_qscp_success,
    "spider-variance": suite_spider_variance,
}


def run_suite(name, seed=0):
    if name not in SUITE_FUNCS:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
    return SUITE_FUNCS[name](seed=seed)
