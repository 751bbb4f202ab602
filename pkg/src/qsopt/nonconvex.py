"""Expected epsilon-critical points: Q-SGD, Q-SPIDER and a classical SGD reference."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import CapabilityError, ParameterDomainError
from .ledger import QueryLedger
from .mean_estimation import DifferenceSource, GradientSource, mlmc_variance_reduce
from .records import RunRecord


def _require(problem, *names):
    missing = [n for n in names if getattr(problem, n) is None]
    if missing:
        raise ValueError(f"{problem.kind} fixture lacks {', '.join(missing)}")


class QsgdParameters(NamedTuple):
    T: int
    sigma_hat: float


def qsgd_parameters(Delta, ell, epsilon) -> QsgdParameters:
    """``sigma_hat = eps/3`` and ``T = ceil(12 Delta ell / eps^2)`` (at least 1)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    T = max(1, math.ceil(12.0 * Delta * ell / epsilon**2))
    return QsgdParameters(T, epsilon / 3.0)


def run_qsgd(problem, epsilon, backend, ledger=None, rng=None):
    """Randomised-stopping SGD with MLMC gradients; returns ``(x_N, record)``.

    ``N`` is uniform on ``1..T`` and the run takes ``N`` steps from the origin.
    """
    _require(problem, "ell", "sigma", "Delta")
    ledger = ledger if ledger is not None else QueryLedger()
    ell = problem.ell
    T, sigma_hat = qsgd_parameters(problem.Delta, ell, epsilon)
    N = int(rng.integers(1, T, endpoint=True))
    x = np.zeros(problem.dim)
    with ledger.phase("qsgd"):
        for _ in range(N):
            src = GradientSource(problem.oracle, x, L_eff=problem.sigma)
            g = mlmc_variance_reduce(src, sigma_hat, backend, ledger, rng)
            x = x - g / ell
    rec = RunRecord.from_ledger(
        "qsgd", problem, epsilon, rng.seed, ledger, problem.grad_norm(x), N=N, T=T
    )
    return x, rec


class QspiderParameters(NamedTuple):
    q: int
    sigma_hat_1: float
    sigma_hat_2: float
    T: int


def qspider_parameters(sigma, ell, Delta, epsilon) -> QspiderParameters:
    """``q = 20 sigma/eps``, ``sigma_hat_1 = eps/40``,
    ``sigma_hat_2 = (eps/40) sqrt(eps/(10 sigma))`` and ``T = 1600 ell Delta / sigma^2``,
    with ``q`` and ``T`` rounded up.
    """
    if not epsilon > 0:
        raise ParameterDomainError("epsilon must be positive")
    if epsilon > sigma:
        raise ParameterDomainError(f"epsilon={epsilon:g} exceeds sigma={sigma:g}")
    q = max(1, math.ceil(20.0 * sigma / epsilon))
    s1 = epsilon / 40.0
    s2 = s1 * math.sqrt(epsilon / (10.0 * sigma))
    T = max(1, math.ceil(1600.0 * ell * Delta / sigma**2))
    return QspiderParameters(q, s1, s2, T)


def run_qspider(problem, epsilon, backend, ledger=None, rng=None, keep_path=False):
    """SPIDER with quantum variance reduction; returns ``(x_out, record)``.

    Anchors (``t mod q == 0``) estimate the gradient itself; other steps
    estimate the gradient difference through the shared-seed source with
    second-moment bound ``ell ||x_t - x_{t-1}||``.  Steps are normalised to
    length ``eps/ell``.  Stops when ``||v_t|| <= 2 eps``.  With
    ``keep_path`` the iterates are stored in ``record.extra["path"]``.
    """
    _require(problem, "ell", "sigma", "Delta")
    oracle = problem.oracle
    if not oracle.supports_shared_seed:
        raise CapabilityError("Q-SPIDER needs a shared-seed oracle")
    ell, sigma = problem.ell, problem.sigma
    q, s1, s2, T = qspider_parameters(sigma, ell, problem.Delta, epsilon)
    ledger = ledger if ledger is not None else QueryLedger()
    step = epsilon / ell
    x = np.zeros(problem.dim)
    x_prev = x
    v = None
    anchors = 0
    step_lengths = []
    path = [x] if keep_path else None
    t_final = T
    stopped = False
    with ledger.phase("qspider"):
        for t in range(T + 1):
            if t % q == 0:
                src = GradientSource(oracle, x, L_eff=sigma)
                v = mlmc_variance_reduce(src, s1, backend, ledger, rng)
                anchors += 1
            else:
                diff = x - x_prev
                src = DifferenceSource(oracle, x, x_prev, L_eff=ell * math.sqrt(float(diff @ diff)))
                v = v + mlmc_variance_reduce(src, s2, backend, ledger, rng)
            vn = math.sqrt(float(v @ v))
            if vn <= 2.0 * epsilon:
                t_final = t
                stopped = True
                break
            if t == T:
                break
            x_prev = x
            x = x - step * v / vn
            step_lengths.append(math.sqrt(float((x - x_prev) @ (x - x_prev))))
            if keep_path:
                path.append(x)
    rec = RunRecord.from_ledger(
        "qspider",
        problem,
        epsilon,
        rng.seed,
        ledger,
        problem.grad_norm(x),
        q=q,
        T=T,
        t_final=t_final,
        stopped=stopped,
        anchors=anchors,
        step_lengths=step_lengths,
        path=path,
    )
    return x, rec


def sgd_baseline(problem, epsilon, ledger=None, rng=None):
    """Projected averaged SGD on ``B_R``: ``T = ceil((2LR/eps)^2)``, ``eta = 2R/(L sqrt T)``.

    Every stochastic gradient counts as one query.
    """
    ledger = ledger if ledger is not None else QueryLedger()
    L, R = problem.L, problem.R
    T = max(1, math.ceil((2.0 * L * R / epsilon) ** 2))
    eta = 2.0 * R / (L * math.sqrt(T))
    x = np.zeros(problem.dim)
    avg = np.zeros(problem.dim)
    chunk = 4096
    with ledger.phase("sgd"):
        for start in range(0, T, chunk):
            m = min(chunk, T - start)
            # one seed block per chunk keeps the draw order fixed
            omegas = rng.seeds(m) if problem.oracle.supports_shared_seed else None
            for i in range(m):
                avg += x
                if omegas is not None:
                    g = problem.oracle.sample_with_seed(x, omegas[i])
                else:
                    g = problem.oracle.sample(x, rng)
                x = x - eta * g
                n = math.sqrt(float(x @ x))
                if n > R:
                    x = x * (R / n)
            ledger.draw(m, quantum=True)
    x_out = avg / T
    metric = problem.gap(x_out) if problem.f_star is not None else problem.grad_norm(x_out)
    rec = RunRecord.from_ledger("sgd-baseline", problem, epsilon, rng.seed, ledger, metric, T=T)
    return x_out, rec
