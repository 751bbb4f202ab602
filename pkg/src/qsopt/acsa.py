"""Accelerated stochastic approximation on a Gaussian-smoothed objective (Q-AC-SA)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .ledger import QueryLedger
from .mean_estimation import GradientSource, mlmc_variance_reduce
from .records import RunRecord


class AcsaParameters(NamedTuple):
    T: int
    sigma_hat: float
    r: float
    gamma: float


def acsa_parameters(d, L, R, epsilon) -> AcsaParameters:
    """``T = ceil(4 d^(1/4) L R / eps)``, ``sigma_hat = d^(1/8)/8 sqrt(L eps / R)``,
    ``r = eps / (4 sqrt(d) L)`` and ``gamma = R sqrt(6 L/r) / ((T + 2)^(3/2) sigma_hat)``.
    """
    if not (epsilon > 0 and L > 0 and R > 0):
        raise ValueError("epsilon, L and R must be positive")
    if epsilon > L * R:
        warnings.warn(
            f"epsilon={epsilon:g} exceeds L*R={L * R:g}; the origin is already epsilon-optimal",
            stacklevel=2,
        )
        epsilon = L * R
    T = math.ceil(4.0 * d**0.25 * L * R / epsilon)
    sigma_hat = d**0.125 / 8.0 * math.sqrt(L * epsilon / R)
    r = epsilon / (4.0 * math.sqrt(d) * L)
    ell_F = L / r
    gamma = R * math.sqrt(6.0 * ell_F) / ((T + 2) ** 1.5 * sigma_hat)
    return AcsaParameters(T, sigma_hat, r, gamma)


def acsa_bound(L, R, r, T, sigma_hat) -> float:
    """Expected smoothed gap after ``T`` steps: ``4 L R^2/(r T (T+2)) + 4 R sigma_hat / sqrt(T)``."""
    return 4.0 * L * R**2 / (r * T * (T + 2)) + 4.0 * R * sigma_hat / math.sqrt(T)


def project_ball(z, R):
    n = float(np.linalg.norm(z))
    if n > R:
        return z * (R / n)
    return z


def prox_step(x_md, g_tilde, gamma_t, L, r, R):
    """Minimiser over ``B_R`` of ``gamma_t <g, z - x_md> + L ||x_md - z||^2 / (2r)``.

    Completing the square turns this into the projection of
    ``x_md - (gamma_t r / L) g`` onto the ball.
    """
    if not gamma_t > 0:
        raise ValueError("gamma_t must be positive")
    x_md = np.asarray(x_md, dtype=np.float64)
    g_tilde = np.asarray(g_tilde, dtype=np.float64)
    return project_ball(x_md - (gamma_t * r / L) * g_tilde, R)


@dataclass
class AcsaState:
    x: np.ndarray
    x_ag: np.ndarray
    x_md: np.ndarray
    t: int
    params: AcsaParameters
    history: list = field(default_factory=list)


def run_acsa(problem, epsilon, backend, ledger=None, rng=None, keep_history=False):
    """Run Q-AC-SA on ``problem`` and return ``(x_out, record)``.

    ``record.extra["state"]`` holds the final :class:`AcsaState`.
    """
    ledger = ledger if ledger is not None else QueryLedger()
    d, L, R = problem.dim, problem.L, problem.R
    zero = np.zeros(d)
    if epsilon >= L * R:
        state = AcsaState(zero, zero, zero, 0, AcsaParameters(0, math.nan, math.nan, math.nan))
        rec = RunRecord.from_ledger("acsa", problem, epsilon, rng.seed, ledger, problem.gap(zero), state=state)
        return zero, rec
    params = acsa_parameters(d, L, R, epsilon)
    T, sigma_hat, r, gamma = params
    oracle = problem.convolved_oracle(r)
    state = AcsaState(zero.copy(), zero.copy(), zero.copy(), 1, params)
    with ledger.phase("acsa"):
        for t in range(1, T + 1):
            beta = (t + 1) / 2.0
            gamma_t = (t + 1) * gamma / 2.0
            x_md = state.x / beta + (1.0 - 1.0 / beta) * state.x_ag
            src = GradientSource(oracle, x_md, L_eff=L)
            g = mlmc_variance_reduce(src, sigma_hat, backend, ledger, rng)
            x_next = prox_step(x_md, g, gamma_t, L, r, R)
            state.x_ag = project_ball(x_next / beta + (1.0 - 1.0 / beta) * state.x_ag, R)
            state.x = x_next
            state.x_md = x_md
            state.t = t + 1
            if keep_history:
                state.history.append((x_md.copy(), state.x.copy(), state.x_ag.copy()))
    x_out = state.x_ag.copy()
    rec = RunRecord.from_ledger("acsa", problem, epsilon, rng.seed, ledger, problem.gap(x_out), state=state)
    return x_out, rec
