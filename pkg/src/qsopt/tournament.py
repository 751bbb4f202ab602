"""Pairwise line-search tournament and the full Q-SCP pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cutting_plane import run_scp_candidates
from .ledger import QueryLedger
from .mean_estimation import ProjectedSource, approx_gradient
from .records import RunRecord


@dataclass
class Segment:
    y_l: np.ndarray
    y_r: np.ndarray

    @property
    def length(self) -> float:
        diff = self.y_r - self.y_l
        return math.sqrt(float(diff @ diff))

    @property
    def e_hat(self) -> np.ndarray:
        n = self.length
        if n == 0.0:
            return np.zeros_like(self.y_l)
        return (self.y_r - self.y_l) / n


def line_search_failure(T, R, L, eps_prime) -> float:
    """Per-estimate failure probability ``1/(6 T log2(2RL/eps'))``."""
    return 1.0 / (6.0 * T * max(1.0, math.log2(2.0 * R * L / eps_prime)))


def stochastic_line_search(
    oracle, y_l0, y_r0, eps_prime, R, L, tournament_size, backend, ledger=None, rng=None, stats=None
):
    """Bisection on ``[y_l0, y_r0]`` driven by directional-derivative estimates.

    Returns ``y_m`` as soon as the estimate at the midpoint is at most
    ``eps'/(4R)`` in magnitude, otherwise ``y_l`` once the bracket is shorter
    than ``eps'/L``.  ``stats`` (a dict) receives the iteration count.
    """
    if not eps_prime > 0:
        raise ValueError("eps_prime must be positive")
    y_l = np.array(y_l0, dtype=np.float64)
    y_r = np.array(y_r0, dtype=np.float64)
    if stats is not None:
        stats["iterations"] = 0
    if np.array_equal(y_l, y_r):
        return y_l
    seg = Segment(y_l, y_r)
    e_hat = seg.e_hat
    tol = eps_prime / (4.0 * R)
    xi = line_search_failure(tournament_size, R, L, eps_prime)
    while True:
        y_m = 0.5 * (y_l + y_r)
        src = ProjectedSource(oracle, y_m, e_hat, L_eff=L)
        g = float(approx_gradient(src, tol, xi, backend, ledger, rng)[0])
        if stats is not None:
            stats["iterations"] += 1
        if abs(g) <= tol:
            return y_m
        if g > 0:
            y_r = y_m
        else:
            y_l = y_m
        if math.sqrt(float((y_r - y_l) @ (y_r - y_l))) <= eps_prime / L:
            return y_l


def _pad_pow2(points):
    n = len(points)
    size = 1 << (n - 1).bit_length()
    return points + [points[0]] * (size - n)


def best_point_tournament(oracle, points, epsilon, R, L, backend, ledger=None, rng=None):
    """Approximately best convex combination of ``points``.

    The list is padded to a power of two with copies of the first point and
    reduced level by level; each match is a line search at ``eps/log2 T``.
    Matches use the child streams ``rng.child(("match", level, j))``.
    """
    points = [np.array(p, dtype=np.float64) for p in points]
    if not points:
        raise ValueError("tournament needs at least one point")
    level = _pad_pow2(points)
    T = len(level)
    if T == 1:
        return level[0]
    eps_prime = epsilon / math.log2(T)
    tau = 0
    while len(level) > 1:
        tau += 1
        level = [
            stochastic_line_search(
                oracle,
                level[2 * j],
                level[2 * j + 1],
                eps_prime,
                R,
                L,
                T,
                backend,
                ledger,
                rng.child(("match", tau, j)),
            )
            for j in range(len(level) // 2)
        ]
    return level[0]


def run_qscp(problem, epsilon, backend, ledger=None, rng=None):
    """Cutting-plane candidates followed by the tournament; returns ``(x_out, record)``."""
    ledger = ledger if ledger is not None else QueryLedger()
    with ledger.phase("cutting-plane"):
        candidates, degraded = run_scp_candidates(problem, epsilon, backend, ledger, rng)
    with ledger.phase("tournament"):
        x_out = best_point_tournament(
            problem.oracle, candidates, epsilon, problem.R, problem.L, backend, ledger, rng
        )
    gap = problem.gap(x_out)
    best = min(problem.gap(c) for c in candidates)
    rec = RunRecord.from_ledger(
        "qscp",
        problem,
        epsilon,
        rng.seed,
        ledger,
        gap,
        candidates=len(candidates),
        best_candidate_gap=best,
        success=gap <= epsilon,
    )
    return x_out, rec
