"""Cutting-plane localisation of an epsilon-optimal point.

A central-cut ellipsoid engine over ``B_2R(0)`` is driven by an approximate
gradient oracle.  Every centre inside ``B_R(0)`` is queried and kept as a
candidate; centres outside the ball are cut by the ball itself for free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericDegeneracyError
from .ledger import QueryLedger
from .mean_estimation import GradientSource, approx_gradient


@dataclass
class SeparationResponse:
    """A cut through ``point``; a zero ``direction`` means ``point`` is feasible."""

    point: np.ndarray
    direction: np.ndarray

    @property
    def feasible(self) -> bool:
        return not np.any(self.direction)


class EllipsoidEngine:
    """Central-cut ellipsoid ``{z : (z - c)^T P^-1 (z - c) <= 1}``.

    Starts at the ball of radius ``R_outer``; in one dimension the update
    is exact bisection.
    """

    kind = "ellipsoid"

    def __init__(self, dim: int, R_outer: float, r_inner: float | None = None, center=None):
        if not R_outer > 0:
            raise ValueError("R_outer must be positive")
        self.dim = int(dim)
        self.R_outer = float(R_outer)
        self.r_inner = r_inner
        self.center = np.zeros(self.dim) if center is None else np.array(center, dtype=np.float64)
        self.P = (self.R_outer**2) * np.eye(self.dim)
        self.cuts = 0

    @property
    def volume_ratio(self) -> float:
        """Current volume divided by the initial volume."""
        sign, logdet = np.linalg.slogdet(self.P)
        if sign <= 0:
            return 0.0
        return math.exp(0.5 * logdet - self.dim * math.log(self.R_outer))

    def budget(self) -> int:
        """``ceil(2 (d+1) d ln(R_outer / r_inner)) + 1`` cuts."""
        d = self.dim
        return math.ceil(2.0 * (d + 1) * d * math.log(self.R_outer / self.r_inner)) + 1

    def cut(self, response: SeparationResponse) -> np.ndarray:
        """Keep ``{z : <a, z> <= <a, c>}`` and return the new centre."""
        a = np.asarray(response.direction, dtype=np.float64)
        if not np.any(a):
            return self.center
        d = self.dim
        Pa = self.P @ a
        aPa = float(a @ Pa)
        if not (aPa > 0 and math.isfinite(aPa)):
            raise NumericDegeneracyError("ellipsoid shape matrix is no longer positive definite")
        b = Pa / math.sqrt(aPa)
        if d == 1:
            self.center = self.center - 0.5 * b
            self.P = self.P / 4.0
        else:
            self.center = self.center - b / (d + 1)
            P = (d * d / (d * d - 1.0)) * (self.P - (2.0 / (d + 1)) * np.outer(b, b))
            P = 0.5 * (P + P.T)
            try:
                np.linalg.cholesky(P)
            except np.linalg.LinAlgError as exc:
                raise NumericDegeneracyError("ellipsoid shape matrix lost positive definiteness") from exc
            self.P = P
        self.cuts += 1
        return self.center


def ellipsoid_cut(engine: EllipsoidEngine, response: SeparationResponse) -> np.ndarray:
    return engine.cut(response)


@dataclass(frozen=True)
class ScpParameters:
    r_K: float
    r_inner: float
    budget: int
    delta_err: float
    xi: float


def scp_parameters(d, L, R, epsilon) -> ScpParameters:
    """Cut budget and oracle accuracy for the cutting-plane phase.

    The cuts keep the epsilon/2-optimal set, which contains a ball of radius
    ``r_K = eps/(2L)``; the engine works with half of that so the volume
    argument has slack.  Oracle failure is split evenly over the budget.
    """
    r_K = epsilon / (2.0 * L)
    r_inner = r_K / 2.0
    budget = math.ceil(2.0 * (d + 1) * d * math.log(2.0 * R / r_inner)) + 1
    return ScpParameters(r_K, r_inner, budget, epsilon / (10.0 * R), 1.0 / (6.0 * budget))


def run_scp_candidates(problem, epsilon, backend, ledger=None, rng=None):
    """Return ``(candidates, degraded)``; one candidate is epsilon-optimal w.p. >= 5/6."""
    ledger = ledger if ledger is not None else QueryLedger()
    d, L, R = problem.dim, problem.L, problem.R
    if epsilon >= L * R:
        return [np.zeros(d)], False
    params = scp_parameters(d, L, R, epsilon)
    engine = EllipsoidEngine(d, 2.0 * R, params.r_inner)
    candidates = []
    degraded = False
    x = engine.center.copy()
    for _ in range(params.budget):
        nx = math.sqrt(float(x @ x))
        if nx > R:
            response = SeparationResponse(x, x.copy())
        else:
            candidates.append(x.copy())
            src = GradientSource(problem.oracle, x, L_eff=L)
            g = approx_gradient(src, params.delta_err, params.xi, backend, ledger, rng)
            response = SeparationResponse(x, g)
            if response.feasible:
                break
        try:
            x = engine.cut(response).copy()
        except NumericDegeneracyError:
            ledger.mark_degraded()
            degraded = True
            break
    if not candidates:
        # every centre fell outside B_R; the origin is a valid fallback
        candidates.append(np.zeros(d))
    return candidates, degraded
