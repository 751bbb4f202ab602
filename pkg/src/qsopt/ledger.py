"""Query accounting.

A :class:`QueryLedger` records two things per trial: the hypothetical
quantum queries an algorithm would have paid (charged through
:func:`charge_cost`) and the classical samples the simulation actually
drew.  Both are broken down by a phase label.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass


@dataclass(frozen=True)
class CostModel:
    """Concrete cost for one quantum mean-estimation call.

    ``ceil(c_qme * L * sqrt(d) / sigma_hat * max(1, ln(1/delta)))``; with
    ``log_floor=False`` the ``max(1, .)`` guard is dropped.
    """

    c_qme: float = 1.0
    log_floor: bool = True

    def cost(self, L_eff: float, sigma_hat: float, delta: float, dim: int) -> int:
        if not sigma_hat > 0:
            raise ValueError(f"sigma_hat must be positive, got {sigma_hat!r}")
        if not 0 < delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {delta!r}")
        if L_eff < 0:
            raise ValueError(f"L_eff must be non-negative, got {L_eff!r}")
        log_term = math.log(1.0 / delta)
        if self.log_floor:
            log_term = max(1.0, log_term)
        raw = self.c_qme * (L_eff * math.sqrt(dim) / sigma_hat) * log_term
        return int(math.ceil(raw))


class QueryLedger:
    """Monotone per-trial counters of charged queries and drawn samples."""

    def __init__(self, cost_model: CostModel | None = None):
        self.cost_model = cost_model or CostModel()
        self.quantum_queries_charged = 0
        self.classical_samples_drawn = 0
        self.backend_invocations = 0
        self.backend_queries = 0
        self.degraded_events = 0
        self.per_phase: dict[str, list[int]] = {}
        self._phases = ["main"]

    @property
    def current_phase(self) -> str:
        return self._phases[-1]

    @contextmanager
    def phase(self, label: str):
        self._phases.append(label)
        try:
            yield self
        finally:
            self._phases.pop()

    def _bucket(self) -> list[int]:
        return self.per_phase.setdefault(self.current_phase, [0, 0])

    def charge(self, queries: int) -> None:
        if queries < 0:
            raise ValueError("cannot charge a negative number of queries")
        self.quantum_queries_charged += queries
        self._bucket()[0] += queries

    def draw(self, n: int = 1, *, quantum: bool = False) -> None:
        """Record ``n`` classical samples; ``quantum=True`` also charges one query each."""
        if n < 0:
            raise ValueError("cannot draw a negative number of samples")
        self.classical_samples_drawn += n
        self._bucket()[1] += n
        if quantum:
            self.charge(n)

    def mark_degraded(self) -> None:
        self.degraded_events += 1

    @property
    def degraded(self) -> bool:
        return self.degraded_events > 0

    def merge(self, other: "QueryLedger") -> "QueryLedger":
        """Component-wise sum of two ledgers (used when matches run in parallel)."""
        self.quantum_queries_charged += other.quantum_queries_charged
        self.classical_samples_drawn += other.classical_samples_drawn
        self.backend_invocations += other.backend_invocations
        self.backend_queries += other.backend_queries
        self.degraded_events += other.degraded_events
        for label, (q, s) in other.per_phase.items():
            bucket = self.per_phase.setdefault(label, [0, 0])
            bucket[0] += q
            bucket[1] += s
        return self

    def snapshot(self) -> dict:
        return {
            "quantum_queries_charged": self.quantum_queries_charged,
            "classical_samples_drawn": self.classical_samples_drawn,
            "backend_invocations": self.backend_invocations,
            "backend_queries": self.backend_queries,
            "degraded_events": self.degraded_events,
            "per_phase": {k: tuple(v) for k, v in sorted(self.per_phase.items())},
        }


def charge_cost(
    ledger: QueryLedger | None,
    L_eff: float,
    sigma_hat: float,
    delta: float,
    dim: int,
    *,
    cost_model: CostModel | None = None,
) -> int:
    """Charge one quantum mean-estimation call and return its cost."""
    model = cost_model or (ledger.cost_model if ledger is not None else CostModel())
    q = model.cost(L_eff, sigma_hat, delta, dim)
    if ledger is not None:
        ledger.backend_invocations += 1
        ledger.backend_queries += q
        ledger.charge(q)
    return q
