"""Experiment rows and their CSV form."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

CSV_HEADER = (
    "algorithm",
    "fixture",
    "d",
    "epsilon",
    "seed",
    "queries",
    "classical_samples",
    "metric",
    "wall_ms",
    "degraded",
)


@dataclass
class RunRecord:
    algorithm: str
    fixture: str
    d: int
    epsilon: float
    seed: int
    quantum_queries_charged: int = 0
    classical_samples_drawn: int = 0
    achieved_metric: float = math.nan
    phases: dict = field(default_factory=dict)
    wall_ms: float = 0.0
    degraded: bool = False
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_ledger(cls, algorithm, problem, epsilon, seed, ledger, metric, **extra):
        snap = ledger.snapshot()
        return cls(
            algorithm=algorithm,
            fixture=problem.kind,
            d=problem.dim,
            epsilon=float(epsilon),
            seed=int(seed),
            quantum_queries_charged=snap["quantum_queries_charged"],
            classical_samples_drawn=snap["classical_samples_drawn"],
            achieved_metric=float(metric),
            phases=snap["per_phase"],
            degraded=ledger.degraded,
            extra=extra,
        )

    def csv_row(self) -> list[str]:
        return [
            self.algorithm,
            self.fixture,
            str(self.d),
            repr(float(self.epsilon)),
            str(self.seed),
            str(self.quantum_queries_charged),
            str(self.classical_samples_drawn),
            repr(float(self.achieved_metric)),
            f"{self.wall_ms:.3f}",
            "1" if self.degraded else "0",
        ]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["phases"] = {k: list(v) for k, v in self.phases.items()}
        return out
