"""Simulated quantum algorithms for stochastic convex and non-convex optimisation.

Quantum mean estimation is modelled by a query ledger; everything else
(oracles, MLMC de-biasing, solvers) runs classically on numpy.
"""

from .acsa import acsa_parameters, run_acsa
from .errors import (
    CapabilityError,
    ConfigError,
    ContractViolation,
    DimensionError,
    NonFiniteInputError,
    NumericDegeneracyError,
    ParameterDomainError,
    QsoptError,
)
from .fixtures import ProblemInstance, make_fixture, make_hard_instance, offline_truth
from .kernels import BACKEND as KERNEL_BACKEND
from .ledger import CostModel, QueryLedger, charge_cost
from .mean_estimation import (
    approx_gradient,
    estimate_mean,
    make_backend,
    mlmc_variance_reduce,
    qme_plus,
)
from .nonconvex import run_qsgd, run_qspider, sgd_baseline
from .records import RunRecord
from .rng import Rng, derive_seed
from .tournament import best_point_tournament, run_qscp, stochastic_line_search

__version__ = "0.1.0"
