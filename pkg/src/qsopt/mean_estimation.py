"""Quantum mean estimation, its outlier-rejecting wrapper and MLMC de-biasing.

The quantum estimator itself is not simulated at circuit level.  A backend
produces an estimate satisfying the estimator's contract (error at most
``sigma_hat`` with probability ``1 - delta``) and charges the ledger the
corresponding query cost.  Two backends exist:

* :class:`ContractBackend` perturbs the true mean directly (needs a source
  with an exact mean; fast, supports adversarial and failure policies);
* :class:`SampleBackend` realises the contract classically with a
  groups-of-means selection rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import CapabilityError, ContractViolation
from .ledger import charge_cost
from .oracles import FiniteSupportOracle, StochasticGradientOracle, as_point

# ---------------------------------------------------------------------------
# random variable sources


class RandomVariableSource:
    """A vector random variable with a known second-moment (variance) bound."""

    def __init__(self, dim: int, L_eff: float):
        self.dim = int(dim)
        if L_eff < 0:
            raise ValueError("L_eff must be non-negative")
        self.L_eff = float(L_eff)

    @property
    def degenerate(self) -> bool:
        return False

    @property
    def has_exact_mean(self) -> bool:
        return False

    def exact_mean(self) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} has no exact mean")

    def draw(self, rng, n: int = 1) -> np.ndarray:
        raise NotImplementedError

    def group_means(self, n, k, rng, max_group_draws=None):
        raise NotImplementedError


class ConstantSource(RandomVariableSource):
    def __init__(self, value, L_eff: float = 0.0):
        value = np.atleast_1d(np.asarray(value, dtype=np.float64))
        super().__init__(value.shape[0], L_eff)
        self.value = value

    @property
    def degenerate(self):
        return True

    @property
    def has_exact_mean(self):
        return True

    def exact_mean(self):
        return self.value.copy()

    def draw(self, rng, n=1):
        return np.tile(self.value, (n, 1))

    def group_means(self, n, k, rng, max_group_draws=None):
        return np.tile(self.value, (k, 1)), int(n)


class GradientSource(RandomVariableSource):
    """Stochastic gradient of an oracle at a fixed point."""

    def __init__(self, oracle: StochasticGradientOracle, x, L_eff=None):
        if L_eff is None:
            L_eff = oracle.lipschitz_bound
        super().__init__(oracle.dim, L_eff)
        self.oracle = oracle
        self.x = as_point(x, oracle.dim)

    @property
    def degenerate(self):
        return self.oracle.deterministic

    @property
    def has_exact_mean(self):
        return self.oracle.supports_exact_mean

    def exact_mean(self):
        return self.oracle.exact_mean(self.x)

    def draw(self, rng, n=1):
        return self.oracle._draw_at(np.broadcast_to(self.x, (n, self.dim)), rng)

    def group_means(self, n, k, rng, max_group_draws=None):
        return self.oracle.group_means(self.x, n, k, rng, max_group_draws)


class ProjectedSource(RandomVariableSource):
    """Scalar ``<g(x), e>``; the line search's univariate estimation problem."""

    def __init__(self, oracle: StochasticGradientOracle, x, direction, L_eff=None):
        if L_eff is None:
            L_eff = oracle.lipschitz_bound
        super().__init__(1, L_eff)
        self.oracle = oracle
        self.x = as_point(x, oracle.dim)
        self.direction = as_point(direction, oracle.dim)

    @property
    def degenerate(self):
        return self.oracle.deterministic

    @property
    def has_exact_mean(self):
        return self.oracle.supports_exact_mean

    def exact_mean(self):
        return np.array([self.oracle.exact_mean(self.x) @ self.direction])

    def draw(self, rng, n=1):
        g = self.oracle._draw_at(np.broadcast_to(self.x, (n, self.oracle.dim)), rng)
        return (g @ self.direction)[:, None]

    def group_means(self, n, k, rng, max_group_draws=None):
        # projection is linear, so projected group means have the exact law
        means, used = self.oracle.group_means(self.x, n, k, rng, max_group_draws)
        return (means @ self.direction)[:, None], used


class DifferenceSource(RandomVariableSource):
    """Shared-seed difference ``g(x, w) - g(y, w)`` with a common seed ``w``."""

    def __init__(self, oracle: StochasticGradientOracle, x, y, L_eff=None):
        if not oracle.supports_shared_seed:
            raise CapabilityError("difference source needs a shared-seed oracle")
        x = as_point(x, oracle.dim)
        y = as_point(y, oracle.dim)
        if L_eff is None:
            ell = oracle.mean_square_smoothness
            if ell is None:
                raise ValueError("oracle has no mean-squared smoothness; pass L_eff")
            L_eff = ell * float(np.linalg.norm(x - y))
        super().__init__(oracle.dim, L_eff)
        self.oracle = oracle
        self.x = x
        self.y = y

    @property
    def degenerate(self):
        return self.oracle.deterministic or bool(np.array_equal(self.x, self.y))

    @property
    def has_exact_mean(self):
        return self.oracle.supports_exact_mean

    def exact_mean(self):
        return self.oracle.exact_mean(self.x) - self.oracle.exact_mean(self.y)

    def draw(self, rng, n=1):
        omegas = rng.seeds(n)
        X = np.broadcast_to(self.x, (n, self.dim))
        Y = np.broadcast_to(self.y, (n, self.dim))
        return self.oracle._seeded_at(X, omegas) - self.oracle._seeded_at(Y, omegas)

    def group_means(self, n, k, rng, max_group_draws=None):
        n = int(n)
        if max_group_draws is not None:
            n = min(n, int(max_group_draws))
        chunk = max(1, min(n, (1 << 17) // max(k, 1)))
        sums = np.zeros((k, self.dim))
        done = 0
        while done < n:
            m = min(chunk, n - done)
            sums += self.draw(rng, k * m).reshape(k, m, self.dim).sum(axis=1)
            done += m
        return sums / n, n


def finite_source(values, weights=None, L_eff=None) -> GradientSource:
    """Source drawing uniformly (or by ``weights``) from the rows of ``values``."""
    oracle = FiniteSupportOracle(values, weights)
    if L_eff is None:
        L_eff = oracle.lipschitz_bound
    return GradientSource(oracle, np.zeros(oracle.dim), L_eff=L_eff)


# ---------------------------------------------------------------------------
# backends
#
# Backends work on batches: ``_estimate_batch(src, sigmas, deltas, ...)``
# returns one estimate per (sigma, delta) pair.  A batch of m pairs stands
# for m independent estimator calls and is charged as such.


def _unit_rows(rng, m, d):
    V = rng.standard_normal((m, d))
    n = np.sqrt(np.einsum("ij,ij->i", V, V))
    while np.any(n == 0.0):
        bad = n == 0.0
        V[bad] = rng.standard_normal((int(bad.sum()), d))
        n = np.sqrt(np.einsum("ij,ij->i", V, V))
    return V / n[:, None]


@dataclass
class ContractBackend:
    """Returns ``mu + eta`` with ``||eta|| <= sigma_hat``.

    ``policy="honest"``: ``eta = sigma_hat/(2 sqrt(d)) * z`` clipped to norm
    ``sigma_hat``.  ``policy="adversarial"``: ``||eta|| = sigma_hat`` in a
    uniformly random direction.  With ``failure_injection`` the estimate is
    replaced, with probability ``delta``, by ``mu + rho * u`` where ``rho``
    defaults to ``10 L^3 / sigma_hat^2``.
    """

    policy: str = "honest"
    failure_injection: bool = False
    failure_radius: float | None = None
    mode = "contract"

    def __post_init__(self):
        if self.policy not in ("honest", "adversarial"):
            raise ValueError(f"unknown contract policy {self.policy!r}")

    def _estimate_batch(self, src, sigmas, deltas, ledger, rng):
        if not src.has_exact_mean:
            raise CapabilityError("contract backend needs a source with an exact mean")
        mu = src.exact_mean()
        m, d = sigmas.shape[0], src.dim
        if self.policy == "adversarial":
            eta = sigmas[:, None] * _unit_rows(rng, m, d)
        else:
            eta = (sigmas / (2.0 * math.sqrt(d)))[:, None] * rng.standard_normal((m, d))
            norms = np.sqrt(np.einsum("ij,ij->i", eta, eta))
            over = norms > sigmas
            if np.any(over):
                eta[over] *= (sigmas[over] / norms[over])[:, None]
        out = mu + eta
        if self.failure_injection:
            fail = rng.random(m) < deltas
            if np.any(fail):
                if self.failure_radius is None:
                    rho = 10.0 * src.L_eff**3 / sigmas[fail] ** 2
                else:
                    rho = np.full(int(fail.sum()), float(self.failure_radius))
                out[fail] = mu + rho[:, None] * _unit_rows(rng, int(fail.sum()), d)
        return out


@dataclass
class SampleBackend:
    """Groups-of-means realisation of the estimator contract.

    ``k = ceil(log2(1/delta)) + 10`` groups of ``n = ceil(16 L^2/sigma_hat^2)``
    draws; returns the first group mean within ``sigma_hat/2`` of at least
    ``ceil(2k/3)`` other group means, or the medoid (marked degraded) if none
    qualifies.  Groups larger than ``max_group_draws`` are truncated unless
    the source has a closed-form law for its group mean.
    """

    max_group_draws: int = 1 << 22
    mode = "sample"

    def _estimate_one(self, src, sigma_hat, delta, ledger, rng):
        k = group_count(delta)
        n = math.ceil(16.0 * src.L_eff**2 / sigma_hat**2)
        means, used = src.group_means(n, k, rng, self.max_group_draws)
        if ledger is not None:
            ledger.draw(used * k)
            if used < n:
                ledger.mark_degraded()
        idx = kernels.consensus_index(means, 0.5 * sigma_hat, math.ceil(2 * k / 3))
        if idx < 0:
            if ledger is not None:
                ledger.mark_degraded()
            idx = kernels.medoid_index(means)
        return means[idx]

    def _estimate_batch(self, src, sigmas, deltas, ledger, rng):
        out = np.empty((sigmas.shape[0], src.dim))
        for i in range(sigmas.shape[0]):
            out[i] = self._estimate_one(src, float(sigmas[i]), float(deltas[i]), ledger, rng)
        return out


def group_count(prob: float) -> int:
    """``ceil(log2(1/prob)) + 10``."""
    return math.ceil(math.log2(1.0 / prob)) + 10


def make_backend(mode: str = "contract", **kwargs):
    if mode == "contract":
        return ContractBackend(**kwargs)
    if mode in ("sample", "sample-based"):
        return SampleBackend(**kwargs)
    raise ValueError(f"unknown backend mode {mode!r}")


def estimate_mean_batch(backend, src, sigmas, deltas, ledger=None, rng=None) -> np.ndarray:
    """``len(sigmas)`` independent estimator calls; one ledger charge each."""
    sigmas = np.asarray(sigmas, dtype=np.float64).reshape(-1)
    deltas = np.broadcast_to(np.asarray(deltas, dtype=np.float64), sigmas.shape)
    if not np.all(sigmas > 0):
        raise ValueError("sigma_hat must be positive")
    if not np.all((deltas > 0) & (deltas <= 1)):
        raise ValueError("delta must lie in (0, 1]")
    degenerate = src.degenerate
    if not degenerate and np.any(sigmas > src.L_eff):
        worst = float(sigmas.max())
        raise ContractViolation(f"sigma_hat={worst:g} exceeds the variance bound L={src.L_eff:g}")
    for s, p in zip(sigmas.tolist(), deltas.tolist()):
        charge_cost(ledger, src.L_eff, s, p, src.dim)
    if degenerate:
        return src.draw(rng, sigmas.shape[0]).copy()
    return backend._estimate_batch(src, sigmas, deltas, ledger, rng)


def estimate_mean(backend, src: RandomVariableSource, sigma_hat, delta, ledger=None, rng=None):
    """One call of the quantum mean estimator: one ledger charge, one estimate.

    Requires ``0 < sigma_hat <= src.L_eff`` unless the source is degenerate,
    in which case the constant value is returned exactly.
    """
    if not sigma_hat > 0:
        raise ValueError(f"sigma_hat must be positive, got {sigma_hat!r}")
    return estimate_mean_batch(backend, src, [sigma_hat], [delta], ledger, rng)[0]


# ---------------------------------------------------------------------------
# wrappers


def _classical_draws(src, m, ledger, rng):
    # each classical sample costs one query to the oracle
    if ledger is not None:
        ledger.draw(m, quantum=True)
    return src.draw(rng, m)


def qme_wrapper_batch(src, sigmas, deltas, Ds, backend, ledger=None, rng=None):
    """Vectorised :func:`qme_wrapper`; returns ``(estimates, kept)``."""
    sigmas = np.asarray(sigmas, dtype=np.float64).reshape(-1)
    m = sigmas.shape[0]
    Ds = np.broadcast_to(np.asarray(Ds, dtype=np.float64), (m,))
    x1 = estimate_mean_batch(backend, src, sigmas, deltas, ledger, rng)
    x2 = _classical_draws(src, m, ledger, rng)
    diff = x1 - x2
    kept = np.sqrt(np.einsum("ij,ij->i", diff, diff)) <= Ds
    out = np.array(x1, dtype=np.float64)
    if not np.all(kept):
        out[~kept] = _classical_draws(src, int((~kept).sum()), ledger, rng)
    return out, kept


def qme_wrapper(src, sigma_hat, delta, D, backend, ledger=None, rng=None):
    """Estimate at ``sigma_hat`` with failure ``delta``; keep it if within ``D`` of a fresh draw.

    Returns ``(estimate, kept)``.  ``kept`` is False when the estimate was
    replaced by a second fresh draw.
    """
    out, kept = qme_wrapper_batch(src, [sigma_hat], [delta], [D], backend, ledger, rng)
    return out[0], bool(kept[0])


def qme_plus_parameters(L, sigma_hat):
    """``(delta, D)`` with ``delta = sigma_hat^6/(4L)^6`` and ``D = sigma_hat/4 + 16 L^3/sigma_hat^2``."""
    delta = (sigma_hat / (4.0 * L)) ** 6
    D = sigma_hat / 4.0 + 16.0 * L**3 / sigma_hat**2
    return delta, D


def qme_plus_batch(src, sigmas, backend, ledger=None, rng=None) -> np.ndarray:
    """One :func:`qme_plus` call per entry of ``sigmas``."""
    sigmas = np.asarray(sigmas, dtype=np.float64).reshape(-1)
    if not np.all(sigmas > 0):
        raise ValueError("sigma_hat must be positive")
    out = np.empty((sigmas.shape[0], src.dim))
    loose = sigmas > src.L_eff
    tight = np.flatnonzero(~loose)
    if tight.size:
        s = sigmas[tight]
        deltas, Ds = qme_plus_parameters(src.L_eff, s)
        out[tight] = qme_wrapper_batch(src, s / 4.0, deltas, Ds, backend, ledger, rng)[0]
    if np.any(loose):
        # a single draw already has variance <= L^2 < sigma_hat^2
        out[loose] = _classical_draws(src, int(loose.sum()), ledger, rng)
    return out


def qme_plus(src, sigma_hat, backend, ledger=None, rng=None):
    """Estimate with ``E||result - mu||^2 <= sigma_hat^2``.

    When ``sigma_hat`` exceeds the source's bound a single classical draw
    already has the requested variance and is returned instead.
    """
    return qme_plus_batch(src, [sigma_hat], backend, ledger, rng)[0]


def mlmc_batch(src, sigma_hat, k, backend, ledger=None, rng=None, return_levels=False):
    """``k`` independent outputs of :func:`mlmc_variance_reduce`."""
    if not sigma_hat > 0:
        raise ValueError(f"sigma_hat must be positive, got {sigma_hat!r}")
    J = rng.geometric(0.5, size=k)
    base = sigma_hat / 10.0
    sigmas = np.concatenate(
        [np.full(k, base), base * 2.0 ** (-0.75 * J), base * 2.0 ** (-0.75 * (J - 1))]
    )
    est = qme_plus_batch(src, sigmas, backend, ledger, rng)
    mu0, mu_j, mu_jm1 = est[:k], est[k : 2 * k], est[2 * k :]
    out = mu0 + (2.0**J)[:, None] * (mu_j - mu_jm1)
    if return_levels:
        return out, J
    return out


def mlmc_variance_reduce(src, sigma_hat, backend, ledger=None, rng=None, return_level=False):
    """Unbiased estimate of the mean with variance at most ``sigma_hat^2``.

    ``mu0 + 2^J (mu_J - mu_{J-1})`` with ``Pr[J = j] = 2^-j`` on ``j >= 1``
    and ``mu_j`` the wrapped estimate at accuracy ``2^(-3j/4) sigma_hat/10``.
    The level is drawn first so that runs sharing a stream share levels.
    """
    out, J = mlmc_batch(src, sigma_hat, 1, backend, ledger, rng, return_levels=True)
    if return_level:
        return out[0], int(J[0])
    return out[0]


def approx_gradient(src, delta_err, xi, backend, ledger=None, rng=None):
    """Estimate within ``delta_err`` of the mean with probability at least ``1 - xi``.

    Takes ``k = ceil(log2(1/xi)) + 10`` MLMC estimates at variance
    ``delta_err^2/16`` and returns the first one within ``delta_err/2`` of at
    least ``ceil(2k/3)`` others.  If none qualifies the medoid is returned
    and the ledger is marked degraded.
    """
    if not delta_err > 0:
        raise ValueError("delta_err must be positive")
    if not 0 < xi < 1:
        raise ValueError("xi must lie in (0, 1)")
    k = group_count(xi)
    ests = mlmc_batch(src, delta_err / 4.0, k, backend, ledger, rng)
    idx = kernels.consensus_index(ests, 0.5 * delta_err, math.ceil(2 * k / 3))
    if idx < 0:
        if ledger is not None:
            ledger.mark_degraded()
        idx = kernels.medoid_index(ests)
    return ests[idx].copy()


__all__ = [
    "RandomVariableSource",
    "ConstantSource",
    "GradientSource",
    "ProjectedSource",
    "DifferenceSource",
    "finite_source",
    "ContractBackend",
    "SampleBackend",
    "make_backend",
    "group_count",
    "estimate_mean",
    "estimate_mean_batch",
    "qme_wrapper",
    "qme_plus_parameters",
    "qme_plus",
    "qme_plus_batch",
    "mlmc_variance_reduce",
    "mlmc_batch",
    "approx_gradient",
]
