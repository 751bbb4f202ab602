"""Stochastic gradient oracles.

Every oracle is immutable after construction.  Randomness comes either from
an :class:`~qsopt.rng.Rng` passed per call or, for shared-seed oracles, from
an explicit 64-bit seed ``omega`` so that ``g(x, omega)`` and ``g(y, omega)``
are correlated.

Subclasses implement ``_draw_at(X, rng)`` (one draw per row of ``X``) and,
when they support shared seeds, ``_seeded_at(X, omegas)``.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from ._kernels_py import _keys as derive_seeds
from .errors import CapabilityError, DimensionError, NonFiniteInputError

# above this many draws per group, finite-support group means use the normal limit
CLT_THRESHOLD = 1 << 40


def as_point(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != dim:
        raise DimensionError(f"expected a point of shape ({dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInputError("point has non-finite coordinates")
    return x


def _as_points(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dim:
        raise DimensionError(f"expected points of shape (n, {dim}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInputError("points have non-finite coordinates")
    return X


class StochasticGradientOracle:
    """Base class.  ``lipschitz_bound`` is the second-moment bound L."""

    supports_exact_mean = False
    supports_shared_seed = False

    def __init__(self, dim, lipschitz_bound, variance_bound=None, mean_square_smoothness=None):
        dim = int(dim)
        if dim < 1:
            raise DimensionError("dimension must be positive")
        if lipschitz_bound < 0:
            raise ValueError("lipschitz_bound must be non-negative")
        self.dim = dim
        self.lipschitz_bound = float(lipschitz_bound)
        self.variance_bound = None if variance_bound is None else float(variance_bound)
        self.mean_square_smoothness = (
            None if mean_square_smoothness is None else float(mean_square_smoothness)
        )

    @property
    def deterministic(self) -> bool:
        """True when every draw equals the mean (zero-variance oracle)."""
        return self.variance_bound == 0.0

    # public sampling API

    def sample(self, x, rng, ledger=None) -> np.ndarray:
        x = as_point(x, self.dim)
        out = self._draw_at(x[None, :], rng)[0]
        if ledger is not None:
            ledger.draw(1)
        return out

    def sample_many(self, x, n, rng, ledger=None) -> np.ndarray:
        x = as_point(x, self.dim)
        out = self._draw_at(np.broadcast_to(x, (int(n), self.dim)), rng)
        if ledger is not None:
            ledger.draw(int(n))
        return out

    def sample_with_seed(self, x, omega) -> np.ndarray:
        x = as_point(x, self.dim)
        return self.sample_with_seeds(x, np.array([omega], dtype=np.uint64))[0]

    def sample_with_seeds(self, x, omegas) -> np.ndarray:
        """One draw per seed; ``x`` is a single point or one row per seed."""
        if not self.supports_shared_seed:
            raise CapabilityError(f"{type(self).__name__} has no shared-seed mode")
        omegas = np.atleast_1d(np.asarray(omegas, dtype=np.uint64))
        X = _as_points(x, self.dim)
        X = np.broadcast_to(X, (omegas.shape[0], self.dim))
        return self._seeded_at(X, omegas)

    def exact_mean(self, x) -> np.ndarray:
        if not self.supports_exact_mean:
            raise CapabilityError(f"{type(self).__name__} does not expose its mean")
        return self._mean_at(as_point(x, self.dim))

    def group_means(self, x, n, k, rng, max_group_draws=None):
        """Means of ``k`` independent groups of ``n`` draws each.

        Returns ``(means, draws_per_group)``.  The generic path draws samples
        in chunks and stops at ``max_group_draws`` per group, in which case
        ``draws_per_group < n``.  Subclasses with a closed-form law for the
        group mean override this and always use the full ``n``.
        """
        x = as_point(x, self.dim)
        n = int(n)
        if max_group_draws is not None:
            n = min(n, int(max_group_draws))
        chunk = max(1, min(n, (1 << 18) // max(k, 1)))
        sums = np.zeros((k, self.dim))
        done = 0
        while done < n:
            m = min(chunk, n - done)
            pts = np.broadcast_to(x, (k * m, self.dim))
            sums += self._draw_at(pts, rng).reshape(k, m, self.dim).sum(axis=1)
            done += m
        return sums / n, n

    # hooks

    def _draw_at(self, X, rng) -> np.ndarray:
        if self.supports_shared_seed:
            return self._seeded_at(X, rng.seeds(X.shape[0]))
        raise NotImplementedError

    def _seeded_at(self, X, omegas) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} has no shared-seed mode")

    def _mean_at(self, x) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} does not expose its mean")


class NoisyGradientOracle(StochasticGradientOracle):
    """Exact gradient plus seeded noise.

    ``g(x, w) = grad(x) + a*z(w)/sqrt(d) + b*sqrt(2/d)*sin(x + 2*pi*u(w))``

    with ``z`` standard normal and ``u`` uniform on the cube.  The noise has
    mean zero and ``E||noise||^2 = a^2 + b^2``.  The wave term depends on
    ``x``, which makes the mean-squared smoothness exceed the smoothness of
    the objective by ``b^2/d`` (in squared terms).  ``grad`` must accept a
    ``(n, d)`` array and return one gradient per row.
    """

    supports_shared_seed = True

    def __init__(
        self,
        dim,
        grad,
        lipschitz_bound,
        gauss_scale=0.0,
        wave_scale=0.0,
        smoothness=None,
        expose_mean=True,
    ):
        a, b = float(gauss_scale), float(wave_scale)
        if a < 0 or b < 0:
            raise ValueError("noise scales must be non-negative")
        mss = None
        if smoothness is not None:
            mss = math.sqrt(float(smoothness) ** 2 + b * b / dim)
        super().__init__(dim, lipschitz_bound, math.hypot(a, b), mss)
        self.grad = grad
        self.gauss_scale = a
        self.wave_scale = b
        self.supports_exact_mean = bool(expose_mean)

    def _draw_at(self, X, rng):
        if self.deterministic:
            return np.array(self.grad(X), dtype=np.float64).reshape(X.shape)
        return self._seeded_at(X, rng.seeds(X.shape[0]))

    def _seeded_at(self, X, omegas):
        d = self.dim
        out = np.array(self.grad(X), dtype=np.float64).reshape(X.shape)
        if self.gauss_scale > 0:
            out += (self.gauss_scale / math.sqrt(d)) * kernels.seeded_normals(omegas, d, 1)
        if self.wave_scale > 0:
            u = kernels.seeded_uniforms(omegas, d, 2)
            out += self.wave_scale * math.sqrt(2.0 / d) * np.sin(X + 2.0 * np.pi * u)
        return out

    def _mean_at(self, x):
        return np.asarray(self.grad(x[None, :]), dtype=np.float64).reshape(self.dim)

    def group_means(self, x, n, k, rng, max_group_draws=None):
        if self.wave_scale > 0:
            return super().group_means(x, n, k, rng, max_group_draws)
        # Gaussian noise: the mean of n draws is exactly N(grad, a^2/(d n) I)
        x = as_point(x, self.dim)
        n = int(n)
        mu = self._mean_at(x)
        if self.gauss_scale == 0:
            return np.tile(mu, (k, 1)), n
        scale = self.gauss_scale / math.sqrt(self.dim * n)
        return mu + scale * rng.standard_normal((k, self.dim)), n


class FiniteSupportOracle(StochasticGradientOracle):
    """Draws ``vectors[i] + shift(x)`` with probability ``weights[i]``.

    ``shift`` (optional) is a deterministic, vectorised function of the
    query point; the hard-instance subgradients have exactly this form.
    """

    supports_shared_seed = True

    def __init__(self, vectors, weights=None, shift=None, lipschitz_bound=None, expose_mean=True):
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        m, dim = vectors.shape
        if weights is None:
            weights = np.full(m, 1.0 / m)
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (m,) or np.any(weights < 0) or not math.isclose(weights.sum(), 1.0):
            raise ValueError("weights must be a probability vector over the support")
        mean = weights @ vectors
        centred = vectors - mean
        cov = (centred * weights[:, None]).T @ centred
        var = float(np.trace(cov))
        if lipschitz_bound is None:
            if shift is not None:
                raise ValueError("lipschitz_bound is required when a shift is given")
            lipschitz_bound = math.sqrt(float(weights @ np.einsum("ij,ij->i", vectors, vectors)))
        super().__init__(dim, lipschitz_bound, math.sqrt(max(var, 0.0)))
        self.vectors = vectors
        self.weights = weights
        self.shift = shift
        self._mean = mean
        self._cov = cov
        self._cdf = np.cumsum(weights)
        self._cdf[-1] = 1.0
        self.supports_exact_mean = bool(expose_mean)

    def _shift(self, X):
        if self.shift is None:
            return 0.0
        return np.asarray(self.shift(X), dtype=np.float64).reshape(X.shape)

    def _pick(self, u):
        return np.searchsorted(self._cdf, u, side="right").clip(0, len(self.weights) - 1)

    def _draw_at(self, X, rng):
        idx = self._pick(rng.random(X.shape[0]))
        return self.vectors[idx] + self._shift(X)

    def _seeded_at(self, X, omegas):
        idx = self._pick(kernels.seeded_uniforms(omegas, 1, 3)[:, 0])
        return self.vectors[idx] + self._shift(X)

    def _mean_at(self, x):
        if self.shift is None:
            return self._mean.copy()
        return self._mean + self._shift(x[None, :]).reshape(self.dim)

    def group_means(self, x, n, k, rng, max_group_draws=None):
        x = as_point(x, self.dim)
        n = int(n)
        base = self._shift(x[None, :]).reshape(self.dim) if self.shift is not None else 0.0
        if n > CLT_THRESHOLD:
            chol = np.linalg.cholesky(self._cov + 1e-300 * np.eye(self.dim))
            z = rng.standard_normal((k, self.dim))
            return self._mean + base + (z @ chol.T) / math.sqrt(n), n
        counts = rng.multinomial(n, self.weights, size=k)
        return counts @ self.vectors / n + base, n


class ConvolvedOracle(StochasticGradientOracle):
    """Stochastic gradient of the Gaussian smoothing ``F_r(x) = E f(x - y)``, ``y ~ N(0, r^2 I)``.

    One draw costs one draw of the base oracle at a perturbed point.  The
    exact mean ``grad F_r`` is only available when the fixture supplies it.
    """

    def __init__(self, base: StochasticGradientOracle, radius: float, exact_grad=None):
        if not radius > 0:
            raise ValueError("convolution radius must be positive")
        super().__init__(base.dim, base.lipschitz_bound, base.lipschitz_bound)
        self.base = base
        self.radius = float(radius)
        self._exact_grad = exact_grad
        self.supports_exact_mean = exact_grad is not None
        self.supports_shared_seed = base.supports_shared_seed

    @property
    def deterministic(self) -> bool:
        return False

    def _draw_at(self, X, rng):
        Y = self.radius * rng.standard_normal(X.shape)
        return self.base._draw_at(X - Y, rng)

    def _seeded_at(self, X, omegas):
        Y = self.radius * kernels.seeded_normals(omegas, self.dim, 4)
        return self.base._seeded_at(X - Y, derive_seeds(omegas, 5))

    def _mean_at(self, x):
        return np.asarray(self._exact_grad(x, self.radius), dtype=np.float64)
