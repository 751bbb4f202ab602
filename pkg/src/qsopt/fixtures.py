"""Test problems with analytic truth channels.

``make_fixture`` builds a :class:`ProblemInstance` of one of these kinds:

linear
    ``f(x) = <c, x>`` on the ball ``B_R``.
ball-distance
    ``f(x) = slope * ||x - center||``.
quadratic
    ``f(x) = (a/2) ||x - center||^2``.
quadratic-noisy
    the quadratic with additive Gaussian noise, used for the non-convex solvers.
seeded-smooth-nonconvex
    ``f(x) = h*phi(x_1 + s0) + (h/2)||x_{2:}||^2`` with
    ``phi(s) = -log((1 + s^2)/(1 + s^2/S^2))/2``; the gradient along the first
    axis decays like ``h/s`` over a long plateau, so normalised descent needs
    ``~eps^-2`` steps to reach a ``2*eps``-critical point.
hard-instance
    the averaged piecewise-linear lower-bound construction ``f_bar^A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln, hyp1f1

from .errors import DimensionError
from .oracles import ConvolvedOracle, FiniteSupportOracle, NoisyGradientOracle, as_point

FIXTURE_KINDS = (
    "linear",
    "ball-distance",
    "quadratic",
    "quadratic-noisy",
    "seeded-smooth-nonconvex",
    "hard-instance",
)


def _rows(X):
    X = np.asarray(X, dtype=np.float64)
    return X[None, :] if X.ndim == 1 else X


@dataclass
class ProblemInstance:
    kind: str
    dim: int
    oracle: object
    value: Callable
    grad: Callable
    R: float = 1.0
    L: float = 1.0
    x_star: Optional[np.ndarray] = None
    f_star: Optional[float] = None
    ell: Optional[float] = None
    sigma: Optional[float] = None
    Delta: Optional[float] = None
    convolved_value: Optional[Callable] = None
    convolved_grad: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def f(self, x) -> float:
        return float(np.asarray(self.value(_rows(x))).reshape(-1)[0])

    def gradient(self, x) -> np.ndarray:
        return np.asarray(self.grad(_rows(x)), dtype=np.float64).reshape(self.dim)

    def gap(self, x) -> float:
        if self.f_star is None:
            raise ValueError(f"{self.kind} fixture has no known optimum")
        return self.f(x) - self.f_star

    def grad_norm(self, x) -> float:
        return float(np.linalg.norm(self.gradient(x)))

    def convolved_oracle(self, r: float) -> ConvolvedOracle:
        exact = None
        if self.convolved_grad is not None:
            exact = lambda x, rr: self.convolved_grad(x, rr)  # noqa: E731
        return ConvolvedOracle(self.oracle, r, exact_grad=exact)


# ---------------------------------------------------------------------------
# ball-distance smoothing in closed form


def _chi_const(d):
    # sqrt(2) * Gamma((d+1)/2) / Gamma(d/2), the mean of a chi variable
    return math.sqrt(2.0) * math.exp(gammaln((d + 1) / 2.0) - gammaln(d / 2.0))


def ball_distance_smoothed_value(x, center, r, slope=1.0):
    """``E ||x - y - center||`` for ``y ~ N(0, r^2 I)``, times ``slope``."""
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    s = np.linalg.norm(x - center, axis=-1) / r
    return slope * r * _chi_const(d) * hyp1f1(-0.5, d / 2.0, -0.5 * s * s)


def ball_distance_smoothed_grad(x, center, r, slope=1.0):
    """Gradient of :func:`ball_distance_smoothed_value` at a single point."""
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    diff = x - center
    dist = float(np.linalg.norm(diff))
    if dist == 0.0:
        return np.zeros(d)
    s = dist / r
    mag = _chi_const(d) * (s / d) * hyp1f1(0.5, d / 2.0 + 1.0, -0.5 * s * s)
    return slope * mag * diff / dist


# ---------------------------------------------------------------------------
# hard instance


@dataclass
class HardInstance:
    """Vectors ``g[i, j]`` built from a 0/1 matrix ``A`` with a fixed weight profile."""

    A: np.ndarray
    g: np.ndarray  # shape (N, M, d)
    L: float
    R: float
    regime: str

    @property
    def N(self):
        return self.A.shape[0]

    @property
    def M(self):
        return self.A.shape[1]

    @property
    def dim(self):
        return self.g.shape[2]

    @property
    def g_bar(self) -> np.ndarray:
        return self.g.mean(axis=(0, 1))

    @property
    def b(self) -> np.ndarray:
        """1 for rows of the heavier weight, 0 otherwise."""
        return (self.A.sum(axis=1) > self.M // 2).astype(np.int64)

    @property
    def x_star(self) -> np.ndarray:
        gb = self.g_bar
        return 0.5 * self.R * gb / np.linalg.norm(gb)

    @property
    def f_star(self) -> float:
        return -self.R * float(np.linalg.norm(self.g_bar)) / 6.0

    def penalty_grad(self, X):
        # gradient of (2L/3) max(0, ||x|| - R/2): a unit radial vector outside R/2
        X = _rows(X)
        norms = np.linalg.norm(X, axis=1)
        coef = np.where(norms > 0.5 * self.R, 2.0 * self.L / 3.0, 0.0)
        safe = np.where(norms > 0, norms, 1.0)
        return (coef / safe)[:, None] * X

    def value(self, X):
        X = _rows(X)
        norms = np.linalg.norm(X, axis=1)
        return -(X @ self.g_bar) / 3.0 + (2.0 * self.L / 3.0) * np.maximum(0.0, norms - 0.5 * self.R)

    def subgradient(self, X):
        return -self.g_bar / 3.0 + self.penalty_grad(X)

    def alignment_bound(self, epsilon) -> float:
        """Lower bound on ``<(R/2) x/||x||, x*>`` over epsilon-optimal ``x``.

        Moving an epsilon-optimal point radially onto the sphere of radius
        ``R/2`` never increases ``f_bar``, and on that sphere
        ``f_bar = -<x, g_bar>/3``; hence the bound
        ``R^2/4 - 3 eps R / (2 ||g_bar||)``.
        """
        return self.R**2 / 4.0 - 3.0 * epsilon * self.R / (2.0 * float(np.linalg.norm(self.g_bar)))


def weight_template(N, M):
    """Row weights: ``N // 2`` rows of weight ``M // 2``, the rest ``M // 2 + 1``."""
    if M < 1 or N < 1:
        raise ValueError("N and M must be positive")
    light = N // 2
    return np.array([M // 2] * light + [M // 2 + 1] * (N - light), dtype=np.int64)


def random_weight_matrix(N, M, rng) -> np.ndarray:
    weights = weight_template(N, M)[rng.permutation(N)]
    A = np.zeros((N, M), dtype=np.int64)
    for i, w in enumerate(weights):
        A[i, rng.permutation(M)[:w]] = 1
    return A


def make_hard_instance(N, M, L=1.0, R=2.0, regime="low", rng=None, A=None) -> HardInstance:
    """Low regime: ``d = N`` and ``g[i, j] = c (-1)^(1 + A_ij) e_i``.

    High regime: ``M = 1`` and ``g[i, 1] = L sqrt(N / (2(N - 1))) A_i1 e_i``.
    """
    if A is None:
        if rng is None:
            raise ValueError("either A or rng is required")
        A = random_weight_matrix(N, M, rng)
    A = np.asarray(A, dtype=np.int64)
    if A.shape != (N, M):
        raise DimensionError(f"A must have shape ({N}, {M})")
    eye = np.eye(N)
    if regime == "low":
        scale = L * N * M / math.sqrt((2.0 * N * M) ** 2 - N**2)
        signs = np.where(A == 1, 1.0, -1.0)  # (-1)^(1 + A_ij)
        g = scale * signs[:, :, None] * eye[:, None, :]
    elif regime == "high":
        if M != 1:
            raise ValueError("the high-dimensional regime uses a single column")
        if N < 2:
            raise ValueError("the high-dimensional regime needs N >= 2")
        scale = L * math.sqrt(N / (2.0 * (N - 1)))
        g = scale * A[:, :, None].astype(np.float64) * eye[:, None, :]
    else:
        raise ValueError(f"unknown regime {regime!r}")
    return HardInstance(A=A, g=g, L=float(L), R=float(R), regime=regime)


def hard_instance_subgradient(inst: HardInstance, i, j, x) -> np.ndarray:
    """``-g[i, j]/3 + (2L/3) 1[||x|| > R/2] x/||x||``, a subgradient of ``f_ij``."""
    x = as_point(x, inst.dim)
    return -inst.g[i, j] / 3.0 + inst.penalty_grad(x)[0]


# ---------------------------------------------------------------------------
# fixture factory


def _vec(params, key, default):
    v = params.get(key)
    if v is None:
        return default
    return np.asarray(v, dtype=np.float64)


def make_fixture(kind, d, params=None, rng=None) -> ProblemInstance:
    params = dict(params or {})
    d = int(d)
    if d < 1:
        raise DimensionError("dimension must be positive")
    R = float(params.get("R", 1.0))
    noise = float(params.get("noise", 0.0))
    if R <= 0 or noise < 0:
        raise ValueError("R must be positive and noise non-negative")

    if kind == "linear":
        e1 = np.zeros(d)
        e1[0] = 1.0
        c = _vec(params, "c", e1)
        if c.shape != (d,):
            raise DimensionError("c must have length d")
        cn = float(np.linalg.norm(c))
        if cn == 0:
            raise ValueError("c must be non-zero")
        grad = lambda X: np.broadcast_to(c, _rows(X).shape)  # noqa: E731
        L = math.hypot(cn, noise)
        oracle = NoisyGradientOracle(d, grad, L, gauss_scale=noise, smoothness=0.0)
        return ProblemInstance(
            kind, d, oracle,
            value=lambda X: _rows(X) @ c,
            grad=grad, R=R, L=L,
            x_star=-R * c / cn, f_star=-R * cn,
            convolved_value=lambda X, r: _rows(X) @ c,
            convolved_grad=lambda x, r: c.copy(),
            params={"c": c.tolist(), "R": R, "noise": noise},
        )

    if kind == "ball-distance":
        center = _vec(params, "center", np.full(d, 0.3 / math.sqrt(d)))
        slope = float(params.get("slope", 1.0))
        if center.shape != (d,) or np.linalg.norm(center) > R:
            raise ValueError("center must be a point of the ball B_R")

        def grad(X):
            diff = _rows(X) - center
            n = np.linalg.norm(diff, axis=1, keepdims=True)
            return slope * np.divide(diff, n, out=np.zeros_like(diff), where=n > 0)

        L = math.hypot(slope, noise)
        oracle = NoisyGradientOracle(d, grad, L, gauss_scale=noise)
        return ProblemInstance(
            kind, d, oracle,
            value=lambda X: slope * np.linalg.norm(_rows(X) - center, axis=1),
            grad=grad, R=R, L=L, x_star=center.copy(), f_star=0.0,
            convolved_value=lambda X, r: ball_distance_smoothed_value(_rows(X), center, r, slope),
            convolved_grad=lambda x, r: ball_distance_smoothed_grad(x, center, r, slope),
            params={"center": center.tolist(), "slope": slope, "R": R, "noise": noise},
        )

    if kind in ("quadratic", "quadratic-noisy"):
        a = float(params.get("a", params.get("ell", 1.0)))
        default_center = np.full(d, 0.25 / math.sqrt(d)) if kind == "quadratic" else np.full(d, 1.0 / math.sqrt(d))
        center = _vec(params, "center", default_center)
        if center.shape != (d,):
            raise DimensionError("center must have length d")
        if kind == "quadratic-noisy" and "noise" not in params:
            noise = 1.0
        grad = lambda X: a * (_rows(X) - center)  # noqa: E731
        # second moment on B_R, including Gaussian smoothing of width up to R/(4 sqrt(d))
        L = math.sqrt((a * (R + float(np.linalg.norm(center)))) ** 2 + (a * R) ** 2 / 16.0 + noise**2)
        oracle = NoisyGradientOracle(d, grad, L, gauss_scale=noise, smoothness=a)
        value = lambda X: 0.5 * a * np.sum((_rows(X) - center) ** 2, axis=1)  # noqa: E731
        return ProblemInstance(
            kind, d, oracle, value=value, grad=grad, R=R, L=L,
            x_star=center.copy(), f_star=0.0,
            ell=a, sigma=noise, Delta=float(value(np.zeros(d))[0]),
            convolved_value=lambda X, r: value(X) + 0.5 * a * d * r * r,
            convolved_grad=lambda x, r: a * (np.asarray(x) - center),
            params={"a": a, "center": center.tolist(), "R": R, "noise": noise},
        )

    if kind == "seeded-smooth-nonconvex":
        h = float(params.get("h", 2.0))
        s0 = float(params.get("s0", 0.3))
        S = float(params.get("S", 1000.0))
        a_n = float(params.get("gauss_scale", 0.8))
        b_n = float(params.get("wave_scale", 0.6))
        if h <= 0 or S <= 1 or s0 <= 0:
            raise ValueError("need h > 0, S > 1 and s0 > 0")

        def phi(s):
            return -0.5 * np.log((1.0 + s * s) / (1.0 + s * s / (S * S)))

        def dphi(s):
            return -s / (1.0 + s * s) + s / (S * S + s * s)

        def value(X):
            X = _rows(X)
            return h * phi(X[:, 0] + s0) + 0.5 * h * np.sum(X[:, 1:] ** 2, axis=1)

        def grad(X):
            X = _rows(X)
            G = h * X.copy()
            G[:, 0] = h * dphi(X[:, 0] + s0)
            return G

        ell_f = h * (1.0 + 1.0 / (S * S))
        sigma = math.hypot(a_n, b_n)
        # |phi'| <= 1/2; the bound holds along the first axis
        L = math.hypot(0.5 * h, sigma)
        oracle = NoisyGradientOracle(d, grad, L, gauss_scale=a_n, wave_scale=b_n, smoothness=ell_f)
        Delta = h * (float(phi(np.array(s0))) + math.log(S))
        return ProblemInstance(
            kind, d, oracle, value=value, grad=grad, R=R, L=L,
            f_star=-h * math.log(S),
            ell=oracle.mean_square_smoothness, sigma=sigma, Delta=Delta,
            params={"h": h, "s0": s0, "S": S, "gauss_scale": a_n, "wave_scale": b_n},
        )

    if kind == "hard-instance":
        N = int(params.get("N", d))
        M = int(params.get("M", 4))
        L = float(params.get("L", 1.0))
        regime = params.get("regime", "low")
        if regime == "high":
            M = 1
        if N != d:
            raise DimensionError("hard instances use d = N")
        A = params.get("A")
        if A is None and rng is None:
            raise ValueError("hard-instance fixture needs an rng or an explicit matrix A")
        inst = make_hard_instance(N, M, L=L, R=R, regime=regime, rng=rng, A=A)
        oracle = FiniteSupportOracle(
            -inst.g.reshape(-1, d) / 3.0, shift=inst.penalty_grad, lipschitz_bound=L
        )
        return ProblemInstance(
            kind, d, oracle, value=inst.value, grad=inst.subgradient, R=R, L=L,
            x_star=inst.x_star, f_star=inst.f_star,
            params={"N": N, "M": M, "L": L, "R": R, "regime": regime, "A": inst.A.tolist(), "instance": inst},
        )

    raise ValueError(f"unknown fixture kind {kind!r}; expected one of {FIXTURE_KINDS}")


# ---------------------------------------------------------------------------
# brute-force truth


@dataclass(frozen=True)
class TruthEstimate:
    value: np.ndarray
    stderr: np.ndarray
    n: int


def _mc(samples) -> TruthEstimate:
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return TruthEstimate(mean, se, n)


def offline_truth(target, n_samples, rng, *, source=None, problem=None, x=None, r=None, chunk=1 << 16):
    """Plain Monte-Carlo reference values; never touches a ledger.

    ``target`` is one of ``mean`` (needs ``source``), ``function_value``,
    ``convolved_value`` and ``convolved_gradient`` (need ``problem``, ``x``
    and, for the convolved targets, ``r``).
    """
    n_samples = int(n_samples)
    if n_samples < 1000:
        raise ValueError("offline truth needs at least 10^3 samples")

    if target == "mean":
        if source is None:
            raise ValueError("target 'mean' needs a source")
        if source.degenerate:
            v = source.exact_mean()
            return TruthEstimate(v, np.zeros_like(v), n_samples)
        parts = []
        done = 0
        while done < n_samples:
            m = min(chunk, n_samples - done)
            parts.append(source.draw(rng, m))
            done += m
        return _mc(np.concatenate(parts))

    if problem is None or x is None:
        raise ValueError(f"target {target!r} needs a problem and a point")
    x = as_point(x, problem.dim)

    if target == "function_value":
        v = np.array(problem.f(x))
        return TruthEstimate(v, np.zeros_like(v), n_samples)

    if r is None or not r > 0:
        raise ValueError("convolved targets need a positive radius r")

    values, grads = [], []
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        pts = x - r * rng.standard_normal((m, problem.dim))
        if target == "convolved_value":
            values.append(problem.value(pts))
        elif target == "convolved_gradient":
            grads.append(problem.oracle._draw_at(pts, rng))
        else:
            raise ValueError(f"unknown truth target {target!r}")
        done += m
    if target == "convolved_value":
        return _mc(np.concatenate(values))
    return _mc(np.concatenate(grads))
