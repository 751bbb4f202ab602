"""Numpy implementations of the hot kernels.

Used whenever the compiled ``_kernels`` extension is unavailable.  Both
implementations follow the same arithmetic so they agree to the last few
ulps (transcendental functions may differ in the final bit).
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_PI = 6.283185307179586
_INV_2_53 = 1.0 / 9007199254740992.0


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _salt_key(salt):
    mask = (1 << 64) - 1
    z = (int(salt) + 0x9E3779B97F4A7C15) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return np.uint64(z ^ (z >> 31))


def _keys(omegas, salt):
    omegas = np.ascontiguousarray(omegas, dtype=np.uint64)
    return _mix((omegas ^ _salt_key(salt)) + GOLDEN)


def _uniform_block(keys, count):
    # u_k = ((z_k >> 11) + 0.5) * 2^-53 with z_k the k-th SplitMix64 output from key
    steps = (np.arange(1, count + 1, dtype=np.uint64) * GOLDEN)[None, :]
    z = _mix(keys[:, None] + steps)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53


def seeded_uniforms(omegas, dim, salt=0):
    """Deterministic U(0, 1) block of shape ``(len(omegas), dim)``."""
    keys = _keys(omegas, salt)
    return _uniform_block(keys, int(dim))


def seeded_normals(omegas, dim, salt=0):
    """Deterministic standard normal block of shape ``(len(omegas), dim)`` via Box-Muller."""
    dim = int(dim)
    pairs = (dim + 1) // 2
    keys = _keys(omegas, salt)
    u = _uniform_block(keys, 2 * pairs)
    r = np.sqrt(-2.0 * np.log(u[:, 0::2]))
    theta = _TWO_PI * u[:, 1::2]
    out = np.empty((keys.shape[0], 2 * pairs))
    out[:, 0::2] = r * np.cos(theta)
    out[:, 1::2] = r * np.sin(theta)
    return out[:, :dim]


def _sq_dists(points):
    diff = points[:, None, :] - points[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def consensus_index(points, radius, need):
    """First row within ``radius`` of at least ``need`` other rows, or -1."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    close = _sq_dists(points) <= radius * radius
    counts = close.sum(axis=1) - 1
    hits = np.flatnonzero(counts >= need)
    return int(hits[0]) if hits.size else -1


def medoid_index(points):
    """Row minimising the summed Euclidean distance to all rows."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    totals = np.sqrt(_sq_dists(points)).sum(axis=1)
    return int(np.argmin(totals))
