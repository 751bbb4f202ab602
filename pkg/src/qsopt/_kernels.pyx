# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: seeded noise generation and consensus selection.

Mirrors ``_kernels_py`` operation for operation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, sin
from libc.stdint cimport uint64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t key, uint64_t k) nogil:
    cdef uint64_t z = _mix(key + (k + 1) * GOLDEN)
    return (<double>(z >> 11) + 0.5) * INV_2_53


cdef uint64_t _salt_key(object salt):
    cdef uint64_t s = <uint64_t>(int(salt) & 0xFFFFFFFFFFFFFFFF)
    return _mix(s + GOLDEN)


def seeded_uniforms(omegas, Py_ssize_t dim, salt=0):
    cdef cnp.uint64_t[::1] om = np.ascontiguousarray(omegas, dtype=np.uint64)
    cdef Py_ssize_t n = om.shape[0]
    out = np.empty((n, dim), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef uint64_t sk = _salt_key(salt)
    cdef uint64_t key
    cdef Py_ssize_t i, k
    with nogil:
        for i in range(n):
            key = _mix((om[i] ^ sk) + GOLDEN)
            for k in range(dim):
                o[i, k] = _uniform(key, <uint64_t>k)
    return out


def seeded_normals(omegas, Py_ssize_t dim, salt=0):
    cdef cnp.uint64_t[::1] om = np.ascontiguousarray(omegas, dtype=np.uint64)
    cdef Py_ssize_t n = om.shape[0]
    out = np.empty((n, dim), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef uint64_t sk = _salt_key(salt)
    cdef uint64_t key
    cdef Py_ssize_t i, p, pairs = (dim + 1) // 2
    cdef double r, theta
    with nogil:
        for i in range(n):
            key = _mix((om[i] ^ sk) + GOLDEN)
            for p in range(pairs):
                r = sqrt(-2.0 * log(_uniform(key, <uint64_t>(2 * p))))
                theta = TWO_PI * _uniform(key, <uint64_t>(2 * p + 1))
                o[i, 2 * p] = r * cos(theta)
                if 2 * p + 1 < dim:
                    o[i, 2 * p + 1] = r * sin(theta)
    return out


def consensus_index(points, double radius, Py_ssize_t need):
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t k = p.shape[0], d = p.shape[1]
    cdef Py_ssize_t i, j, c, count
    cdef double r2 = radius * radius, acc, diff
    cdef Py_ssize_t found = -1
    with nogil:
        for i in range(k):
            count = 0
            for j in range(k):
                if j == i:
                    continue
                acc = 0.0
                for c in range(d):
                    diff = p[i, c] - p[j, c]
                    acc = acc + diff * diff
                if acc <= r2:
                    count = count + 1
            if count >= need:
                found = i
                break
    return found


def medoid_index(points):
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t k = p.shape[0], d = p.shape[1]
    cdef Py_ssize_t i, j, c, best = 0
    cdef double acc, diff, total, best_total = 0.0
    with nogil:
        for i in range(k):
            total = 0.0
            for j in range(k):
                acc = 0.0
                for c in range(d):
                    diff = p[i, c] - p[j, c]
                    acc = acc + diff * diff
                total = total + sqrt(acc)
            if i == 0 or total < best_total:
                best_total = total
                best = i
    return best
