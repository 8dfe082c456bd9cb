# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-hop kernels.  Must stay bit-compatible with _kernels_py."""
from libc.math cimport sqrt, fmod, INFINITY

BACKEND = "cython"


cdef inline double _fold(double u, double length) nogil:
    cdef double period, m
    if length <= 0:
        return 0.0
    period = 2.0 * length
    m = fmod(u, period)
    if m != 0.0 and m < 0:
        m += period
    if m <= length:
        return m
    return period - m


def positions_at(double t, const long long[::1] offsets, const double[::1] start,
                 const double[::1] speed, const double[::1] cosd, const double[::1] sind,
                 const double[::1] x0, const double[::1] y0, double L, double W,
                 double[:, ::1] out):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t i, lo, hi, mid
    cdef double dist
    for i in range(n):
        lo = offsets[i]
        hi = offsets[i + 1] - 1
        # last segment whose start <= t
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if start[mid] <= t:
                lo = mid
            else:
                hi = mid - 1
        dist = speed[lo] * (t - start[lo])
        out[i, 0] = _fold(x0[lo] + dist * cosd[lo], L)
        out[i, 1] = _fold(y0[lo] + dist * sind[lo], W)


def contact(const double[:, ::1] pos, double R, double[:, ::1] dist, unsigned char[:, ::1] adj):
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t i, j
    cdef double dx, dy, d
    for i in range(n):
        dist[i, i] = 0.0
        adj[i, i] = 0
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            d = sqrt(dx * dx + dy * dy)
            dist[i, j] = d
            dist[j, i] = d
            adj[i, j] = adj[j, i] = 1 if d <= R else 0


def remaining_estimates(const double[:, :, ::1] Q, const unsigned char[:, ::1] adj,
                        Py_ssize_t d, const long long[::1] nbrs, double[::1] out):
    cdef Py_ssize_t n = adj.shape[0]
    cdef Py_ssize_t j, y, z
    cdef double best
    for j in range(nbrs.shape[0]):
        y = nbrs[j]
        if y == d:
            out[j] = 0.0
            continue
        best = INFINITY
        for z in range(n):
            if adj[y, z] and Q[y, d, z] < best:
                best = Q[y, d, z]
        out[j] = best if best != INFINITY else 0.0


def echo_update(double[::1] row, const long long[::1] nbrs, const double[::1] targets,
                Py_ssize_t selected, double eta, double eta2):
    cdef Py_ssize_t j, y
    cdef double rate
    for j in range(nbrs.shape[0]):
        y = nbrs[j]
        rate = eta if y == selected else eta2
        row[y] = row[y] + rate * (targets[j] - row[y])
