# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: the best-response stepping loop and the table-driven chain walk.

Semantics mirror ``_kernels_py`` exactly; see the docstrings there.
"""
import numpy as np
cimport cython
from libc.math cimport fabs


def run_steps(double[::1] x, double[::1] y, const double[:, ::1] A, const double[:, ::1] W,
              const double[::1] cw, const double[::1] ca, const double[::1] lam,
              const unsigned char[::1] cx, const unsigned char[::1] cy,
              const long long[::1] indptr, const long long[::1] indices,
              long long T, double[::1] win, double tol, double band, long long stride,
              long long t0, long long[::1] snap_t, double[:, ::1] snap_x, double[:, ::1] snap_y,
              long long nsnap, double[::1] stats):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nsteps = indptr.shape[0] - 1
    cdef Py_ssize_t s, k, kk, i, j, lo, hi, na
    cdef double m, a, d, xo, xn, yn, dy
    cdef long long t, down, up
    cdef double[::1] xbuf = np.empty(n)
    cdef double[::1] ybuf = np.empty(n)

    for s in range(nsteps):
        lo = indptr[s]
        hi = indptr[s + 1]
        na = hi - lo
        for k in range(na):
            i = indices[lo + k]
            m = 0.0
            a = 0.0
            for j in range(n):
                m += W[i, j] * y[j]
                a += A[i, j] * x[j]
            xo = x[i]
            if cx[i]:
                xn = 1.0
            else:
                d = cw[i] * m + ca[i] * a
                if d > band:
                    xn = 1.0
                elif d < -band:
                    xn = -1.0
                else:
                    xn = xo
            if cy[i]:
                yn = 1.0
            else:
                yn = (1.0 - lam[i]) * m + lam[i] * xn
            xbuf[k] = xn
            ybuf[k] = yn
        down = 0
        up = 0
        for k in range(na):
            i = indices[lo + k]
            dy = ybuf[k] - y[i]
            if dy < stats[0]:
                stats[0] = dy
            if fabs(dy) > win[2]:
                win[2] = fabs(dy)
            if xbuf[k] < x[i]:
                down += 1
            elif xbuf[k] > x[i]:
                up += 1
            x[i] = xbuf[k]
            y[i] = ybuf[k]
        stats[1] += down
        stats[2] += up
        win[1] += down + up
        win[0] += 1
        t = t0 + s + 1
        if stride > 0 and t % stride == 0:
            snap_t[nsnap] = t
            for kk in range(n):
                snap_x[nsnap, kk] = x[kk]
                snap_y[nsnap, kk] = y[kk]
            nsnap += 1
        if win[0] >= T:
            if win[1] == 0 and win[2] < tol:
                return s + 1, 1, nsnap
            win[0] = 0
            win[1] = 0
            win[2] = 0.0
    return nsteps, 0, nsnap


def walk_table(const unsigned char[::1] table, long long start, const long long[::1] r_draws,
               const double[::1] u_draws, double eps, long long[::1] visits):
    cdef long long c = start
    cdef long long bit
    cdef Py_ssize_t k
    for k in range(r_draws.shape[0]):
        bit = (<long long>1) << r_draws[k]
        if c & bit:
            if table[c ^ bit]:
                c ^= bit
        elif u_draws[k] < eps:
            c |= bit
        visits[c] += 1
    return c
