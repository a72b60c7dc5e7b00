# cython: language_level=3
"""Compiled hot loops.

Mirrors ``misscov._kernels_py`` function for function. Results agree with the
numpy versions to rounding; summation order differs, so they are not bitwise
identical across backends (each backend is deterministic on its own).
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

NAME = "cython"


def psi_colsum(const double[:, ::1] q, double scale):
    """Column sums of ``psi(scale * q)`` for a C-contiguous ``(N, M)`` array."""
    cdef Py_ssize_t n = q.shape[0], m = q.shape[1], i, j
    out_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double x
    for i in range(n):
        for j in range(m):
            x = scale * q[i, j]
            if x > 1.0:
                x = 1.0
            elif x < -1.0:
                x = -1.0
            out[j] += x
    return out_arr


def jacobi_eigh(a_in, double rel_tol=1e-12, max_rotations=None):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors, rotations, converged)`` with
    eigenvalues in descending order.
    """
    a_arr = np.array(a_in, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t d = a_arr.shape[0]
    v_arr = np.eye(d, dtype=np.float64)
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] v = v_arr
    cdef long cap = 100 * d * d if max_rotations is None else max_rotations
    cdef long rotations = 0
    cdef Py_ssize_t p, q, k
    cdef double fro = 0.0, off, apq, tau, t, c, s, akp, akq
    cdef bint converged = False

    for p in range(d):
        for q in range(d):
            fro += a[p, q] * a[p, q]
    fro = sqrt(fro)

    while True:
        off = 0.0
        for p in range(d):
            for q in range(d):
                if p != q:
                    off += a[p, q] * a[p, q]
        off = sqrt(off)
        if off <= rel_tol * fro:
            converged = True
            break
        if rotations >= cap:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for k in range(d):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(d):
                    akp = a[p, k]
                    akq = a[q, k]
                    a[p, k] = c * akp - s * akq
                    a[q, k] = s * akp + c * akq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(d):
                    akp = v[k, p]
                    akq = v[k, q]
                    v[k, p] = c * akp - s * akq
                    v[k, q] = s * akp + c * akq
                rotations += 1

    w = np.diagonal(a_arr).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v_arr[:, order], int(rotations), bool(converged)


def subgradient_minimax(const double[:, ::1] a, const double[::1] b, bint nonneg,
                        long iters, double radius):
    """Projected subgradient descent on ``max_v |a_v . theta - b_v|``.

    Step ``radius / sqrt(t)`` along the normalized subgradient; projection
    clips at zero when ``nonneg``. Returns the best iterate and its objective.
    """
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], i, j, jmax
    theta_arr = np.zeros(k, dtype=np.float64)
    best_arr = np.zeros(k, dtype=np.float64)
    cdef double[::1] theta = theta_arr
    cdef double[::1] best = best_arr
    cdef double r, rmax, sgn, gn, step, best_obj = -1.0
    cdef long t
    for t in range(1, iters + 2):
        rmax = -1.0
        jmax = 0
        sgn = 1.0
        for i in range(m):
            r = -b[i]
            for j in range(k):
                r += a[i, j] * theta[j]
            if fabs(r) > rmax:
                rmax = fabs(r)
                jmax = i
                sgn = 1.0 if r >= 0.0 else -1.0
        if best_obj < 0.0 or rmax < best_obj:
            best_obj = rmax
            for j in range(k):
                best[j] = theta[j]
        if t > iters:
            break
        gn = 0.0
        for j in range(k):
            gn += a[jmax, j] * a[jmax, j]
        gn = sqrt(gn)
        if gn == 0.0 or rmax == 0.0:
            break
        step = radius / sqrt(<double>t) / gn
        for j in range(k):
            theta[j] -= step * sgn * a[jmax, j]
            if nonneg and theta[j] < 0.0:
                theta[j] = 0.0
    return best_arr, float(best_obj)
