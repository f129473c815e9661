# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; signatures mirror chaoskit._purecore."""
import numpy as np
cimport numpy as cnp

from chaoskit._purecore import distinct_layout

cnp.import_array()


cdef void _hermite_row(double x, int kmax, double* h) noexcept nogil:
    cdef int k
    h[0] = 1.0
    if kmax >= 1:
        h[1] = x
    for k in range(1, kmax):
        h[k + 1] = x * h[k] - k * h[k - 1]


def hermite_table(x, int kmax):
    xa = np.ascontiguousarray(x, dtype=np.float64)
    shape = xa.shape
    cdef double[::1] flat = xa.reshape(-1)
    out = np.empty((flat.shape[0], kmax + 1))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(flat.shape[0]):
            _hermite_row(flat[i], kmax, &o[i, 0])
    return out.reshape(shape + (kmax + 1,))


def product_basis(index, Z):
    Za = np.ascontiguousarray(np.atleast_2d(Z), dtype=np.float64)
    idx = np.ascontiguousarray(index, dtype=np.int64)
    cdef Py_ssize_t N = Za.shape[0], d = Za.shape[1]
    cdef Py_ssize_t K = idx.shape[0], n = idx.shape[1]
    out = np.ones((N, K))
    if n == 0 or K == 0:
        return out
    J_, Kk_ = distinct_layout(idx)
    cdef cnp.int64_t[:, ::1] J = np.ascontiguousarray(J_)
    cdef cnp.int64_t[:, ::1] Kk = np.ascontiguousarray(Kk_)
    H_ = hermite_table(Za, n)
    cdef double[:, :, ::1] H = H_
    cdef double[:, ::1] o = out
    cdef Py_ssize_t s, a, p
    cdef double v
    with nogil:
        for s in range(N):
            for a in range(K):
                v = 1.0
                for p in range(n):
                    if Kk[a, p] > 0:
                        v = v * H[s, J[a, p], Kk[a, p]]
                o[s, a] = v
    return out


def gradient_basis(index, Z):
    Za = np.ascontiguousarray(np.atleast_2d(Z), dtype=np.float64)
    idx = np.ascontiguousarray(index, dtype=np.int64)
    cdef Py_ssize_t N = Za.shape[0]
    cdef Py_ssize_t K = idx.shape[0], n = idx.shape[1]
    J_, Kk_ = distinct_layout(idx)
    out = np.zeros((N, K, n))
    if n == 0 or K == 0:
        return out, J_
    cdef cnp.int64_t[:, ::1] J = np.ascontiguousarray(J_)
    cdef cnp.int64_t[:, ::1] Kk = np.ascontiguousarray(Kk_)
    H_ = hermite_table(Za, n)
    cdef double[:, :, ::1] H = H_
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t s, a, p, q
    cdef double v
    with nogil:
        for s in range(N):
            for a in range(K):
                for p in range(n):
                    if Kk[a, p] == 0:
                        continue
                    v = Kk[a, p] * H[s, J[a, p], Kk[a, p] - 1]
                    for q in range(n):
                        if q != p and Kk[a, q] > 0:
                            v = v * H[s, J[a, q], Kk[a, q]]
                    o[s, a, p] = v
    return out, J_


def flow_products(E, Einv):
    Ea = np.ascontiguousarray(E, dtype=np.float64)
    Ia = np.ascontiguousarray(Einv, dtype=np.float64)
    cdef Py_ssize_t N = Ea.shape[0], m = Ea.shape[1], d = Ea.shape[2]
    Jo = np.empty((N, m + 1, d, d))
    Ko = np.empty((N, m + 1, d, d))
    cdef double[:, :, :, ::1] e = Ea
    cdef double[:, :, :, ::1] ei = Ia
    cdef double[:, :, :, ::1] J = Jo
    cdef double[:, :, :, ::1] Kf = Ko
    cdef Py_ssize_t s, k, i, j, l
    cdef double acc, acc2
    with nogil:
        for s in range(N):
            for i in range(d):
                for j in range(d):
                    J[s, 0, i, j] = 1.0 if i == j else 0.0
                    Kf[s, 0, i, j] = 1.0 if i == j else 0.0
            for k in range(m):
                for i in range(d):
                    for j in range(d):
                        acc = 0.0
                        acc2 = 0.0
                        for l in range(d):
                            acc = acc + e[s, k, i, l] * J[s, k, l, j]
                            acc2 = acc2 + Kf[s, k, i, l] * ei[s, k, l, j]
                        J[s, k + 1, i, j] = acc
                        Kf[s, k + 1, i, j] = acc2
    return Jo, Ko
