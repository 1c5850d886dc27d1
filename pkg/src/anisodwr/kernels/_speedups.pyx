# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the NumPy reference kernels (same signatures/results)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def cdr_cell_matrices(double[:, ::1] W, double[:, :, ::1] bq, double[:, ::1] aq,
                      double eps, double[::1] delta,
                      double[:, ::1] tval, double[:, :, :, ::1] tgrad,
                      double[:, ::1] uval, double[:, :, :, ::1] ugrad,
                      double[:, :, ::1] ulap):
    cdef Py_ssize_t E = W.shape[0], Q = W.shape[1]
    cdef Py_ssize_t T = tval.shape[1], U = uval.shape[1]
    A_np = np.zeros((E, T, U))
    S_np = np.zeros((E, T, U))
    M_np = np.zeros((E, T, U))
    Mb_np = np.zeros((E, T, U))
    cdef double[:, :, ::1] A = A_np, S = S_np, M = M_np, Mb = Mb_np
    cdef Py_ssize_t e, q, i, j
    cdef double w, b0, b1, a, de, ti, tgb_i, ugb_j, rj, uj
    for e in range(E):
        de = delta[e]
        for q in range(Q):
            w = W[e, q]
            b0 = bq[e, q, 0]
            b1 = bq[e, q, 1]
            a = aq[e, q]
            for i in range(T):
                ti = tval[q, i]
                tgb_i = b0 * tgrad[e, q, i, 0] + b1 * tgrad[e, q, i, 1]
                for j in range(U):
                    uj = uval[q, j]
                    ugb_j = b0 * ugrad[e, q, j, 0] + b1 * ugrad[e, q, j, 1]
                    A[e, i, j] += w * (eps * (tgrad[e, q, i, 0] * ugrad[e, q, j, 0]
                                              + tgrad[e, q, i, 1] * ugrad[e, q, j, 1])
                                       + ugb_j * ti + a * uj * ti)
                    rj = -eps * ulap[e, q, j] + ugb_j + a * uj
                    S[e, i, j] += de * w * rj * tgb_i
                    M[e, i, j] += w * uj * ti
                    Mb[e, i, j] += de * w * uj * tgb_i
    return A_np, S_np, M_np, Mb_np


def cdr_cell_loads(double[:, ::1] W, double[:, :, ::1] bq, double[:, ::1] fq,
                   double[::1] delta, double[:, ::1] tval,
                   double[:, :, :, ::1] tgrad):
    cdef Py_ssize_t E = W.shape[0], Q = W.shape[1], T = tval.shape[1]
    F_np = np.zeros((E, T))
    Fb_np = np.zeros((E, T))
    cdef double[:, ::1] F = F_np, Fb = Fb_np
    cdef Py_ssize_t e, q, i
    cdef double wf, de, tgb_i
    for e in range(E):
        de = delta[e]
        for q in range(Q):
            wf = W[e, q] * fq[e, q]
            for i in range(T):
                tgb_i = (bq[e, q, 0] * tgrad[e, q, i, 0]
                         + bq[e, q, 1] * tgrad[e, q, i, 1])
                F[e, i] += wf * tval[q, i]
                Fb[e, i] += de * wf * tgb_i
    return F_np, Fb_np


def pair_cellwise(double[:, :, ::1] mats, double[:, ::1] test_vecs,
                  double[:, ::1] trial_vecs):
    cdef Py_ssize_t E = mats.shape[0], T = mats.shape[1], U = mats.shape[2]
    out_np = np.zeros(E)
    cdef double[::1] out = out_np
    cdef Py_ssize_t e, i, j
    cdef double acc, wi
    for e in range(E):
        acc = 0.0
        for i in range(T):
            wi = test_vecs[e, i]
            for j in range(U):
                acc += wi * mats[e, i, j] * trial_vecs[e, j]
        out[e] = acc
    return out_np
