# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for prototype selection (PAM swap, greedy MMD).

Semantics mirror numpy_impl exactly, including tie-breaking.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

BACKEND = "compiled"


def total_cost(double[:, ::1] D, cnp.intp_t[::1] medoids):
    cdef Py_ssize_t n = D.shape[0], k = medoids.shape[0]
    cdef Py_ssize_t i, j
    cdef double best, dist, cost = 0.0
    for i in range(n):
        best = D[i, medoids[0]]
        for j in range(1, k):
            dist = D[i, medoids[j]]
            if dist < best:
                best = dist
        cost += best
    return cost


def best_swap(double[:, ::1] D, cnp.intp_t[::1] medoids):
    cdef Py_ssize_t n = D.shape[0], k = medoids.shape[0]
    cdef Py_ssize_t i, j, m_pos, c_idx
    cdef double dist, d1v, d2v

    nearest_np = np.empty(n, dtype=np.intp)
    d1_np = np.empty(n, dtype=np.float64)
    d2_np = np.empty(n, dtype=np.float64)
    cdef cnp.intp_t[::1] nearest = nearest_np
    cdef double[::1] d1 = d1_np
    cdef double[::1] d2 = d2_np

    cdef double old_cost = 0.0
    for i in range(n):
        d1v = INFINITY
        d2v = INFINITY
        for j in range(k):
            dist = D[i, medoids[j]]
            if dist < d1v:
                d2v = d1v
                d1v = dist
                nearest[i] = j
            elif dist < d2v:
                d2v = dist
        d1[i] = d1v
        d2[i] = d2v
        old_cost += d1v

    is_medoid_np = np.zeros(n, dtype=np.uint8)
    for j in range(k):
        is_medoid_np[medoids[j]] = 1
    candidates_np = np.flatnonzero(is_medoid_np == 0).astype(np.intp)
    cdef cnp.intp_t[::1] candidates = candidates_np
    cdef Py_ssize_t n_cand = candidates.shape[0]
    if n_cand == 0:
        return 0.0, -1, -1

    dmin_wo_np = np.empty(n, dtype=np.float64)
    cdef double[::1] dmin_wo = dmin_wo_np
    cdef double best_delta = 0.0, new_cost, best_new, delta
    cdef Py_ssize_t best_m = -1, best_h = -1, h, best_h_pos

    for m_pos in range(k):
        for i in range(n):
            dmin_wo[i] = d2[i] if nearest[i] == m_pos else d1[i]
        best_new = INFINITY
        best_h_pos = -1
        for c_idx in range(n_cand):
            h = candidates[c_idx]
            new_cost = 0.0
            for i in range(n):
                dist = D[i, h]
                if dmin_wo[i] < dist:
                    new_cost += dmin_wo[i]
                else:
                    new_cost += dist
            if new_cost < best_new:
                best_new = new_cost
                best_h_pos = c_idx
        delta = best_new - old_cost
        if delta < best_delta - 1e-12:
            best_delta = delta
            best_m = m_pos
            best_h = candidates[best_h_pos]
    return best_delta, best_m, best_h


def greedy_mmd(double[:, ::1] K, Py_ssize_t k):
    cdef Py_ssize_t n = K.shape[0]
    cdef Py_ssize_t i, c, step, best_c
    cdef double l_new, obj, best_obj, coef

    colmean_np = np.asarray(K).mean(axis=0)
    cdef double[::1] colmean = colmean_np
    diag_np = np.ascontiguousarray(np.diag(np.asarray(K)))
    cdef double[::1] diag = diag_np

    selected_np = np.empty(k, dtype=np.intp)
    cdef cnp.intp_t[::1] selected = selected_np
    svec_np = np.zeros(n, dtype=np.float64)
    cdef double[::1] svec = svec_np
    mask_np = np.ones(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] mask = mask_np
    cdef double sum_mu = 0.0, sum_kss = 0.0

    for step in range(k):
        l_new = step + 1.0
        coef = -2.0 / l_new
        best_obj = INFINITY
        best_c = -1
        for c in range(n):
            if mask[c] == 0:
                continue
            obj = coef * (sum_mu + colmean[c]) + (
                sum_kss + 2.0 * svec[c] + diag[c]
            ) / (l_new * l_new)
            if obj < best_obj:
                best_obj = obj
                best_c = c
        selected[step] = best_c
        mask[best_c] = 0
        sum_mu += colmean[best_c]
        sum_kss += 2.0 * svec[best_c] + diag[best_c]
        for i in range(n):
            svec[i] += K[i, best_c]
    return selected_np
