# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled enumeration kernels; see qmacsec._scanpy for the reference semantics."""

import numpy as np
from libc.math cimport log
from libc.stdint cimport int64_t


def scan(const int64_t[:, ::1] base, const int64_t[:, ::1] bz, const int64_t[::1] radix,
         const int64_t[::1] groups, const int64_t[::1] row_ids, int64_t weight,
         const int64_t[:, ::1] dec, const int64_t[::1] dec_mod, const int64_t[::1] dec_mode,
         const int64_t[:, ::1] target,
         int64_t[:, ::1] ref, int64_t[::1] ref_row, int64_t[::1] ref_total,
         int64_t[:, ::1] sums, int64_t[::1] group_rows, int64_t[::1] witness):
    cdef Py_ssize_t n = base.shape[0], m = bz.shape[0], t = radix.shape[0], nq = dec.shape[0]
    cdef Py_ssize_t S = ref.shape[1]
    cdef Py_ssize_t i, z, j, q, k, nt
    cdef int64_t g, code, v, s, tq, h, total
    cdef int64_t[::1] stride = np.ones(t, dtype=np.int64)
    cdef int64_t[::1] y = np.zeros(max(t, 1), dtype=np.int64)
    cdef int64_t[::1] hist = np.zeros(S, dtype=np.int64)
    cdef int64_t[::1] touched = np.zeros(m, dtype=np.int64)
    cdef int64_t failures = 0
    cdef bint ok
    for j in range(1, t):
        stride[j] = stride[j - 1] * radix[j - 1]
    total = weight * m
    for i in range(n):
        g = groups[i]
        nt = 0
        for z in range(m):
            code = 0
            for j in range(t):
                v = base[i, j] + bz[z, j]
                if v >= radix[j]:
                    v -= radix[j]
                y[j] = v
                code += v * stride[j]
            if hist[code] == 0:
                touched[nt] = code
                nt += 1
            hist[code] += 1
            for q in range(nq):
                tq = target[i, q]
                if tq < 0:
                    continue
                s = 0
                for j in range(t):
                    s += dec[q, j] * y[j]
                s = s % dec_mod[q]
                if dec_mode[q] == 0:
                    ok = s == tq
                else:
                    ok = (s == 0) == (tq == 1)
                if not ok:
                    failures += 1
                    if witness[2] < 0:
                        witness[2] = row_ids[i]
                        witness[3] = z
        if ref_row[g] < 0:
            ref_row[g] = row_ids[i]
            ref_total[g] = total
            for k in range(nt):
                ref[g, touched[k]] = hist[touched[k]] * weight
        elif witness[0] < 0:
            ok = ref_total[g] == total
            k = 0
            while ok and k < nt:
                ok = ref[g, touched[k]] == hist[touched[k]] * weight
                k += 1
            if not ok:
                witness[0] = row_ids[i]
                witness[1] = ref_row[g]
        for k in range(nt):
            code = touched[k]
            if sums.shape[0] > 0:
                sums[g, code] += hist[code] * weight
            hist[code] = 0
        group_rows[g] += 1
    return failures


def kl(const int64_t[:, ::1] base, const int64_t[:, ::1] bz, const int64_t[::1] radix,
       const int64_t[::1] groups, int64_t weight,
       const int64_t[:, ::1] sums, const int64_t[::1] group_rows):
    cdef Py_ssize_t n = base.shape[0], m = bz.shape[0], t = radix.shape[0]
    cdef Py_ssize_t S = sums.shape[1]
    cdef Py_ssize_t i, z, j, k, nt
    cdef int64_t g, code, v, h, ng, sg
    cdef int64_t[::1] stride = np.ones(t, dtype=np.int64)
    cdef int64_t[::1] hist = np.zeros(S, dtype=np.int64)
    cdef int64_t[::1] touched = np.zeros(m, dtype=np.int64)
    cdef double acc = 0.0
    cdef bint exact = True
    for j in range(1, t):
        stride[j] = stride[j - 1] * radix[j - 1]
    for i in range(n):
        g = groups[i]
        ng = group_rows[g]
        nt = 0
        for z in range(m):
            code = 0
            for j in range(t):
                v = base[i, j] + bz[z, j]
                if v >= radix[j]:
                    v -= radix[j]
                code += v * stride[j]
            if hist[code] == 0:
                touched[nt] = code
                nt += 1
            hist[code] += 1
        for k in range(nt):
            code = touched[k]
            h = hist[code] * weight
            sg = sums[g, code]
            if h * ng != sg:
                exact = False
                acc += h * log(<double>(h * ng) / <double>sg)
            hist[code] = 0
    return acc, exact
