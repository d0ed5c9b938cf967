# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs, isfinite

cnp.import_array()


def pvar_dp(values, double p):
    cdef const double[:, ::1] x = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef double[::1] cum = np.zeros(n)
    cdef Py_ssize_t i, j, k
    cdef double best, s, diff, cand
    for j in range(1, n):
        best = 0.0
        for i in range(j):
            s = 0.0
            for k in range(d):
                diff = x[j, k] - x[i, k]
                s += diff * diff
            cand = cum[i] + pow(sqrt(s), p)
            if cand > best:
                best = cand
        cum[j] = best
    return cum[n - 1]


def hjb_substeps(u, c0, cp, cm, src, long nsteps, bint periodic, bint clamp):
    cdef double[::1] cur = np.array(u, dtype=np.float64)
    cdef double[::1] nxt = np.empty_like(cur)
    cdef const double[:, ::1] a0 = np.ascontiguousarray(c0, dtype=np.float64)
    cdef const double[:, ::1] ap = np.ascontiguousarray(cp, dtype=np.float64)
    cdef const double[:, ::1] am = np.ascontiguousarray(cm, dtype=np.float64)
    cdef const double[:, ::1] sr = np.ascontiguousarray(src, dtype=np.float64)
    cdef Py_ssize_t n = cur.shape[0], ncon = a0.shape[0]
    cdef Py_ssize_t step, i, k
    cdef double ui, upv, umv, lo, hi, val, best
    cdef double[::1] tmp
    for step in range(nsteps):
        for i in range(n):
            ui = cur[i]
            if i + 1 < n:
                upv = cur[i + 1]
            elif periodic:
                upv = cur[0]
            else:
                upv = cur[n - 1]
            if i > 0:
                umv = cur[i - 1]
            elif periodic:
                umv = cur[n - 1]
            else:
                umv = cur[0]
            if clamp:
                lo = ui
                if upv < lo:
                    lo = upv
                if umv < lo:
                    lo = umv
                hi = ui
                if upv > hi:
                    hi = upv
                if umv > hi:
                    hi = umv
            best = 0.0
            for k in range(ncon):
                val = a0[k, i] * ui + ap[k, i] * upv + am[k, i] * umv
                if clamp:
                    if val < lo:
                        val = lo
                    if val > hi:
                        val = hi
                val = val + sr[k, i]
                if k == 0 or val < best:
                    best = val
            nxt[i] = best
        tmp = cur
        cur = nxt
        nxt = tmp
    return np.asarray(cur)


def davie_affine(y0, a_mat, a_off, dxi, b_mats, b_offs, dz, lvl2, double guard):
    cdef double[::1] y = np.array(y0, dtype=np.float64)
    cdef const double[:, ::1] A = np.ascontiguousarray(a_mat, dtype=np.float64)
    cdef const double[::1] c = np.ascontiguousarray(a_off, dtype=np.float64)
    cdef const double[::1] dx = np.ascontiguousarray(dxi, dtype=np.float64)
    cdef const double[:, :, ::1] B = np.ascontiguousarray(b_mats, dtype=np.float64)
    cdef const double[:, ::1] cb = np.ascontiguousarray(b_offs, dtype=np.float64)
    cdef const double[:, ::1] Z = np.ascontiguousarray(dz, dtype=np.float64)
    cdef const double[:, :, ::1] M = np.ascontiguousarray(lvl2, dtype=np.float64)
    cdef Py_ssize_t nsteps = Z.shape[0], d = B.shape[0], e = y.shape[0]
    ys_arr = np.empty((nsteps + 1, e))
    cdef double[:, ::1] ys = ys_arr
    cdef double[:, ::1] w = np.empty((d, e))
    cdef double[::1] ynew = np.empty(e)
    cdef double[::1] bw = np.empty(e)
    cdef Py_ssize_t k, i, j, a, b
    cdef double s, m, mx
    for a in range(e):
        ys[0, a] = y[a]
    for k in range(nsteps):
        for i in range(d):
            for a in range(e):
                s = 0.0
                for b in range(e):
                    s += B[i, a, b] * y[b]
                w[i, a] = s + cb[i, a]
        for a in range(e):
            s = 0.0
            for b in range(e):
                s += A[a, b] * y[b]
            ynew[a] = y[a] + (s + c[a]) * dx[k]
        for i in range(d):
            for a in range(e):
                ynew[a] = ynew[a] + w[i, a] * Z[k, i]
        for i in range(d):
            for j in range(d):
                m = M[k, j, i]
                if m != 0.0:
                    for a in range(e):
                        s = 0.0
                        for b in range(e):
                            s += B[i, a, b] * w[j, b]
                        bw[a] = s
                    for a in range(e):
                        ynew[a] = ynew[a] + bw[a] * m
        mx = 0.0
        for a in range(e):
            y[a] = ynew[a]
            ys[k + 1, a] = y[a]
            if not isfinite(y[a]):
                mx = guard * 2.0
            elif fabs(y[a]) > mx:
                mx = fabs(y[a])
        if mx > guard:
            return ys_arr[: k + 2], k
    return ys_arr, -1
