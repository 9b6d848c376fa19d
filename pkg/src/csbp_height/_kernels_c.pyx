# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the loops in ``_kernels_py`` (same signatures and semantics)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef enum:
    C_NEED_RANDOMS = 0
    C_FINISHED = 1
    C_ABSORBED = 2
    C_OVERFLOW = 3
    C_BUFFER_FULL = 4

GW_NEED_RANDOMS = C_NEED_RANDOMS
GW_FINISHED = C_FINISHED
GW_ABSORBED = C_ABSORBED
GW_OVERFLOW = C_OVERFLOW
GW_BUFFER_FULL = C_BUFFER_FULL


def height_scan(const double[::1] y, const double[::1] y_left, const cnp.uint8_t[::1] jump):
    cdef Py_ssize_t n = y.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cH_a = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] U_a = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] I_a = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tv_a = np.empty(n)
    cdef double[::1] cH = cH_a
    cdef double[::1] U = U_a
    cdef double[::1] I = I_a
    cdef double[::1] tv = tv_a
    cdef Py_ssize_t n_jumps = 0, i, sp = 0
    for i in range(n):
        if jump[i]:
            n_jumps += 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] L_a = np.empty(n_jumps + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] M_a = np.empty(n_jumps + 1)
    cdef double[::1] Ls = L_a
    cdef double[::1] Ms = M_a
    cdef double below = 0.0, v, u, u_mid, h, prev_u = 0.0, acc_tv = 0.0
    cdef double inf = y_left[0] if n > 0 else 0.0
    for i in range(n):
        v = y_left[i]
        if v < inf:
            inf = v
        while sp > 0 and Ls[sp - 1] >= v:
            sp -= 1
            if sp > 0:
                below -= Ms[sp - 1] - Ls[sp - 1]
        if sp > 0 and v < Ms[sp - 1]:
            Ms[sp - 1] = v
        if sp == 0:
            below = 0.0
            u_mid = 0.0
        else:
            u_mid = below + (Ms[sp - 1] - Ls[sp - 1])
        acc_tv += fabs(u_mid - prev_u)
        if jump[i]:
            if sp > 0:
                below += Ms[sp - 1] - Ls[sp - 1]
            Ls[sp] = v
            Ms[sp] = y[i]
            sp += 1
        if sp > 0:
            u = below + (Ms[sp - 1] - Ls[sp - 1])
        else:
            u = 0.0
        acc_tv += fabs(u - u_mid)
        h = y[i] - inf - u
        cH[i] = h if h > 0.0 else 0.0
        U[i] = u
        I[i] = inf
        tv[i] = acc_tv
        prev_u = u
    return cH_a, U_a, I_a, tv_a


cdef inline Py_ssize_t _search_right(const double[::1] cdf, double u) noexcept nogil:
    # first index with cdf[idx] > u
    cdef Py_ssize_t lo = 0, hi = cdf.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] <= u:
            lo = mid + 1
        else:
            hi = mid
    return lo


def gw_advance(double[::1] state, double t_max, double total_rate, const double[::1] cdf,
               const double[::1] exps, const double[::1] unifs, double[::1] rec_t,
               cnp.int64_t[::1] rec_k, double cap):
    cdef long long k = <long long>state[0]
    cdef double t = state[1], dt
    cdef Py_ssize_t pos = <Py_ssize_t>state[2]
    cdef Py_ssize_t n_rec = <Py_ssize_t>state[3]
    cdef bint record = rec_t.shape[0] > 0
    cdef Py_ssize_t n = exps.shape[0], ncdf = cdf.shape[0], ell
    cdef int status = C_NEED_RANDOMS
    with nogil:
        while True:
            if k == 0:
                status = C_ABSORBED
                break
            if record and n_rec >= rec_t.shape[0]:
                status = C_BUFFER_FULL
                break
            if pos >= n:
                status = C_NEED_RANDOMS
                break
            dt = exps[pos] / (total_rate * k)
            if t + dt >= t_max:
                t = t_max
                pos += 1
                status = C_FINISHED
                break
            t += dt
            ell = _search_right(cdf, unifs[pos])
            if ell >= ncdf:
                ell = ncdf - 1
            k += ell - 1
            pos += 1
            if record:
                rec_t[n_rec] = t
                rec_k[n_rec] = k
                n_rec += 1
            if k > cap:
                status = C_OVERFLOW
                break
    state[0] = k
    state[1] = t
    state[2] = pos
    state[3] = n_rec
    return status
