# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False, language_level=3
"""Compiled twin of _mc_pure.simulate_replication.

Operation order mirrors the pure kernel exactly (same splitmix64 stream,
same event merge order, same floating-point expressions), so outputs are
bitwise identical.  Keep in sync with _mc_pure.py.
"""

from libc.math cimport log1p
from libc.stdlib cimport free, malloc, realloc

import numpy as np

cdef unsigned long long MASK_HI = <unsigned long long>0xBF58476D1CE4E5B9
cdef unsigned long long MASK_LO = <unsigned long long>0x94D049BB133111EB
cdef unsigned long long GOLDEN = <unsigned long long>0x9E3779B97F4A7C15
cdef double INV53 = 1.0 / 9007199254740992.0

STATUS_OK = 0
STATUS_RATE_BOUND = 1


cdef inline unsigned long long mix64(unsigned long long z) noexcept nogil:
    z = (z ^ (z >> 30)) * MASK_HI
    z = (z ^ (z >> 27)) * MASK_LO
    return z ^ (z >> 31)


cdef inline unsigned long long stream_state(
    unsigned long long seed, unsigned long long rep, unsigned long long player
) noexcept nogil:
    cdef unsigned long long s = mix64(seed + GOLDEN)
    s = mix64(s + (rep + 1) * GOLDEN)
    s = mix64(s + (player + 1) * GOLDEN)
    return s


def simulate_replication(
    object seed_o,
    object rep_o,
    int N,
    int d,
    double T,
    double dt,
    int n_steps,
    double M,
    double total_rate,
    double inv_N,
    const double[:, ::1] m_vals,
    const double[:, :, ::1] base,
    pcoef_o,
    const double[:, ::1] cb,
    const double[:, ::1] cb_cum,
    const double[:, ::1] cp,
    const double[::1] m0_cdf,
    const double[::1] checkpoints,
    const long long[::1] stream_ids,
):
    cdef unsigned long long seed = <unsigned long long>(int(seed_o) & 0xFFFFFFFFFFFFFFFF)
    cdef unsigned long long rep = <unsigned long long>(int(rep_o) & 0xFFFFFFFFFFFFFFFF)
    cdef bint has_p = pcoef_o is not None
    cdef const double[:, :, :, ::1] pcoef
    if has_p:
        pcoef = pcoef_o
    else:
        pcoef = np.zeros((1, 1, 1, 1))

    cdef int K = checkpoints.shape[0]
    counts_chk_arr = np.zeros((K, d), dtype=np.int64)
    x1_chk_arr = np.zeros(K, dtype=np.int64)
    y1_chk_arr = np.zeros(K, dtype=np.int64)
    cdef long long[:, ::1] counts_chk = counts_chk_arr
    cdef long long[::1] x1_chk = x1_chk_arr
    cdef long long[::1] y1_chk = y1_chk_arr

    cdef long cap = 1024
    cdef long used = 0
    cdef double* et = <double*>malloc(cap * sizeof(double))
    cdef int* ey = <int*>malloc(cap * sizeof(int))
    cdef double* eu = <double*>malloc(cap * sizeof(double))
    cdef long* start = <long*>malloc((N + 1) * sizeof(long))
    cdef long* ptr = <long*>malloc(N * sizeof(long))
    cdef int* X = <int*>malloc(N * sizeof(int))
    cdef int* Y = <int*>malloc(N * sizeof(int))
    cdef long* counts = <long*>malloc(d * sizeof(long))
    if et == NULL or ey == NULL or eu == NULL or start == NULL or ptr == NULL \
            or X == NULL or Y == NULL or counts == NULL:
        raise MemoryError()

    cdef unsigned long long st
    cdef double u, t, gap
    cdef int i, s, x0, y, x, ys, k, k1, k2, x1
    cdef long j, total
    cdef int status = STATUS_OK
    cdef double cost = 0.0
    cdef double t_prev = 0.0
    cdef double rate_cap = M + 1e-9
    cdef int n_last = n_steps - 1
    cdef double lam, acc, f1, f2, tk, frac, t_ev
    cdef int ci = 0
    cdef int best_i
    cdef double best_t
    cdef long n_events

    try:
        for s in range(d):
            counts[s] = 0
        # per-player generation: initial-state uniform, then (gap, target, height)
        for i in range(N):
            start[i] = used
            st = stream_state(seed, rep, <unsigned long long>stream_ids[i])
            st = st + GOLDEN
            u = <double>(mix64(st) >> 11) * INV53
            x0 = 0
            while x0 < d - 1 and u >= m0_cdf[x0]:
                x0 += 1
            X[i] = x0
            Y[i] = x0
            counts[x0] += 1
            t = 0.0
            while True:
                st = st + GOLDEN
                u = <double>(mix64(st) >> 11) * INV53
                t += -log1p(-u) / total_rate
                if t > T:
                    break
                st = st + GOLDEN
                u = <double>(mix64(st) >> 11) * INV53
                y = <int>(u * d)
                if y >= d:
                    y = d - 1
                st = st + GOLDEN
                u = <double>(mix64(st) >> 11) * INV53
                if used == cap:
                    cap *= 2
                    et = <double*>realloc(et, cap * sizeof(double))
                    ey = <int*>realloc(ey, cap * sizeof(int))
                    eu = <double*>realloc(eu, cap * sizeof(double))
                    if et == NULL or ey == NULL or eu == NULL:
                        raise MemoryError()
                et[used] = t
                ey[used] = y
                eu[used] = u * M
                used += 1
        start[N] = used
        total = used
        n_events = total
        for i in range(N):
            ptr[i] = start[i]

        # merge players by (t, i); within a player events are in order
        for j in range(total):
            best_i = -1
            best_t = 0.0
            for i in range(N):
                if ptr[i] < start[i + 1]:
                    if best_i < 0 or et[ptr[i]] < best_t:
                        best_i = i
                        best_t = et[ptr[i]]
            i = best_i
            t_ev = et[ptr[i]]
            y = ey[ptr[i]]
            u = eu[ptr[i]]
            ptr[i] += 1

            while ci < K and checkpoints[ci] < t_ev:
                for s in range(d):
                    counts_chk[ci, s] = counts[s]
                x1_chk[ci] = X[0]
                y1_chk[ci] = Y[0]
                ci += 1

            x1 = X[0]
            k1 = <int>(t_prev / dt)
            if k1 > n_last:
                k1 = n_last
            k2 = <int>(t_ev / dt)
            if k2 > n_last:
                k2 = n_last
            f1 = cb_cum[k1, x1] + (t_prev - k1 * dt) * cb[k1, x1]
            f2 = cb_cum[k2, x1] + (t_ev - k2 * dt) * cb[k2, x1]
            acc = 0.0
            for s in range(d):
                acc += cp[x1, s] * counts[s]
            cost += (f2 - f1) + acc * inv_N * (t_ev - t_prev)
            t_prev = t_ev

            k = <int>(t_ev / dt)
            if k > n_last:
                k = n_last
            x = X[i]
            if y != x:
                lam = base[k, x, y]
                if has_p:
                    acc = 0.0
                    for s in range(d):
                        acc += pcoef[k, x, y, s] * counts[s]
                    lam += acc * inv_N
                if lam > rate_cap:
                    status = STATUS_RATE_BOUND
                if u < lam:
                    counts[x] -= 1
                    counts[y] += 1
                    X[i] = y
            ys = Y[i]
            if y != ys:
                lam = base[k, ys, y]
                if has_p:
                    tk = k * dt
                    frac = (t_ev - tk) / dt
                    acc = 0.0
                    for s in range(d):
                        acc += pcoef[k, ys, y, s] * (
                            m_vals[k, s] + frac * (m_vals[k + 1, s] - m_vals[k, s])
                        )
                    lam += acc
                if lam > rate_cap:
                    status = STATUS_RATE_BOUND
                if u < lam:
                    Y[i] = y

        x1 = X[0]
        k1 = <int>(t_prev / dt)
        if k1 > n_last:
            k1 = n_last
        f1 = cb_cum[k1, x1] + (t_prev - k1 * dt) * cb[k1, x1]
        f2 = cb_cum[n_steps, x1]
        acc = 0.0
        for s in range(d):
            acc += cp[x1, s] * counts[s]
        cost += (f2 - f1) + acc * inv_N * (T - t_prev)
        while ci < K:
            for s in range(d):
                counts_chk[ci, s] = counts[s]
            x1_chk[ci] = X[0]
            y1_chk[ci] = Y[0]
            ci += 1
    finally:
        free(et)
        free(ey)
        free(eu)
        free(start)
        free(ptr)
        free(X)
        free(Y)
        free(counts)

    return status, counts_chk_arr, x1_chk_arr, y1_chk_arr, cost, n_events
