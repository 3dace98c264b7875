"""Pure-Python twin of the compiled coupled-simulation kernel.

Every floating-point operation here is mirrored, in the same order, by
_mc_speed.pyx; outputs are bitwise identical between the two backends.
Keep the two files in sync when changing either.
"""

from math import log1p

from .rng import GOLDEN, INV53, MASK, mix64, stream_state

STATUS_OK = 0
STATUS_RATE_BOUND = 1


def simulate_replication(
    seed,
    rep,
    N,
    d,
    T,
    dt,
    n_steps,
    M,
    total_rate,
    inv_N,
    m_vals,  # (n_steps+1) x d nested lists
    base,  # n_steps x d x d nested lists, zero diagonal
    pcoef,  # n_steps x d x d x d nested lists or None
    cb,  # n_steps x d
    cb_cum,  # (n_steps+1) x d
    cp,  # d x d
    m0_cdf,  # d
    checkpoints,  # ascending, last == T
    stream_ids,  # length N, stream key per player slot (identity by default)
):
    """Simulate one replication of the coupled X/Y system.

    Returns (status, counts_chk, x1_chk, y1_chk, cost, n_events) where
    counts_chk[k] is the X-system occupancy at checkpoint k, cost is the
    running-cost integral of player 0 in the X system (terminal cost is
    added by the caller).
    """
    # per-player event generation: one splitmix64 stream per (rep, player),
    # draw order: initial-state uniform, then (gap, target, height) per event
    ev_t = []
    ev_i = []
    ev_y = []
    ev_u = []
    X = [0] * N
    Y = [0] * N
    counts = [0] * d
    for i in range(N):
        st = stream_state(seed, rep, stream_ids[i])
        st = (st + GOLDEN) & MASK
        u = (mix64(st) >> 11) * INV53
        x0 = 0
        while x0 < d - 1 and u >= m0_cdf[x0]:
            x0 += 1
        X[i] = x0
        Y[i] = x0
        counts[x0] += 1
        t = 0.0
        while True:
            st = (st + GOLDEN) & MASK
            u = (mix64(st) >> 11) * INV53
            t += -log1p(-u) / total_rate
            if t > T:
                break
            st = (st + GOLDEN) & MASK
            u = (mix64(st) >> 11) * INV53
            y = int(u * d)
            if y >= d:
                y = d - 1
            st = (st + GOLDEN) & MASK
            u = (mix64(st) >> 11) * INV53
            ev_t.append(t)
            ev_i.append(i)
            ev_y.append(y)
            ev_u.append(u * M)
    order = sorted(range(len(ev_t)), key=lambda j: (ev_t[j], ev_i[j], j))

    K = len(checkpoints)
    counts_chk = [[0] * d for _ in range(K)]
    x1_chk = [0] * K
    y1_chk = [0] * K
    status = STATUS_OK
    cost = 0.0
    t_prev = 0.0
    ci = 0
    rate_cap = M + 1e-9
    has_p = pcoef is not None
    n_last = n_steps - 1

    for j in order:
        t_ev = ev_t[j]
        i = ev_i[j]
        y = ev_y[j]
        u = ev_u[j]
        while ci < K and checkpoints[ci] < t_ev:
            row = counts_chk[ci]
            for s in range(d):
                row[s] = counts[s]
            x1_chk[ci] = X[0]
            y1_chk[ci] = Y[0]
            ci += 1
        # running cost of player 0 over [t_prev, t_ev): state and measure constant
        x1 = X[0]
        k1 = int(t_prev / dt)
        if k1 > n_last:
            k1 = n_last
        k2 = int(t_ev / dt)
        if k2 > n_last:
            k2 = n_last
        f1 = cb_cum[k1][x1] + (t_prev - k1 * dt) * cb[k1][x1]
        f2 = cb_cum[k2][x1] + (t_ev - k2 * dt) * cb[k2][x1]
        acc = 0.0
        cpx = cp[x1]
        for s in range(d):
            acc += cpx[s] * counts[s]
        cost += (f2 - f1) + acc * inv_N * (t_ev - t_prev)
        t_prev = t_ev

        k = int(t_ev / dt)
        if k > n_last:
            k = n_last
        # X-chain: thinning against the pre-event empirical measure
        x = X[i]
        if y != x:
            lam = base[k][x][y]
            if has_p:
                pc = pcoef[k][x][y]
                acc = 0.0
                for s in range(d):
                    acc += pc[s] * counts[s]
                lam += acc * inv_N
            if lam > rate_cap:
                status = STATUS_RATE_BOUND
            if u < lam:
                counts[x] -= 1
                counts[y] += 1
                X[i] = y
        # Y-chain: same mark, rate evaluated at the deterministic flow m(t)
        ys = Y[i]
        if y != ys:
            lam = base[k][ys][y]
            if has_p:
                tk = k * dt
                frac = (t_ev - tk) / dt
                pc = pcoef[k][ys][y]
                m0r = m_vals[k]
                m1r = m_vals[k + 1]
                acc = 0.0
                for s in range(d):
                    acc += pc[s] * (m0r[s] + frac * (m1r[s] - m0r[s]))
                lam += acc
            if lam > rate_cap:
                status = STATUS_RATE_BOUND
            if u < lam:
                Y[i] = y

    # tail segment [t_prev, T] and remaining checkpoints
    x1 = X[0]
    k1 = int(t_prev / dt)
    if k1 > n_last:
        k1 = n_last
    f1 = cb_cum[k1][x1] + (t_prev - k1 * dt) * cb[k1][x1]
    f2 = cb_cum[n_steps][x1]
    acc = 0.0
    cpx = cp[x1]
    for s in range(d):
        acc += cpx[s] * counts[s]
    cost += (f2 - f1) + acc * inv_N * (T - t_prev)
    while ci < K:
        row = counts_chk[ci]
        for s in range(d):
            row[s] = counts[s]
        x1_chk[ci] = X[0]
        y1_chk[ci] = Y[0]
        ci += 1

    return status, counts_chk, x1_chk, y1_chk, cost, len(order)
