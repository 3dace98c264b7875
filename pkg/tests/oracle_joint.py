"""Uncompressed N-player oracle on the full product chain Sigma^N.

No occupancy compression: the joint state is the tuple (x_1, ..., x_N),
player 1 at index 0, everyone else following the symmetric feedback.  Used
to certify that the count-compressed dynamic programs are exact.
"""

import itertools

import numpy as np

from mfg_kinetic.model import CONTROLLED_RATE


class ProductChain:
    def __init__(self, spec, N):
        self.spec = spec
        self.N = N
        d = spec.d
        self.states = list(itertools.product(range(d), repeat=N))
        self.index = {s: i for i, s in enumerate(self.states)}
        self.mus = np.array([[s.count(j) / N for j in range(d)] for s in self.states])

    def full_generator(self, t, sym_actions, beta_actions=None):
        """Dense joint generator; player 1 may use its own action table."""
        spec = self.spec
        d = spec.d
        S = len(self.states)
        Q = np.zeros((S, S))
        for si, s in enumerate(self.states):
            mu = self.mus[si]
            for i in range(self.N):
                x = s[i]
                if i == 0 and beta_actions is not None:
                    act = beta_actions[si]
                else:
                    act = sym_actions[x]
                for y in range(d):
                    if y == x:
                        continue
                    s2 = list(s)
                    s2[i] = y
                    Q[si, self.index[tuple(s2)]] += spec.rate(t, x, y, act, mu)
        Q[np.arange(S), np.arange(S)] = -Q.sum(axis=1) + np.diag(Q)
        return Q

    def _rhs(self, V, sym_actions, best):
        spec = self.spec
        d = spec.d
        S = len(self.states)
        out = np.zeros(S)
        theta = spec.cr.theta if spec.family == CONTROLLED_RATE else None
        a_max = (
            spec.derived.a_max
            if (spec.family == CONTROLLED_RATE and spec.derived is not None)
            else (spec.action_bound() if spec.family == CONTROLLED_RATE else None)
        )
        for si, s in enumerate(self.states):
            mu = self.mus[si]
            tot = 0.0
            for i in range(1, self.N):
                x = s[i]
                for y in range(d):
                    if y == x:
                        continue
                    s2 = list(s)
                    s2[i] = y
                    tot += spec.rate(0.0, x, y, sym_actions[x], mu) * (
                        V[self.index[tuple(s2)]] - V[si]
                    )
            x1 = s[0]
            diff = np.empty(d)
            for y in range(d):
                s2 = list(s)
                s2[0] = y
                diff[y] = V[self.index[tuple(s2)]] - V[si]
            if not best:
                a = sym_actions[x1]
                row = spec.rate_row(0.0, x1, a, mu)
                tot += float(row @ diff) + spec.run_cost(0.0, x1, a, mu)
            elif spec.family == CONTROLLED_RATE:
                a = np.clip(-diff / (2.0 * theta), 0.0, a_max)
                a[x1] = 0.0
                zeta = spec.zeta(mu)
                tot += float((a + zeta) @ diff) - zeta * diff[x1]
                tot += theta * float(a @ a) + float(spec.cr.c1[x1] @ mu)
            else:
                best_v = np.inf
                for a in range(spec.n_actions):
                    row = spec.rate_row(0.0, x1, a, mu)
                    best_v = min(best_v, float(row @ diff) + spec.run_cost(0.0, x1, a, mu))
                tot += best_v
            out[si] = tot
        return out

    def backward_cost(self, policy, best=False):
        """RK4 sweep on the product chain; returns E[J(0)] under m0^N."""
        spec = self.spec
        grid = spec.grid()
        n = grid.size - 1
        V = np.array([spec.terminal_cost(s[0], self.mus[i]) for i, s in enumerate(self.states)])
        for k in range(n - 1, -1, -1):
            h = grid[k + 1] - grid[k]
            acts = policy.actions[k]
            f1 = self._rhs(V, acts, best)
            f2 = self._rhs(V + 0.5 * h * f1, acts, best)
            f3 = self._rhs(V + 0.5 * h * f2, acts, best)
            f4 = self._rhs(V + h * f3, acts, best)
            V = V + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        w = np.array([np.prod([spec.m0[x] for x in s]) for s in self.states])
        return float(w @ V)
