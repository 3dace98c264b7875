"""Occupancy-vector enumeration for the exact N-player chain.

The other N-1 players are exchangeable under a decentralized symmetric
policy, so their occupancy vector n (sum N-1) is an exact sufficient
statistic.  Count vectors are enumerated in colexicographic order; the
joint index of a pair (x1, n) is rank(n) * d + x1.
"""

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import StateSpaceTooLarge

DEFAULT_CAP = 2_000_000


def compositions_count(parts: int, total: int) -> int:
    return comb(total + parts - 1, parts - 1)


@dataclass(frozen=True)
class CountEnumeration:
    d: int
    N: int  # number of players; counts sum to N - 1
    counts: np.ndarray  # (R, d) int64, colex order
    move_idx: np.ndarray  # (R, d, d) int32, rank of n - e_z + e_y, -1 if n_z = 0

    @property
    def size(self) -> int:
        return self.counts.shape[0]

    @property
    def joint_size(self) -> int:
        return self.size * self.d

    def rank(self, n) -> int:
        return rank_counts(tuple(int(v) for v in n))

    def unrank(self, r: int) -> tuple:
        return unrank_counts(self.d, self.N - 1, r)

    def joint_index(self, x1: int, n) -> int:
        return self.rank(n) * self.d + x1


def rank_counts(n: tuple) -> int:
    """Colex rank of a count vector among all vectors with the same sum."""
    d = len(n)
    s = sum(n)
    r = 0
    for j in range(d - 1, 0, -1):
        for v in range(n[j]):
            r += compositions_count(j, s - v)
        s -= n[j]
    return r


def unrank_counts(d: int, total: int, r: int) -> tuple:
    out = [0] * d
    s = total
    for j in range(d - 1, 0, -1):
        v = 0
        while True:
            block = compositions_count(j, s - v)
            if r < block:
                break
            r -= block
            v += 1
        out[j] = v
        s -= v
    out[0] = s
    return tuple(out)


def enumerate_count_states(d: int, N: int, cap: int = DEFAULT_CAP) -> CountEnumeration:
    """Complete colex enumeration with precomputed single-move targets."""
    if d < 2 or N < 2:
        raise ValueError("need d >= 2 and N >= 2")
    total = N - 1
    R = compositions_count(d, total)
    if R * d > cap:
        raise StateSpaceTooLarge(f"{R * d} joint states exceed cap {cap}")
    counts = np.empty((R, d), dtype=np.int64)
    for r in range(R):
        counts[r] = unrank_counts(d, total, r)
    by_tuple = {tuple(int(v) for v in counts[r]): r for r in range(R)}
    move = np.full((R, d, d), -1, dtype=np.int32)
    for r in range(R):
        n = counts[r]
        for z in range(d):
            if n[z] == 0:
                continue
            for y in range(d):
                if y == z:
                    move[r, z, y] = r
                    continue
                key = list(n)
                key[z] -= 1
                key[y] += 1
                move[r, z, y] = by_tuple[tuple(key)]
    counts.setflags(write=False)
    move.setflags(write=False)
    return CountEnumeration(d=d, N=N, counts=counts, move_idx=move)
