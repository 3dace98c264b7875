"""Counter-based random streams (splitmix64) keyed by (replication, player).

The generator is a fixed, documented algorithm so simulations reproduce
bit-for-bit across runs, thread counts, and the pure/compiled kernels:
state_{k+1} = state_k + GOLDEN (mod 2^64), output = mix64(state_{k+1}),
uniforms are the top 53 bits scaled by 2^-53.  The compiled kernel
re-implements exactly these operations on uint64.
"""

MASK = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
INV53 = 1.0 / 9007199254740992.0  # 2^-53


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def stream_state(seed: int, rep: int, player: int) -> int:
    """Initial state of the independent stream for (replication, player)."""
    s = mix64((seed + GOLDEN) & MASK)
    s = mix64((s + (rep + 1) * GOLDEN) & MASK)
    s = mix64((s + (player + 1) * GOLDEN) & MASK)
    return s


def next_u01(state: int):
    """Advance one step; returns (new_state, uniform in [0, 1))."""
    state = (state + GOLDEN) & MASK
    return state, (mix64(state) >> 11) * INV53
