"""Deterministic 64-bit seed derivation.

All randomness in a run descends from one master seed. Derived streams
(per-agent generators, per-replication run seeds, sweep-point seeds) are
obtained by folding small integer indices into the master seed with the
splitmix64 finalizer, so the same (master seed, indices) pair yields the
same stream in any implementation of this scheme.

Constants (splitmix64):
    increment   0x9E3779B97F4A7C15
    multiplier1 0xBF58476D1CE4E5B9
    multiplier2 0x94D049BB133111EB
"""

from __future__ import annotations

MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15

# Stream tags keep unrelated derivations from colliding.
STREAM_AGENT = 1
STREAM_RUN = 2
STREAM_SWEEP = 3


def splitmix64(x: int) -> int:
    """One splitmix64 step: mix ``x`` into a well-distributed 64-bit value."""
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *indices: int) -> int:
    """Fold nonnegative integer ``indices`` into ``master``, left to right.

    ``derive_seed(m, STREAM_SWEEP, p, r)`` is the seed for replication ``r``
    at sweep point ``p``; ``derive_seed(m, STREAM_AGENT, i)`` seeds agent
    ``i``'s generator.
    """
    h = master & MASK64
    for idx in indices:
        if idx < 0:
            raise ValueError(f"seed indices must be nonnegative, got {idx}")
        h = splitmix64(h ^ (((idx + 1) * _GOLDEN) & MASK64))
    return h
