"""64-bit seed mixing.

Per-run seeds are derived with the SplitMix64 finaliser so that run ``r`` of
an ensemble gets the same stream no matter which worker executes it.
"""
import hashlib

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """SplitMix64 output function applied to ``x`` (mod 2**64)."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Seed of stream ``index`` under ``master_seed``.

    ``mix64(master_seed + (index + 1) * GOLDEN_GAMMA)``, i.e. the
    ``index + 1``-th output of a SplitMix64 generator started at
    ``master_seed``.
    """
    if not 0 <= master_seed <= MASK64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {master_seed}")
    return mix64(master_seed + (index + 1) * GOLDEN_GAMMA)


def seed_from_key(master_seed: int, *parts) -> int:
    """Stable 64-bit seed from a master seed and arbitrary printable parts."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(master_seed).encode())
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode())
    return int.from_bytes(h.digest(), "little")
