"""Deterministic seed derivation.

One master seed drives every stage of a run. Stage seeds come from a
splitmix64 finalizer applied to the master seed xored with a hash of the
stage name, so adding or reordering stages never perturbs the others.
Per-item streams (one per signature, one per permutation) use numpy's
SeedSequence keyed on (seed, index...), which is stable across platforms
and independent of generation order.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stage_seed(master_seed: int, stage: str) -> int:
    """Derive a 63-bit stage seed from the master seed and a stage name."""
    name_hash = int.from_bytes(
        hashlib.sha256(stage.encode("utf-8")).digest()[:8], "little"
    )
    return _splitmix64((master_seed & _MASK64) ^ name_hash) >> 1


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for item `key` under `seed` (schedule-free)."""
    return np.random.default_rng(np.random.SeedSequence((seed,) + key))
