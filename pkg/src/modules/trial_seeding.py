"""
trial_seeding.py

Reusable seeding utilities for snapshot synthesis and Monte Carlo trials.
All randomness in the toolkit MUST flow through this module.

Design goals:
- deterministic: a trial seed depends only on (master_seed, axis value, trial)
- independent of execution order and worker count (counter-based, no shared stream)
- stable across processes and Python versions (no use of built-in hash())
"""

from __future__ import annotations

import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


class SeedError(ValueError):
    pass


def _validate_seed(seed: int) -> int:
    if seed is None:
        raise SeedError("Seed is None.")
    seed = int(seed)
    if seed < 0:
        raise SeedError(f"Seed must be an unsigned integer, got {seed}.")
    return seed & SEED_MASK


def make_rng(seed: int) -> np.random.Generator:
    """
    Fresh PCG64 generator for one seed. Identical seeds give bit-identical streams.
    """
    return np.random.default_rng(_validate_seed(seed))


def derive_trial_seed(master_seed: int, axis_value: float, trial: int) -> int:
    """
    master_seed XOR blake2b("<axis_value!r>:<trial>"), truncated to 64 bits.
    """
    tag = f"{float(axis_value)!r}:{int(trial)}".encode("ascii")
    digest = hashlib.blake2b(tag, digest_size=8).digest()
    return (_validate_seed(master_seed) ^ int.from_bytes(digest, "little")) & SEED_MASK
