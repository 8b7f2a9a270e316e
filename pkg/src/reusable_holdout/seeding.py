"""Deterministic sub-seed derivation.

Every random stream in the package is derived from one root seed plus a
path of keys (component names and indices), so any piece of a run can be
regenerated on its own.
"""

import hashlib

import numpy as np


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("seed keys must be non-negative")
        return int(key)
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed, *keys):
    """Return a 64-bit seed derived from ``seed`` and a path of ``keys``."""
    entropy = [_key_to_int(seed)] + [_key_to_int(k) for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def make_rng(seed, *keys):
    """Return a numpy Generator for the stream named by ``keys``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        [_key_to_int(seed)] + [_key_to_int(k) for k in keys])))
