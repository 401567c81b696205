"""Deterministic per-purpose random streams derived from one root seed.

Every stochastic component asks for its own named stream so that adding
or reordering draws in one place never shifts the numbers seen by
another. Stream identity is the pair (root_seed, label); the label is
hashed so that stream separation does not depend on call order.
"""

import hashlib

import numpy as np


def derive_rng(root_seed: int, label: str) -> np.random.Generator:
    """Return a Generator unique to (root_seed, label)."""
    if root_seed < 0:
        raise ValueError("root seed must be non-negative")
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([root_seed, *words]))
