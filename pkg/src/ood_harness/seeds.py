"""Deterministic, platform-independent random streams.

All randomness flows through PCG64 generators keyed by (namespace, seed)
so that every operation draws from its own stream and parallel per-fold
work stays reproducible regardless of scheduling.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

OOD_NS = 0x0F01
ID_NS = 0x0F02
PROFILE_NS = 0x0F03
KMEANS_NS = 0x0F04


def seed_stream(seed: int, namespace: int, n_children: int) -> list[np.random.Generator]:
    """n_children independent generators derived from (seed, namespace)."""
    root = np.random.SeedSequence([namespace, seed & _MASK64])
    return [np.random.default_rng(child) for child in root.spawn(n_children)]


def derive_seed(seed: int, namespace: int, index: int) -> int:
    """A 64-bit child seed for handing to an operation that seeds itself."""
    ss = np.random.SeedSequence([namespace, seed & _MASK64, index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
