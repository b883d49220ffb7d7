"""Deterministic, labelled random sub-streams.

All stochastic components draw from independent PCG64 streams keyed by
(master seed, component label, index...).  Adding a new component never
perturbs the draws of existing ones, and the same key always yields the
same stream on any platform.
"""

from __future__ import annotations

import numpy as np


def _encode_label(label) -> int:
    if isinstance(label, str):
        return int.from_bytes(label.encode("utf-8"), "little")
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError("integer labels must be non-negative")
        return int(label)
    raise TypeError(f"labels must be str or int, got {type(label).__name__}")


def seed_sequence(master_seed: int, *labels) -> np.random.SeedSequence:
    entropy = [_encode_label(master_seed)] + [_encode_label(x) for x in labels]
    return np.random.SeedSequence(entropy)


def generator(master_seed: int, *labels) -> np.random.Generator:
    """Independent generator for the component identified by the labels."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master_seed, *labels)))


def child_seed(master_seed: int, *labels) -> int:
    """A 64-bit seed derived from the labelled sub-stream (for APIs taking ints)."""
    return int(seed_sequence(master_seed, *labels).generate_state(1, np.uint64)[0])
