"""Seeded random substreams derived from one master seed."""

from __future__ import annotations

import hashlib

import numpy as np


def label_key(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "big")


def substream(seed: int, label: str, *keys: int) -> np.random.Generator:
    """Independent generator for ``label`` (and optional integer keys) under ``seed``."""
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed!r}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(label_key(label), *(int(k) for k in keys)))
    return np.random.default_rng(ss)


def derive_seed(seed: int, label: str, *keys: int) -> int:
    """Integer seed for a labelled sub-task, e.g. one point of a sweep."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(label_key(label), *(int(k) for k in keys)))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
