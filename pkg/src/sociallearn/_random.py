"""Seeding and categorical sampling shared by the simulators."""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, replication: int = 0) -> np.random.Generator:
    """Independent stream for ``replication`` under one master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(replication),)))


def inverse_cdf(p, u):
    """Index drawn from the last axis of ``p`` with uniforms ``u``.

    Zero-mass cells are never returned, including when rounding leaves the
    final cumulative sum a hair below ``u``.
    """
    cdf = np.cumsum(p, axis=-1)
    last = p.shape[-1] - 1 - np.argmax((p > 0)[..., ::-1], axis=-1)
    idx = (u[..., None] >= cdf).sum(axis=-1)
    return np.minimum(idx, last)
