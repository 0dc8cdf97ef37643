"""Seeded, splittable random streams.

Each trial draws from a Philox counter-based generator keyed by
(base_seed, *indices), so parallel trials are reproducible and independent.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    entropy = [int(seed) & _MASK64] + [int(k) & _MASK64 for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def unit_vectors(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Uniform samples from the unit sphere S^{dim-1} via normalized Gaussians."""
    g = rng.standard_normal((count, dim))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    while np.any(norms == 0):  # measure zero, but keep the output well defined
        bad = norms[:, 0] == 0
        g[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
    return g / norms
