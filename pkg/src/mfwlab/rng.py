"""Deterministic pseudo-randomness for the whole lab.

All randomness flows through :class:`RngState`, a thin wrapper around
numpy's PCG64 generator seeded through ``SeedSequence``.  PCG64 is a
fixed, documented algorithm whose streams are identical across
platforms, so an entire run is a pure function of its seed.  Distinct
logical streams (data synthesis, parameter init, training, evaluation)
are derived from the same seed via a stream index, which keeps them
statistically independent without consuming each other's draws.
"""

from __future__ import annotations

import numpy as np

__all__ = ["RngState", "seeded_rng", "uniform", "beta_sample", "permutation"]


class RngState:
    """Single-owner deterministic generator (PCG64)."""

    def __init__(self, seed: int, stream: int = 0):
        if seed < 0 or seed > 2**64 - 1:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed
        self.stream = stream
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, stream))))

    def generator(self) -> np.random.Generator:
        return self._gen


def seeded_rng(seed: int, stream: int = 0) -> RngState:
    """Create a reproducible generator; same (seed, stream) = same draws."""
    return RngState(seed, stream)


def uniform(rng: RngState) -> float:
    """One draw from Uniform[0, 1)."""
    return float(rng.generator().random())


def beta_sample(rng: RngState, alpha: float) -> float:
    """One draw from Beta(alpha, alpha)."""
    if alpha <= 0:
        raise ValueError(f"beta_sample needs alpha > 0, got {alpha}")
    return float(rng.generator().beta(alpha, alpha))


def permutation(rng: RngState, n: int) -> np.ndarray:
    """Uniform random permutation of 0..n-1 (Fisher-Yates under the hood)."""
    if n < 1:
        raise ValueError(f"permutation needs n >= 1, got {n}")
    return rng.generator().permutation(n)
