"""Seeded, splittable random streams.

Every stochastic routine in the package takes either an integer seed or a
SeededRng. Streams split hierarchically so that adding consumers (extra
ensemble members, extra replicates) never disturbs existing ones.
"""
from __future__ import annotations

import numpy as np

__all__ = ["SeededRng", "replicate_rng"]


class SeededRng:
    """Wrapper around numpy's PCG64 generator with deterministic splitting.

    Identical seeds yield identical draw sequences. ``split(n)`` derives n
    child streams that are statistically independent of each other and of
    the parent's subsequent output.
    """

    def __init__(self, seed):
        if isinstance(seed, SeededRng):
            seed = seed.seq
        if isinstance(seed, np.random.SeedSequence):
            self.seq = seed
        else:
            self.seq = np.random.SeedSequence(int(seed))
        self.gen = np.random.Generator(np.random.PCG64(self.seq))

    def split(self, n):
        """Return ``n`` independent child streams."""
        if n < 1:
            raise ValueError(f"split needs n >= 1, got {n}")
        return [SeededRng(child) for child in self.seq.spawn(n)]

    # Thin passthroughs for the draws used in this package.
    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def standard_normal(self, size=None):
        return self.gen.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def permutation(self, n):
        return self.gen.permutation(n)

    def choice(self, a, size=None, replace=True):
        return self.gen.choice(a, size=size, replace=replace)

    def __repr__(self):
        return f"SeededRng(entropy={self.seq.entropy}, key={self.seq.spawn_key})"


def replicate_rng(master_seed, replicate):
    """Stream for one replicate of a multi-replicate run.

    Derived directly from (master_seed, replicate) so that growing the
    replicate count never changes the streams of earlier replicates.
    """
    if replicate < 0:
        raise ValueError(f"replicate index must be >= 0, got {replicate}")
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate),))
    return SeededRng(seq)
