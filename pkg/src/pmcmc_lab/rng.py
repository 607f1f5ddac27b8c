"""Counter-based random substreams for reproducible simulation.

Every stochastic routine in the package draws from a :class:`SubstreamRng`,
which maps a short tuple of integer coordinates onto an independent Philox
stream.  The convention used throughout is ``(step, time, particle, site)``:
a draw is addressed by *where* it happens, never by *when* it happens, so
results do not depend on loop order or thread scheduling.  Replicated
(vectorised) kernels draw whole blocks from the stream of their draw site,
which keeps scalar and replicated runs individually reproducible.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Draw-site tags (the last stream coordinate).
SITE_INIT = 0
SITE_ANCESTOR = 1
SITE_MOVE = 2
SITE_FINAL = 3
SITE_ACCEPT = 4
SITE_THETA = 5


class SubstreamRng:
    """A 64-bit seed plus a coordinate scheme for independent substreams."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._key = np.random.SeedSequence(self.seed).generate_state(2, np.uint64)

    def stream(self, *coords: int) -> np.random.Generator:
        """Return the generator for a draw site addressed by up to 4 coordinates.

        Coordinates occupy the three high words of the Philox counter; the
        low word is left at zero because the generator increments it as it
        produces output.  A single stream can therefore emit 2^66 values
        before touching any other stream's counter range.  The last two
        coordinates share one word (the fourth must stay below 2^16).
        """
        if len(coords) > 4:
            raise ValueError("at most 4 stream coordinates are supported")
        c = [int(v) for v in coords] + [0] * (4 - len(coords))
        if not 0 <= c[3] < (1 << 16):
            raise ValueError("the fourth stream coordinate must lie in [0, 2^16)")
        counter = np.zeros(4, dtype=np.uint64)
        counter[3] = np.uint64(c[0] & _MASK64)
        counter[2] = np.uint64(c[1] & _MASK64)
        counter[1] = np.uint64(((c[2] << 16) | c[3]) & _MASK64)
        return np.random.Generator(np.random.Philox(key=self._key, counter=counter))

    def spawn(self, index: int) -> "SubstreamRng":
        """Derive an independent child (used for parallel chains/replicates)."""
        child = np.random.SeedSequence(entropy=self.seed, spawn_key=(int(index),))
        return SubstreamRng(int(child.generate_state(1, np.uint64)[0]))

    def __repr__(self) -> str:  # pragma: no cover
        return f"SubstreamRng(seed={self.seed})"


def as_substream(rng: "SubstreamRng | int") -> SubstreamRng:
    """Accept either a seed or an existing substream container."""
    if isinstance(rng, SubstreamRng):
        return rng
    return SubstreamRng(int(rng))
