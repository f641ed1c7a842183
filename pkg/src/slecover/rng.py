"""Counter-based random streams keyed by (seed, replica, stream).

Every replica draws from its own Philox generator, so results do not depend
on how replicas are batched or distributed over workers.
"""

import numpy as np

# stream identifiers; one per independent use of randomness
DRIVING = 0
BRIDGE = 1
WALKERS = 2
POINTS = 3
TWO_SIDED = 4

_MASK64 = (1 << 64) - 1


def replica_rng(seed, replica=0, stream=DRIVING):
    """Return an independent ``numpy.random.Generator`` for one replica.

    The 128-bit Philox key packs the 64-bit seed in the low word and
    ``replica`` and ``stream`` in the high word.
    """
    if replica < 0 or stream < 0 or stream >= 256:
        raise ValueError("replica must be >= 0 and stream in [0, 256)")
    key = (int(seed) & _MASK64) | (((int(replica) << 8) | int(stream)) << 64)
    return np.random.Generator(np.random.Philox(key=key))


class ReplicaNormals:
    """Buffered standard normals for a batch of replicas.

    Row ``i`` reproduces the stream of ``replica_rng(seed, replicas[i], stream)``
    exactly, whatever the chunk size.
    """

    def __init__(self, seed, replicas, stream, chunk=1024):
        self.gens = [replica_rng(seed, int(r), stream) for r in replicas]
        self.chunk = int(chunk)
        self.buf = np.empty((len(self.gens), self.chunk))
        self.pos = np.full(len(self.gens), self.chunk, dtype=np.int64)

    def draw(self, idx):
        """One normal for each replica index in ``idx`` (advances only those rows)."""
        idx = np.asarray(idx, dtype=np.int64)
        out = np.empty(idx.size)
        empty = idx[self.pos[idx] >= self.chunk]
        for i in empty:
            self.buf[i] = self.gens[i].standard_normal(self.chunk)
            self.pos[i] = 0
        out[:] = self.buf[idx, self.pos[idx]]
        self.pos[idx] += 1
        return out
