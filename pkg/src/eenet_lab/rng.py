"""Named, independent random streams.

Every consumer (network init, environment noise, tie-breaking, history draws,
...) asks for its own stream by name. Streams are derived from a
``numpy.random.SeedSequence`` whose spawn key encodes the stream name, so
adding a new consumer never shifts the draws of an existing one. The bit
generator is PCG64, which numpy guarantees to be reproducible across
platforms for a fixed seed.
"""

import zlib

import numpy as np

ALGORITHM = "PCG64"


def stream_key(name):
    """Stable 32-bit key for a stream name."""
    return zlib.crc32(name.encode("utf-8"))


def make_rng(seed, stream, *extra):
    """Return a ``Generator`` for ``(seed, stream, *extra)``.

    ``extra`` lets callers key sub-streams by integers (e.g. a round index),
    which makes per-round draws independent of call order.
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = (stream_key(stream),) + tuple(int(e) for e in extra)
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))
