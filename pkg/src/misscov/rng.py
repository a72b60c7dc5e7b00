"""Seeded, splittable random streams.

Every random draw in the package comes from ``stream(seed, stream_id)``: a
Philox (counter-based) generator keyed by ``SeedSequence(seed, spawn_key=(stream_id,))``.
Distinct stream ids give independent streams, so results do not depend on the
order in which trials or components are evaluated.

Trial seeds in sweeps are derived with :func:`trial_seed`::

    h = splitmix64(bits(p))
    h = splitmix64(h ^ N)
    h = splitmix64(h ^ trial_index)
    seed = splitmix64(master_seed ^ h)

where ``bits(p)`` is the IEEE-754 binary64 pattern of ``p`` read as an
unsigned little-endian integer and ``splitmix64`` is the finalizer of
Steele, Lea and Flood's SplitMix64 (constants below). This mixer is part of
the output contract: changing it changes every sweep CSV.
"""
import struct

import numpy as np

MASK64 = (1 << 64) - 1

# Stream ids. Never renumber: doing so changes every generated dataset.
STREAM_ROTATION = 1
STREAM_GAUSSIAN = 2
STREAM_CHISQ = 3
STREAM_MASK = 4
STREAM_NET = 5
STREAM_OPNORM_W = 6


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def float_bits(x):
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def trial_seed(master_seed, p, n, trial_index):
    h = splitmix64(float_bits(p))
    h = splitmix64(h ^ (int(n) & MASK64))
    h = splitmix64(h ^ (int(trial_index) & MASK64))
    return splitmix64((int(master_seed) & MASK64) ^ h)


def stream(seed, stream_id):
    """Independent generator for ``(seed, stream_id)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & MASK64, spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(ss))
