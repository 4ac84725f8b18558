"""Portable seeded random streams.

All randomness comes from numpy's Philox4x64 counter-based bit generator,
whose output is specified independently of platform. Uniform doubles are
taken from ``Generator.random`` (53-bit, in ``[0, 1)``); Gaussian draws use
the Box-Muller transform on consecutive uniform pairs ``(u1, u2)``::

    z[2j]   = sqrt(-2 log(1 - u1)) * cos(2 pi u2)
    z[2j+1] = sqrt(-2 log(1 - u1)) * sin(2 pi u2)

so the n-th normal variate depends only on the seed and on n.

Streams are addressed by ``(seed, stream, index)``: stream ``NOISE`` carries
data noise and random solutions, stream ``RUNS`` the row sampling of run
``index``.
"""

import numpy as np

NOISE = 0
SOLUTION = 1
RUNS = 2


def make_rng(seed, stream=NOISE, index=0):
    """Return an independent Philox generator for ``(seed, stream, index)``."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def standard_normal(rng, size):
    """Draw ``size`` i.i.d. N(0, 1) variates by Box-Muller."""
    size = int(size)
    if size < 0:
        raise ValueError("size must be nonnegative")
    pairs = (size + 1) // 2
    u = rng.random(2 * pairs)
    radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
    angle = 2.0 * np.pi * u[1::2]
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:size]
