"""Reproducible random variates for noise synthesis.

All randomness flows through a Philox counter-based bit generator keyed
by the user's seed, and normal variates are produced by an explicit
Box-Muller transform (cosine branch) on consecutive uniform draws.  The
exact draw order is part of each consumer's contract, so synthesized
fixtures are bit-reproducible and can be re-derived outside this module.
"""

import numpy as np


def make_generator(seed):
    """Philox-backed Generator keyed by an integer seed."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


def uniforms(gen, shape):
    """float64 uniforms on [0, 1), one consecutive block per call."""
    return gen.random(shape)


def normals(gen, shape):
    """Standard normals via Box-Muller on two consecutive uniform blocks.

    z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2); the (1 - u1) keeps the log
    argument in (0, 1] for u1 in [0, 1).
    """
    u1 = gen.random(shape)
    u2 = gen.random(shape)
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
