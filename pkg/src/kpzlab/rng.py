"""Counter-based random numbers keyed by (seed, row, col).

Every weight is a pure function of the cell key, so a grid regenerates
bit-for-bit regardless of traversal order, thread count, or how much padding
surrounds the region actually used.  The per-cell uniform is the splitmix64
finalizer applied to an affine combination of the key; the exponential
variate is its inverse CDF.
"""

import numpy as np

MASK64 = (1 << 64) - 1

# multipliers for the affine cell key; arbitrary fixed odd 64-bit constants
SEED_MULT = 0xD6E8FEB86659FD93
ROW_MULT = 0x9E3779B97F4A7C15
COL_MULT = 0xC2B2AE3D27D4EB4F
STREAM_MULT = 0xA24BAED4963EE407

# domain salt separating path-sampling uniforms from environment weights
PATH_SALT = 0x5851F42D4C957F2D


def mix64(z: int) -> int:
    """splitmix64 finalizer on python ints (reference implementation)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def seed_key(seed: int) -> int:
    """Fold an arbitrary python int seed into the 64-bit key space."""
    return (int(seed) * SEED_MULT) & MASK64


def derive_seed(master: int, index: int) -> int:
    """Per-replicate seed for replicate `index` under `master`.

    Depends only on (master, index): the replicate stream is identical no
    matter how replicates are chunked over workers.
    """
    return mix64((seed_key(master) + (int(index) + 1) * STREAM_MULT) & MASK64)


def cell_uniform(seed: int, row: int, col: int) -> float:
    """Uniform in (0,1) for one cell; scalar reference for tests."""
    z = mix64((seed_key(seed) + row * ROW_MULT + col * COL_MULT) & MASK64)
    return ((z >> 11) + 0.5) * 2.0**-53
