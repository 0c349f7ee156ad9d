"""Deterministic seed derivation and random stream construction.

Every random stream in this package is a Philox counter-based generator
(64-bit outputs) keyed by a seed derived from the experiment master seed
through splitmix64.  Replica r uses the (r+1)-th splitmix64 output, so
the map (master, r) -> key is a fixed public function and results do not
depend on how replicas are scheduled.  Constants are documented in
docs/constants.md and are part of the reproducibility contract.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Distinguishes the reference-sample stream of a two-sample comparison
# from every replica stream of the same experiment.
REFERENCE_TAG = 0xA5A5A5A5A5A5A5A5


def derive_seed(master: int, index: int) -> int:
    """Return the (index+1)-th output of splitmix64 seeded with ``master``."""
    if not 0 <= master <= _MASK64:
        raise ValueError("master seed must fit in 64 bits")
    if index < 0:
        raise ValueError("index must be nonnegative")
    z = (master + (index + 1) * _GOLDEN) & _MASK64
    z ^= z >> 30
    z = (z * _MIX1) & _MASK64
    z ^= z >> 27
    z = (z * _MIX2) & _MASK64
    z ^= z >> 31
    return z


def reference_seed(master: int) -> int:
    """Seed for the exact-sampler reference stream of an experiment."""
    return derive_seed(master ^ REFERENCE_TAG, 0)


def stream(key: int) -> np.random.Generator:
    """Philox generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=key))
