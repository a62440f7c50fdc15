"""
Helpers for deriving independent random streams from one global seed.
"""

import hashlib

import numpy as np

__all__ = ['derive_seed', 'make_rng']


def derive_seed(seed, *keys):
    """
    Return 32-bit seed derived from *seed* and *keys*. Keys are either
    integers or strings (stage names, utterance ids, ...). Same inputs
    always give the same seed, different keys give unrelated streams.
    """
    if seed is None or int(seed) < 0:
        raise ValueError("Invalid seed '%s'" % seed)
    digest = hashlib.sha256(str(int(seed)).encode('ascii'))
    for key in keys:
        digest.update(b'\x00')
        digest.update(str(key).encode('utf-8'))
    return int.from_bytes(digest.digest()[:4], 'little')


def make_rng(seed, *keys):
    """
    Return :class:`numpy.random.Generator` seeded by
    :func:`derive_seed`.
    """
    return np.random.default_rng(derive_seed(seed, *keys))
