"""Polynomial fingerprints over a prime field.

``poly_hash(key, seq)`` maps an integer sequence to
``sum(seq[i] * key**i) mod p``.  For a fixed key the map is linear in the
sequence, which is what lets a verifier check an integer identity between
transcripts by checking the same identity on their fingerprints.  Two
distinct sequences of length L collide under a uniformly random key with
probability at most (L - 1) / p (a nonzero polynomial of degree < L has
fewer than L roots).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

MERSENNE61 = (1 << 61) - 1


def f_add(a: int, b: int, p: int = MERSENNE61) -> int:
    return (a + b) % p


def f_sub(a: int, b: int, p: int = MERSENNE61) -> int:
    return (a - b) % p


def f_mul(a: int, b: int, p: int = MERSENNE61) -> int:
    return (a * b) % p


def f_pow(a: int, e: int, p: int = MERSENNE61) -> int:
    return pow(a, e, p)


def f_inv(a: int, p: int = MERSENNE61) -> int:
    if a % p == 0:
        raise ZeroDivisionError("zero has no multiplicative inverse")
    return pow(a, p - 2, p)


def draw_key(gen: np.random.Generator, p: int = MERSENNE61) -> int:
    """Key drawn uniformly from the field."""
    return int(gen.integers(0, p))


def poly_hash(key: int, seq: Sequence[int], p: int = MERSENNE61) -> int:
    """Horner evaluation of ``sum(seq[i] * key**i) mod p``.

    Entries may be arbitrary (signed) integers; they are reduced mod p,
    negatives landing on ``p - (|r| mod p)``.
    """
    acc = 0
    for x in reversed(seq):
        acc = (acc * key + x) % p
    return acc


def hash_views(key: int, views: Sequence[Sequence[int]], p: int = MERSENNE61) -> tuple[int, ...]:
    """Fingerprint each flattened transcript view under one key."""
    return tuple(poly_hash(key, v, p) for v in views)
