"""Deterministic fixed-point arithmetic.

Every quantity an agent transmits is a signed integer scaled by
``2**FRAC_BITS``.  Addition and subtraction are exact; multiplying by a
coefficient rescales once with round-half-to-even.  Because the whole
pipeline is integer arithmetic, the transcript identities checked during
validation hold bit-exactly, and runs reproduce across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

FRAC_BITS = 32
SCALE = 1 << FRAC_BITS
_HALF = SCALE >> 1

# Raw magnitudes at or past this bound abort the run; values never wrap.
RAW_LIMIT = 1 << 96


class FixedOverflowError(OverflowError):
    """A fixed-point raw value left the representable range."""


def check_raw(raw: int) -> int:
    if raw >= RAW_LIMIT or raw <= -RAW_LIMIT:
        raise FixedOverflowError(f"fixed-point overflow: |raw| >= 2**96 ({raw})")
    return raw


def to_raw(value: float) -> int:
    """Round a real number to the nearest raw integer, ties to even."""
    scaled = value * SCALE
    if math.isnan(scaled) or math.isinf(scaled):
        raise ValueError(f"cannot encode {value!r} as fixed point")
    return check_raw(round(scaled))


def from_raw(raw: int) -> float:
    return raw / SCALE


def mul_round(a_raw: int, b_raw: int) -> int:
    """Product of two raw values rescaled by 2**-FRAC_BITS, ties to even."""
    q, r = divmod(a_raw * b_raw, SCALE)
    if r > _HALF or (r == _HALF and q & 1):
        q += 1
    return q


# -- vector helpers on bare raw tuples (hot path) --------------------------

def vec_zeros(dim: int) -> tuple[int, ...]:
    return (0,) * dim


def vec_from_floats(values: Iterable[float]) -> tuple[int, ...]:
    return tuple(to_raw(v) for v in values)


def vec_to_floats(raw: Sequence[int]) -> tuple[float, ...]:
    return tuple(r / SCALE for r in raw)


def vec_add(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    return tuple(x + y for x, y in zip(a, b))


def vec_sub(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    return tuple(x - y for x, y in zip(a, b))


def vec_coeff(coeff_raw: int, raw: Sequence[int]) -> tuple[int, ...]:
    """Entrywise ``mul_round`` by a coefficient already encoded as raw."""
    return tuple(mul_round(coeff_raw, r) for r in raw)


def vec_check(raw: Sequence[int]) -> Sequence[int]:
    for r in raw:
        check_raw(r)
    return raw


def vec_sq_norm_raw(raw: Sequence[int]) -> int:
    """Exact squared norm at scale ``2**(2*FRAC_BITS)`` (no rounding)."""
    return sum(r * r for r in raw)


def vec_sq_norm(raw: Sequence[int]) -> float:
    return vec_sq_norm_raw(raw) / float(SCALE * SCALE)


def vec_norm(raw: Sequence[int]) -> float:
    return math.sqrt(vec_sq_norm_raw(raw)) / SCALE


@dataclass(frozen=True)
class ModelVec:
    """A d-dimensional model or gradient vector in fixed point."""

    raw: tuple[int, ...]

    @classmethod
    def zeros(cls, dim: int) -> "ModelVec":
        return cls(vec_zeros(dim))

    @classmethod
    def from_floats(cls, values: Iterable[float]) -> "ModelVec":
        return cls(vec_from_floats(values))

    @property
    def dim(self) -> int:
        return len(self.raw)

    def __add__(self, other: "ModelVec") -> "ModelVec":
        return ModelVec(vec_add(self.raw, other.raw))

    def __sub__(self, other: "ModelVec") -> "ModelVec":
        return ModelVec(vec_sub(self.raw, other.raw))

    def scale(self, coeff: float) -> "ModelVec":
        """Multiply by a real coefficient, rounded once per entry."""
        return ModelVec(vec_coeff(to_raw(coeff), self.raw))

    def sq_norm(self) -> float:
        return vec_sq_norm(self.raw)

    def norm(self) -> float:
        return vec_norm(self.raw)

    def to_floats(self) -> tuple[float, ...]:
        return vec_to_floats(self.raw)
