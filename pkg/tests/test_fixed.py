import pytest
from hypothesis import given, strategies as st

from gossipaudit.fixed import (
    FRAC_BITS,
    RAW_LIMIT,
    SCALE,
    FixedOverflowError,
    ModelVec,
    from_raw,
    mul_round,
    to_raw,
    vec_add,
    vec_coeff,
    vec_from_floats,
    vec_sq_norm_raw,
    vec_sub,
)


def test_scale_constant():
    assert SCALE == 2**FRAC_BITS == 2**32


def test_to_raw_exact_values():
    assert to_raw(1.0) == SCALE
    assert to_raw(-0.5) == -(SCALE // 2)
    assert to_raw(0.0) == 0


def test_to_raw_ties_to_even():
    # 2^-33 is exactly half an ulp: rounds to the even raw value 0
    assert to_raw(2.0**-33) == 0
    assert to_raw(3 * 2.0**-33) == 2
    assert to_raw(-(2.0**-33)) == 0


def test_to_raw_rejects_nan_inf():
    with pytest.raises(ValueError):
        to_raw(float("nan"))
    with pytest.raises(ValueError):
        to_raw(float("inf"))


def test_overflow_is_hard_error():
    with pytest.raises(FixedOverflowError):
        to_raw(float(RAW_LIMIT))  # way past the limit after scaling


def test_mul_round_examples():
    one = SCALE
    assert mul_round(one, one) == one
    # 0.5 * 0.5 = 0.25 exactly
    assert mul_round(one // 2, one // 2) == one // 4
    # 1 ulp * 0.5 = half an ulp -> ties to even -> 0
    assert mul_round(1, one // 2) == 0
    # 3 ulp * 0.5 = 1.5 ulp -> ties to even -> 2
    assert mul_round(3, one // 2) == 2


@given(st.integers(-(2**40), 2**40), st.integers(-(2**40), 2**40))
def test_mul_round_matches_nearest_even(a, b):
    got = mul_round(a, b)
    exact_num = a * b
    # round-half-even of exact_num / SCALE
    q, r = divmod(exact_num, SCALE)
    expect = q + (1 if (r > SCALE // 2 or (r == SCALE // 2 and q % 2 == 1)) else 0)
    assert got == expect
    # determinism and odd symmetry
    assert mul_round(a, b) == got == mul_round(b, a)
    assert mul_round(-a, b) == -got


@given(st.lists(st.integers(-(2**40), 2**40), min_size=1, max_size=6))
def test_vec_roundtrip_and_norm(raws):
    raw = tuple(raws)
    assert vec_add(raw, vec_sub((0,) * len(raw), raw)) == (0,) * len(raw)
    assert vec_sq_norm_raw(raw) == sum(r * r for r in raw)


def test_vec_coeff_is_entrywise_mul_round():
    raw = (to_raw(1.0), to_raw(-2.0), 3)
    c = to_raw(0.25)
    assert vec_coeff(c, raw) == tuple(mul_round(c, r) for r in raw)


def test_modelvec_arithmetic():
    a = ModelVec.from_floats([1.0, 2.0])
    b = ModelVec.from_floats([0.5, -1.0])
    assert (a + b).to_floats() == (1.5, 1.0)
    assert (a - b).to_floats() == (0.5, 3.0)
    assert a.scale(0.5).to_floats() == (0.5, 1.0)
    assert a.sq_norm() == pytest.approx(5.0)
    assert ModelVec.zeros(3).norm() == 0.0


def test_from_raw_inverts_to_raw():
    for v in (0.0, 1.25, -3.75, 1e-6):
        assert abs(from_raw(to_raw(v)) - v) <= 2.0**-33
