from hypothesis import given, settings, strategies as st

from gossipaudit.hashing import (
    MERSENNE61,
    draw_key,
    f_add,
    f_inv,
    f_mul,
    f_pow,
    poly_hash,
)
from gossipaudit.rng import stream


def test_mersenne_prime():
    assert MERSENNE61 == 2**61 - 1


def test_hash_zero_vector():
    assert poly_hash(12345, [0] * 50) == 0
    assert poly_hash(0, [0, 0, 0]) == 0


def test_hash_small_field_example():
    # 3*1 + 4*2 + 5*4 = 31 in F_101
    assert poly_hash(2, [3, 4, 5], p=101) == 31


def test_hash_constant_term_only():
    assert poly_hash(0, [7, 9, 9]) == 7


def test_negative_entries_reduce_mod_p():
    p = MERSENNE61
    assert poly_hash(1, [-1], p=p) == p - 1
    assert poly_hash(5, [-3, 2]) == (-3 + 2 * 5) % p


ints = st.integers(-(2**70), 2**70)


@given(st.lists(ints, min_size=1, max_size=20), st.lists(ints, min_size=1, max_size=20),
       st.integers(0, MERSENNE61 - 1))
@settings(max_examples=200)
def test_linearity(a, b, s):
    n = max(len(a), len(b))
    a = a + [0] * (n - len(a))
    b = b + [0] * (n - len(b))
    ab = [x + y for x, y in zip(a, b)]
    p = MERSENNE61
    assert (poly_hash(s, a) + poly_hash(s, b)) % p == poly_hash(s, ab)


@given(st.lists(ints, min_size=1, max_size=12), st.integers(2, 2**30), st.integers(0, MERSENNE61 - 1))
@settings(max_examples=100)
def test_scaling(a, c, s):
    p = MERSENNE61
    scaled = [c * x for x in a]
    assert poly_hash(s, scaled) == (c * poly_hash(s, a)) % p


def test_collision_rate_small_field():
    # distinct sequences of length L collide for at most L-1 keys
    p = 257
    a = [1, 2, 3, 4]
    b = [1, 2, 3, 5]
    collisions = sum(poly_hash(s, a, p) == poly_hash(s, b, p) for s in range(p))
    assert collisions <= len(a) - 1


def test_single_entry_difference_detected():
    p = 257
    base = list(range(10))
    for i in range(10):
        other = list(base)
        other[i] += 1
        collisions = sum(poly_hash(s, base, p) == poly_hash(s, other, p) for s in range(p))
        assert collisions <= len(base) - 1


def test_draw_key_range_and_determinism():
    k1 = draw_key(stream(1, "k", 0))
    k2 = draw_key(stream(1, "k", 0))
    k3 = draw_key(stream(1, "k", 1))
    assert k1 == k2
    assert 0 <= k1 < MERSENNE61
    assert k1 != k3


def test_field_ops():
    p = MERSENNE61
    assert f_add(p - 1, 2) == 1
    assert f_mul(2, 2**60) == (2**61) % p == 1
    assert f_pow(3, p - 1) == 1  # Fermat
    x = 123456789
    assert f_mul(x, f_inv(x)) == 1
