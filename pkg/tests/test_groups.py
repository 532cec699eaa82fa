import random

import pytest
import sympy
from hypothesis import given, settings, strategies as st

from ringvote.groups import DEFAULT_GROUP, GROUPS, MODP_2048, digest


def test_default_params_are_a_safe_prime_group():
    g = DEFAULT_GROUP
    assert g.p == 2 * g.q + 1
    assert sympy.isprime(g.p) and sympy.isprime(g.q)
    assert g.p.bit_length() == 256
    assert g.exp(g.g, g.q) == 1 and g.g != 1


def test_modp_2048_params():
    g = MODP_2048
    assert g.p == 2 * g.q + 1
    assert g.exp(g.g, g.q) == 1
    assert sympy.isprime(g.p) and sympy.isprime(g.q)


def test_scalar_random_deterministic_and_in_range():
    a = DEFAULT_GROUP.scalar_random(random.Random(7))
    b = DEFAULT_GROUP.scalar_random(random.Random(7))
    assert a == b
    rng = random.Random(3)
    assert all(0 <= DEFAULT_GROUP.scalar_random(rng) < DEFAULT_GROUP.q for _ in range(200))


def test_scalar_random_distinct_across_seeds():
    outs = {DEFAULT_GROUP.scalar_random(random.Random(seed)) for seed in range(1000)}
    assert len(outs) == 1000  # zero collisions over 1000 seeds


def test_hash_to_scalar_deterministic_and_domain_separated():
    g = DEFAULT_GROUP
    assert g.hash_to_scalar(b"A", b"x") == g.hash_to_scalar(b"A", b"x")
    assert g.hash_to_scalar(b"A", b"x") != g.hash_to_scalar(b"B", b"x")
    assert 0 <= g.hash_to_scalar(b"A", b"") < g.q  # empty payload accepted


def test_hash_to_scalar_framing_blocks_boundary_shifts():
    g = DEFAULT_GROUP
    # Same concatenation, different split: framing must keep them apart.
    assert g.hash_to_scalar(b"AB", b"C") != g.hash_to_scalar(b"A", b"BC")


def test_hash_to_group_properties():
    g = DEFAULT_GROUP
    x = g.hash_to_group(b"D", b"payload")
    assert x == g.hash_to_group(b"D", b"payload")
    assert x != 1 and g.is_element(x)
    outs = {g.hash_to_group(b"D", b"p%d" % i) for i in range(1000)}
    assert len(outs) == 1000
    assert 1 not in outs


def test_digest_basics():
    assert digest(b"x") == digest(b"x")
    assert len(digest(b"")) == 32
    # A consensus label computed by two independent parties agrees.
    m, sig = b"message", b"signature-bytes"
    assert digest(m + sig) == digest(b"".join([m, sig]))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=DEFAULT_GROUP.q - 1),
       st.integers(min_value=0, max_value=DEFAULT_GROUP.q - 1))
def test_group_law_exponent_addition(a, b):
    g = DEFAULT_GROUP
    assert g.mul(g.exp(g.g, a), g.exp(g.g, b)) == g.exp(g.g, (a + b) % g.q)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=DEFAULT_GROUP.q - 1))
def test_scalar_inverse(a):
    g = DEFAULT_GROUP
    assert a * g.scalar_inv(a) % g.q == 1


def test_scalar_encoding_roundtrip_and_width():
    g = DEFAULT_GROUP
    for s in (0, 1, g.q - 1, 12345678901234567890 % g.q):
        raw = g.encode_scalar(s)
        assert len(raw) == 32  # little-endian 32 bytes
        assert g.decode_scalar(raw) == s
    with pytest.raises(ValueError):
        g.decode_scalar(g.encode_scalar(1) + b"\x00")
    with pytest.raises(ValueError):
        g.decode_scalar(g.q.to_bytes(32, "little"))


def test_element_encoding_roundtrip_and_validation():
    g = DEFAULT_GROUP
    for e in (1, g.g, g.exp(g.g, 987654321)):
        raw = g.encode_element(e)
        assert len(raw) == g.element_size
        assert g.decode_element(raw) == e
    # A non-residue is in Z_p* but not in the order-q subgroup.
    non_member = 2 if g.exp(2, g.q) != 1 else 3
    with pytest.raises(ValueError):
        g.decode_element(g.encode_element(non_member))
    with pytest.raises(ValueError):
        g.decode_element((g.p).to_bytes(g.element_size, "big"))


def test_group_registry():
    assert GROUPS["schnorr256"] is DEFAULT_GROUP
    assert GROUPS["modp2048"] is MODP_2048
