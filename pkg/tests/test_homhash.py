import itertools
import random

from hypothesis import given, strategies as st

from hhpor.homhash import (
    combine,
    decode_hash,
    encode_hash,
    hash_block,
    hash_block_secret,
    is_group_element,
    scale,
)
from hhpor.params import setup_profile
from oracles import hash_direct

P16, S16 = setup_profile("toy", 16, random.Random(11))


def test_toy_hash_values(toy):
    params, secret = toy
    assert hash_block(params, (0, 0)) == 1
    assert hash_block(params, (1, 1)) == 93
    assert hash_block(params, (2, 3)) == 76
    assert (2 * 2 + 3 * 3) % 17 == 13 and pow(64, 13, 103) == 76
    assert hash_block_secret(params, secret, (2, 3)) == 76


def test_toy_combine_and_scale(toy):
    params, _ = toy
    assert combine(params, 79, 2, 9, 3) == 76
    assert combine(params, 76, 1, 1, 0) == 76
    assert combine(params, 76, 0, 93, 0) == 1
    assert scale(params, 79, 4) == pow(79, 4, 103) == hash_block(params, (4, 0))
    assert scale(params, 76, 1) == 76 and scale(params, 76, 0) == 1


def test_exhaustive_secret_matches_public_on_toy(toy):
    params, secret = toy
    for block in itertools.product(range(17), repeat=2):
        assert hash_block_secret(params, secret, block) == hash_block(params, block)
        assert hash_block(params, block) == hash_direct(103, (79, 9), block)


def test_toy_collisions_are_kernel_of_gamma(toy):
    params, secret = toy
    blocks = list(itertools.product(range(17), repeat=2))
    hashes = {b: hash_block(params, b) for b in blocks}
    for u in blocks[::7]:
        for v in blocks:
            in_kernel = sum(c * (a - b) for c, a, b in zip(secret.gamma, u, v)) % 17 == 0
            assert (hashes[u] == hashes[v]) == in_kernel


blocks16 = st.lists(st.integers(0, P16.q - 1), min_size=P16.m, max_size=P16.m).map(tuple)
scalars = st.integers(0, P16.q - 1)


@given(blocks16, blocks16, scalars, scalars)
def test_homomorphism(u, v, a, b):
    q = P16.q
    w = tuple((a * x + b * y) % q for x, y in zip(u, v))
    assert hash_block(P16, w) == combine(P16, hash_block(P16, u), a, hash_block(P16, v), b)


@given(blocks16)
def test_secret_shortcut_equals_product_form(u):
    assert hash_block_secret(P16, S16, u) == hash_block(P16, u) == hash_direct(P16.p, P16.gens, u)


@given(blocks16, scalars)
def test_scale_matches_scaled_block(u, a):
    scaled = tuple(a * x % P16.q for x in u)
    assert scale(P16, hash_block(P16, u), a) == hash_block(P16, scaled)


@given(blocks16)
def test_hash_is_group_element_and_serializes(u):
    h = hash_block(P16, u)
    assert is_group_element(P16, h)
    data = encode_hash(P16, h)
    assert len(data) == 2 + P16.hash_bytes
    assert decode_hash(P16, data) == (h, len(data))
