"""Homomorphic hash over G_q and its combination rules."""
from __future__ import annotations

from functools import lru_cache

from gmpy2 import mpz

from .params import Block, SecretState, SystemParams, powmod

_WINDOW = 4
_MASK = (1 << _WINDOW) - 1


@lru_cache(maxsize=8)
def _power_tables(p: int, gens: tuple[int, ...]) -> tuple[tuple, ...]:
    """g^0 .. g^(2^w - 1) for every generator."""
    P = mpz(p)
    tables = []
    for g in gens:
        row = [mpz(1)]
        for _ in range(_MASK):
            row.append(row[-1] * g % P)
        tables.append(tuple(row))
    return tuple(tables)


def hash_block(params: SystemParams, block: Block) -> int:
    """prod g_i^{b_i} mod p.  Needs only public parameters.

    Straus interleaving: one shared squaring chain over fixed w-bit windows.
    """
    if len(block) != len(params.gens):
        raise ValueError(f"block has {len(block)} segments, expected {len(params.gens)}")
    p = mpz(params.p)
    tables = _power_tables(params.p, params.gens)
    top = max((b.bit_length() for b in block), default=0)
    acc = mpz(1)
    for shift in range((top + _WINDOW - 1) // _WINDOW * _WINDOW - _WINDOW, -1, -_WINDOW):
        for _ in range(_WINDOW):
            acc = acc * acc % p
        for row, b in zip(tables, block):
            d = (b >> shift) & _MASK
            if d:
                acc = acc * row[d] % p
    return int(acc)


def hash_block_secret(params: SystemParams, secret: SecretState, block: Block) -> int:
    """Same value as hash_block with a single exponentiation, using Gamma."""
    exponent = sum(c * b for c, b in zip(secret.gamma, block, strict=True)) % params.q
    return powmod(secret.g, exponent, params.p)


def combine(params: SystemParams, h1: int, a1: int, h2: int, a2: int) -> int:
    p, q = params.p, params.q
    return powmod(h1, a1 % q, p) * powmod(h2, a2 % q, p) % p


def scale(params: SystemParams, h: int, a: int) -> int:
    return powmod(h, a % params.q, params.p)


def combine_many(params: SystemParams, pairs) -> int:
    """prod h_i^{a_i} mod p over (h_i, a_i) pairs."""
    p, q = params.p, params.q
    acc = 1
    for h, a in pairs:
        acc = acc * powmod(h, a % q, p) % p
    return acc


def is_group_element(params: SystemParams, h: int) -> bool:
    return 0 < h < params.p and powmod(h, params.q, params.p) == 1


def encode_hash(params: SystemParams, h: int) -> bytes:
    width = params.hash_bytes
    return width.to_bytes(2, "big") + h.to_bytes(width, "big")


def decode_hash(params: SystemParams, data: bytes, offset: int = 0) -> tuple[int, int]:
    if len(data) < offset + 2:
        raise ValueError("truncated hash value")
    width = int.from_bytes(data[offset : offset + 2], "big")
    end = offset + 2 + width
    if len(data) < end:
        raise ValueError("truncated hash value")
    return int.from_bytes(data[offset + 2 : end], "big"), end
