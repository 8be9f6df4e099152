"""Incrementally constructible FFT-based MDS code.

Level l holds a (2^{l+1}, 2^l) codeword split into two halves X and Y of
2^l symbols each.  X is the cascade of mixes over the raw inputs; Y runs the
identical cascade with input t pre-multiplied by omega^{bitrev(t)}.  The
cascade only needs ``add`` and ``smul`` on its elements, so the same code
serves blocks (segment vectors mod q), scalars, and hash values (where add
is multiplication mod p and smul is exponentiation).
"""
from __future__ import annotations

from functools import lru_cache
from typing import Mapping, Sequence

from .linalg import SingularMatrixError, solve_mod
from .params import powmod


class ScalarOps:
    def __init__(self, q: int):
        self.q = q
        self.zero = 0

    def add(self, x, y):
        return (x + y) % self.q

    def smul(self, a, x):
        return a * x % self.q


class BlockOps:
    def __init__(self, q: int, m: int):
        self.q = q
        self.zero = (0,) * m

    def add(self, x, y):
        q = self.q
        return tuple((a + b) % q for a, b in zip(x, y))

    def smul(self, a, x):
        q = self.q
        return tuple(a * b % q for b in x)


class HashOps:
    """Hash values as a Z_q-module: add = product mod p, smul = power."""

    def __init__(self, p: int, q: int):
        self.p = p
        self.q = q
        self.zero = 1

    def add(self, x, y):
        return x * y % self.p

    def smul(self, a, x):
        return powmod(x, a % self.q, self.p)


def bit_reverse(t: int, width: int) -> int:
    if not 0 <= t < 1 << width:
        raise ValueError(f"{t} does not fit into {width} bits")
    out = 0
    for _ in range(width):
        out = (out << 1) | (t & 1)
        t >>= 1
    return out


class DecodeError(ValueError):
    pass


class FFTCode:
    """Code for capacity n over Z_q with omega of order 2n."""

    def __init__(self, q: int, omega: int, n: int):
        if n & (n - 1) or n < 1:
            raise ValueError("n must be a power of two")
        self.q = q
        self.omega = omega
        self.n = n
        self.k = n.bit_length() - 1

    @classmethod
    def from_params(cls, params) -> "FFTCode":
        return cls(params.q, params.omega, params.n)

    def level_root(self, level: int) -> int:
        """omega_l, a primitive 2^{l+1}-th root of unity."""
        return powmod(self.omega, 2 * self.n >> (level + 1), self.q)

    def twist(self, t: int) -> int:
        return powmod(self.omega, bit_reverse(t % self.n, self.k), self.q)

    def mix(self, ops, A0: Sequence, A1: Sequence, level: int) -> list:
        half = len(A0)
        if len(A1) != half or half != 1 << level:
            raise ValueError("mix needs two arrays of length 2^level")
        q = self.q
        root = self.level_root(level)
        out = [None] * (2 * half)
        r = 1
        for i in range(half):
            t = ops.smul(r, A1[i])
            out[i] = ops.add(A0[i], t)
            out[i + half] = ops.add(A0[i], ops.smul(q - 1, t))
            r = r * root % q
        return out

    def rebuild_level(self, ops, lower: Sequence[Sequence], incoming, level: int) -> list:
        """Merge full levels 0..level-1 and ``incoming`` into a new level ``level``."""
        if len(lower) != level:
            raise ValueError("rebuild needs every lower level")
        for i, arr in enumerate(lower):
            if len(arr) != 1 << i:
                raise ValueError(f"level {i} is not full")
        cur = [incoming]
        for i in range(level):
            cur = self.mix(ops, lower[i], cur, i)
        return cur

    def insert(self, ops, levels: dict[int, list], incoming) -> int:
        """Binary-counter insert into one side; returns the level that was filled."""
        level = 0
        while level in levels:
            level += 1
        lower = [levels.pop(i) for i in range(level)]
        levels[level] = self.rebuild_level(ops, lower, incoming, level)
        return level

    def encode_level(self, ops, inputs: Sequence, t0: int = 0) -> tuple[list, list]:
        """Codeword (X, Y) of 2^l inputs arriving at times t0, t0+1, ..."""
        size = len(inputs)
        if size & (size - 1) or size < 1:
            raise ValueError("input count must be a power of two")
        xs: dict[int, list] = {}
        ys: dict[int, list] = {}
        for j, x in enumerate(inputs):
            self.insert(ops, xs, x)
            self.insert(ops, ys, ops.smul(self.twist(t0 + j), x))
        (X,) = xs.values()
        (Y,) = ys.values()
        return X, Y

    def encode_full(self, ops, inputs: Sequence) -> tuple[list, list]:
        if len(inputs) != self.n:
            raise ValueError(f"expected {self.n} inputs, got {len(inputs)}")
        return self.encode_level(ops, inputs, 0)

    def generator_matrix(self, level: int, t0: int = 0) -> list[list[int]]:
        """2^l x 2^{l+1} matrix G with codeword = inputs . G (X columns first)."""
        return [list(row) for row in _generator(self.q, self.omega, self.n, level, t0)]

    def decode(self, known: Mapping[int, Sequence[int]], level: int, t0: int = 0) -> list[tuple[int, ...]]:
        """Recover the 2^l input blocks from >= 2^l known codeword positions.

        Positions 0..2^l-1 are X slots, 2^l..2^{l+1}-1 are Y slots.  Extra
        positions are re-encoded and checked for consistency.
        """
        size = 1 << level
        if any(not 0 <= pos < 2 * size for pos in known):
            raise ValueError("codeword position out of range")
        if len(known) < size:
            raise DecodeError(f"need {size} positions, have {len(known)}")
        G = _generator(self.q, self.omega, self.n, level, t0)
        chosen = sorted(known)[:size]
        A = [[G[j][pos] for j in range(size)] for pos in chosen]
        try:
            sol = solve_mod(A, [known[pos] for pos in chosen], self.q)
        except SingularMatrixError as exc:
            raise DecodeError("generator submatrix is singular") from exc
        inputs = [tuple(row) for row in sol]
        q = self.q
        for pos in sorted(known)[size:]:
            expect = tuple(
                sum(G[j][pos] * inputs[j][s] for j in range(size)) % q
                for s in range(len(inputs[0]))
            )
            if expect != tuple(known[pos]):
                raise DecodeError(f"position {pos} is inconsistent with the others")
        return inputs


@lru_cache(maxsize=64)
def _generator(q: int, omega: int, n: int, level: int, t0: int) -> tuple[tuple[int, ...], ...]:
    # feed all unit vectors at once: input j is e_j, so output symbol c is column c
    size = 1 << level
    code = FFTCode(q, omega, n)
    ops = BlockOps(q, size)
    units = [tuple(int(i == j) for i in range(size)) for j in range(size)]
    X, Y = code.encode_level(ops, units, t0)
    cols = X + Y
    return tuple(tuple(cols[c][j] for c in range(2 * size)) for j in range(size))
