"""Gaussian elimination over Z_q."""
from __future__ import annotations

from typing import Sequence


class SingularMatrixError(ArithmeticError):
    pass


def inv_mod(a: int, q: int) -> int:
    """Inverse by extended Euclid."""
    a %= q
    if a == 0:
        raise ZeroDivisionError("zero has no inverse")
    r0, r1, s0, s1 = q, a, 0, 1
    while r1:
        t = r0 // r1
        r0, r1 = r1, r0 - t * r1
        s0, s1 = s1, s0 - t * s1
    if r0 != 1:
        raise ZeroDivisionError(f"{a} not invertible mod {q}")
    return s0 % q


def solve_mod(A: Sequence[Sequence[int]], B: Sequence[Sequence[int]], q: int) -> list[list[int]]:
    """Solve A X = B for square A; rows of B are right-hand-side vectors."""
    size = len(A)
    if any(len(row) != size for row in A) or len(B) != size:
        raise ValueError("shape mismatch")
    M = [[x % q for x in a] + [y % q for y in b] for a, b in zip(A, B)]
    width = len(M[0]) if M else 0
    for col in range(size):
        piv = next((r for r in range(col, size) if M[r][col]), None)
        if piv is None:
            raise SingularMatrixError(f"no pivot in column {col}")
        M[col], M[piv] = M[piv], M[col]
        inv = inv_mod(M[col][col], q)
        pivot_row = [x * inv % q for x in M[col]]
        M[col] = pivot_row
        for r in range(size):
            f = M[r][col]
            if r != col and f:
                row = M[r]
                M[r] = [(row[c] - f * pivot_row[c]) % q for c in range(width)]
    return [row[size:] for row in M]


def rank_mod(M: Sequence[Sequence[int]], q: int) -> int:
    basis = EchelonBasis(q)
    return sum(basis.add(row) for row in M)


class EchelonBasis:
    """Incrementally maintained row-echelon basis, for independence tests."""

    def __init__(self, q: int):
        self.q = q
        self.rows: list[tuple[int, list[int]]] = []

    def __len__(self) -> int:
        return len(self.rows)

    def reduce(self, row: Sequence[int]) -> list[int]:
        q = self.q
        v = [x % q for x in row]
        for piv, b in self.rows:
            f = v[piv]
            if f:
                v = [(x - f * y) % q for x, y in zip(v, b)]
        return v

    def add(self, row: Sequence[int]) -> bool:
        """Insert ``row`` if independent of the basis; report whether it was."""
        v = self.reduce(row)
        piv = next((i for i, x in enumerate(v) if x), None)
        if piv is None:
            return False
        inv = inv_mod(v[piv], self.q)
        self.rows.append((piv, [x * inv % self.q for x in v]))
        return True
