"""Merkle hash tree over U's tags.

Levels with an odd number of nodes promote their last label unchanged, which
makes every node identical to the RFC 6962 node covering the same leaf range.
``predict_root`` relies on this: nodes are keyed by (start, size) so labels
learned from proofs in an N-leaf tree can be reused for a tree of N +/- 1.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Mapping, Sequence

LABEL_BYTES = 32
EMPTY_ROOT = hashlib.sha256(b"\x02empty").digest()


def leaf_label(payload: bytes) -> bytes:
    return hashlib.sha256(b"\x00" + payload).digest()


def node_label(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(b"\x01" + left + right).digest()


class MerkleError(ValueError):
    pass


@dataclass(frozen=True)
class MerkleProof:
    """Leaf payload plus sibling labels bottom-up.

    Each path entry is (height, is_left, label): ``is_left`` means the sibling
    sits to the left of the path.  Heights without an entry are promotions.
    """

    leaf: bytes
    path: tuple[tuple[int, bool, bytes], ...]

    def index(self) -> int:
        return sum(1 << h for h, is_left, _ in self.path if is_left)

    def to_bytes(self) -> bytes:
        out = bytearray(len(self.leaf).to_bytes(2, "big") + self.leaf)
        out.append(len(self.path))
        for h, is_left, label in self.path:
            out.append((h << 1) | int(is_left))
            out += label
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> tuple["MerkleProof", int]:
        try:
            llen = int.from_bytes(data[offset : offset + 2], "big")
            pos = offset + 2
            leaf = bytes(data[pos : pos + llen])
            pos += llen
            if len(leaf) != llen:
                raise MerkleError("truncated proof")
            count = data[pos]
            pos += 1
            path = []
            for _ in range(count):
                orient = data[pos]
                label = bytes(data[pos + 1 : pos + 1 + LABEL_BYTES])
                if len(label) != LABEL_BYTES:
                    raise MerkleError("truncated proof")
                path.append((orient >> 1, bool(orient & 1), label))
                pos += 1 + LABEL_BYTES
        except IndexError:
            raise MerkleError("truncated proof") from None
        return cls(leaf, tuple(path)), pos


def _levels(leaves: Sequence[bytes]) -> list[list[bytes]]:
    level = [leaf_label(x) for x in leaves]
    out = [level]
    while len(level) > 1:
        nxt = [node_label(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        out.append(nxt)
        level = nxt
    return out


class MerkleTree:
    def __init__(self, leaves: Sequence[bytes] = ()):
        self.leaves = list(leaves)
        self._rebuild()

    def _rebuild(self) -> None:
        self.levels = _levels(self.leaves) if self.leaves else []

    def __len__(self) -> int:
        return len(self.leaves)

    @property
    def root(self) -> bytes:
        return self.levels[-1][0] if self.leaves else EMPTY_ROOT

    def prove(self, i: int) -> MerkleProof:
        if not 0 <= i < len(self.leaves):
            raise MerkleError(f"leaf {i} out of range")
        path = []
        idx = i
        for h, level in enumerate(self.levels[:-1]):
            sib = idx ^ 1
            if sib < len(level):
                path.append((h, bool(idx & 1), level[sib]))
            idx >>= 1
        return MerkleProof(self.leaves[i], tuple(path))

    def _update_path(self, i: int) -> None:
        self.levels[0][i] = leaf_label(self.leaves[i])
        idx = i
        for h in range(len(self.levels) - 1):
            level = self.levels[h]
            parent = idx >> 1
            left = parent << 1
            if left + 1 < len(level):
                self.levels[h + 1][parent] = node_label(level[left], level[left + 1])
            else:
                self.levels[h + 1][parent] = level[left]
            idx = parent

    def set(self, i: int, payload: bytes) -> bytes:
        if not 0 <= i < len(self.leaves):
            raise MerkleError(f"leaf {i} out of range")
        self.leaves[i] = payload
        self._update_path(i)
        return self.root

    def append(self, payload: bytes) -> bytes:
        self.leaves.append(payload)
        self._rebuild()
        return self.root

    def swap_remove(self, i: int) -> bytes:
        """Move the last leaf into position i and truncate."""
        if not 0 <= i < len(self.leaves):
            raise MerkleError(f"leaf {i} out of range")
        last = self.leaves.pop()
        if i < len(self.leaves):
            self.leaves[i] = last
        self._rebuild()
        return self.root


def build(leaves: Sequence[bytes]) -> tuple[MerkleTree, bytes]:
    if not leaves:
        raise MerkleError("cannot build a tree without leaves")
    tree = MerkleTree(leaves)
    return tree, tree.root


def root_of(leaves: Sequence[bytes]) -> bytes:
    return MerkleTree(leaves).root


def _walk(i: int, proof: MerkleProof):
    """Yield ((start, height), label) for every node on the proof's path."""
    label = leaf_label(proof.leaf)
    yield (i, 0), label
    node = i
    h = 0
    entries = {e[0]: e for e in proof.path}
    top = max(entries) + 1 if entries else 0
    while h < top:
        if h in entries:
            _, is_left, sib = entries[h]
            if is_left != bool(node & 1):
                raise MerkleError("orientation does not match index")
            yield ((node ^ 1) << h, h), sib
            label = node_label(sib, label) if is_left else node_label(label, sib)
        node >>= 1
        h += 1
        yield (node << h, h), label


def verify(root: bytes, i: int, proof: MerkleProof) -> bool:
    try:
        if proof.index() != i:
            return False
        label = None
        for _, label in _walk(i, proof):
            pass
        return label == root
    except (MerkleError, TypeError, ValueError):
        return False


def _range(start: int, height: int, size: int) -> tuple[int, int]:
    end = min(start + (1 << height), size)
    return start, end - start


def predict_root(
    root: bytes,
    size: int,
    proofs: Mapping[int, MerkleProof],
    changes: Mapping[int, bytes],
    new_size: int,
) -> bytes:
    """Root after setting/appending leaves in ``changes`` and resizing to ``new_size``.

    ``proofs`` must verify against ``root`` in the current ``size``-leaf tree
    and cover every leaf whose neighbourhood changes.  Raises MerkleError when
    a proof fails or the proofs do not determine the new root.
    """
    known: dict[tuple[int, int], bytes] = {}
    for i, proof in proofs.items():
        if not verify(root, i, proof):
            raise MerkleError(f"proof for leaf {i} does not verify")
        for (start, h), label in _walk(i, proof):
            start_, width = _range(start, h, size)
            known[(start_, width)] = label
    # a label depends only on its leaf range; drop ranges touching a change
    for start, width in list(known):
        if start + width > new_size or any(start <= c < start + width for c in changes):
            del known[(start, width)]
    for i, payload in changes.items():
        if not 0 <= i < new_size:
            raise MerkleError(f"change at {i} outside the new tree")
        known[(i, 1)] = leaf_label(payload)
    if new_size == 0:
        return EMPTY_ROOT

    def label(start: int, width: int) -> bytes:
        if (start, width) in known:
            return known[(start, width)]
        if width == 1:
            raise MerkleError(f"proofs do not cover leaf {start}")
        split = 1 << ((width - 1).bit_length() - 1)
        return node_label(label(start, split), label(start + split, width - split))

    return label(0, new_size)


def apply(tree: MerkleTree, updtype: str, i: int, payload: bytes = b"") -> bytes:
    """Physical update under append-and-swap: insert appends, delete swaps in the last leaf."""
    if updtype == "modify":
        return tree.set(i, payload)
    if updtype == "insert":
        if i != len(tree):
            raise MerkleError("inserts append at the end; order lives in the position map")
        return tree.append(payload)
    if updtype == "delete":
        return tree.swap_remove(i)
    raise MerkleError(f"unknown update {updtype!r}")
