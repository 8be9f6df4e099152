"""The storage party.

Holds U, H, C, the tag mirrors H~ and C~, and the Merkle tree over U's tags.
Runs block-side rebuilds itself and answers reads, proof requests, tag
fetch/store and audits.  It only ever sees public parameters.

Adversary modes let tests play the server side of the security game.
"""
from __future__ import annotations

import math
import pickle
import random
from dataclasses import dataclass, field
from typing import Optional, Union

from .fftcode import BlockOps, FFTCode
from .hierlog import c_addresses, level_addresses, target_level
from .merkle import MerkleTree
from .params import Address, Block, SystemParams, data_block, record_to_block, zero_block
from .sigtag import AuthTag
from . import wire


class ProtocolError(RuntimeError):
    """A request the server cannot honour; maps to an ERROR frame."""


@dataclass
class AdversaryMode:
    kind: str = "honest"
    level: Union[int, str, None] = None  # int, "C" or "all" for delete
    fraction: float = 0.0
    addr: Optional[Address] = None
    segment: int = 0

    KINDS = ("honest", "delete", "stale", "bitflip", "skip_write", "refuse")

    @classmethod
    def parse(cls, text: str) -> "AdversaryMode":
        kind, _, rest = text.partition(":")
        if kind not in cls.KINDS:
            raise ValueError(f"unknown adversary mode {kind!r}")
        if kind == "delete":
            level, _, frac = rest.partition(":")
            lvl = level if level in ("C", "all") else int(level)
            return cls(kind, level=lvl, fraction=float(frac))
        if kind == "stale":
            return cls(kind, addr=Address.parse(rest))
        if kind == "bitflip":
            addr, _, seg = rest.rpartition(":")
            return cls(kind, addr=Address.parse(addr), segment=int(seg))
        return cls(kind)

    def __str__(self) -> str:
        if self.kind == "delete":
            return f"delete:{self.level}:{self.fraction}"
        if self.kind == "stale":
            return f"stale:{self.addr}"
        if self.kind == "bitflip":
            return f"bitflip:{self.addr}:{self.segment}"
        return self.kind


@dataclass
class ServerStore:
    u_blocks: list = field(default_factory=list)  # physical order
    u_tags: list = field(default_factory=list)
    order: list = field(default_factory=list)  # logical index -> physical slot
    merkle: MerkleTree = field(default_factory=MerkleTree)
    H: dict = field(default_factory=dict)  # level -> [X blocks, Y blocks]
    Htags: dict = field(default_factory=dict)  # level -> [X tags, Y tags]
    C: list = field(default_factory=lambda: [[], []])
    Ctags: list = field(default_factory=lambda: [[], []])
    W: int = 0
    statement: Optional[wire.CounterStatement] = None
    pending: frozenset = frozenset()
    retired: dict = field(default_factory=dict)  # merged-away tags, kept until store_tags


def _side(addr: Address) -> int:
    return 0 if addr.side == "X" else 1


class PORServer:
    def __init__(self, params: SystemParams, rng: Optional[random.Random] = None):
        self.params = params
        self.code = FFTCode.from_params(params)
        self.ops = BlockOps(params.q, params.m)
        self.store = ServerStore()
        self.mode = AdversaryMode()
        self.rng = rng or random.Random()
        self.lost: set[Address] = set()
        self.stale_copies: dict[Address, tuple[Block, AuthTag]] = {}

    # -- adversary --------------------------------------------------------

    def set_mode(self, mode: Union[AdversaryMode, str]) -> None:
        if isinstance(mode, str):
            mode = AdversaryMode.parse(mode)
        self.mode = mode
        self.lost = set()
        self.stale_copies = {}
        if mode.kind == "delete":
            self.lost = self._pick_lost(mode)

    def _pick_lost(self, mode: AdversaryMode) -> set[Address]:
        st = self.store
        groups = []
        if mode.level in ("all", "C"):
            groups.append(c_addresses(self.params.n))
        if mode.level == "all":
            groups.extend(level_addresses(l) for l in sorted(st.H))
        elif isinstance(mode.level, int):
            if mode.level not in st.H:
                raise ValueError(f"level {mode.level} is empty")
            groups.append(level_addresses(mode.level))
        lost = set()
        for group in groups:
            lost.update(self.rng.sample(group, math.ceil(mode.fraction * len(group))))
        return lost

    def _remember_stale(self, addrs) -> None:
        # freeze the first superseded version and replay it from then on
        target = self.mode.addr if self.mode.kind == "stale" else None
        if target is not None and target not in self.stale_copies and target in addrs and self.occupied(target):
            self.stale_copies[target] = (self._block(target), self._tag(target))

    # -- lookup ----------------------------------------------------------

    def occupied(self, addr: Address) -> bool:
        st = self.store
        if addr.structure == "U":
            return addr.slot < len(st.u_blocks)
        if addr.structure == "C":
            return addr.slot < len(st.C[_side(addr)])
        return addr.level in st.H

    def _block(self, addr: Address) -> Block:
        st = self.store
        if not self.occupied(addr):
            raise ProtocolError(f"address {addr} is not occupied")
        if addr.structure == "U":
            return st.u_blocks[addr.slot]
        if addr.structure == "C":
            return st.C[_side(addr)][addr.slot]
        return st.H[addr.level][_side(addr)][addr.slot]

    def _tag(self, addr: Address) -> AuthTag:
        st = self.store
        if not self.occupied(addr):
            raise ProtocolError(f"address {addr} is not occupied")
        if addr.structure == "U":
            tag = st.u_tags[addr.slot]
        elif addr.structure == "C":
            tag = st.Ctags[_side(addr)][addr.slot]
        else:
            tag = st.Htags[addr.level][_side(addr)][addr.slot]
        if tag is None:
            raise ProtocolError(f"tag at {addr} not yet stored")
        return tag

    def served_block(self, addr: Address) -> Block:
        """Block as this (possibly dishonest) server reports it."""
        if addr in self.lost:
            q = self.params.q
            return tuple(self.rng.randrange(q) for _ in range(self.params.m))
        if addr in self.stale_copies:
            return self.stale_copies[addr][0]
        block = self._block(addr)
        if self.mode.kind == "bitflip" and addr == self.mode.addr:
            seg = list(block)
            seg[self.mode.segment] = (seg[self.mode.segment] ^ 1) % self.params.q
            block = tuple(seg)
        return block

    def served_tag(self, addr: Address) -> AuthTag:
        if addr in self.stale_copies:
            return self.stale_copies[addr][1]
        if not self.occupied(addr) and addr in self.store.retired:
            return self.store.retired[addr]
        return self._tag(addr)

    # -- init -------------------------------------------------------------

    def handle_init(self, up: wire.InitUpload) -> wire.Info:
        n = self.params.n
        if len(up.u_blocks) != len(up.u_tags) or len(up.u_blocks) > n:
            raise ProtocolError("U upload has inconsistent shape")
        if len(up.c_blocks) != 2 * n or len(up.c_tags) != 2 * n:
            raise ProtocolError("C upload must carry 2n blocks and tags")
        st = ServerStore()
        st.u_blocks = list(up.u_blocks)
        st.u_tags = list(up.u_tags)
        st.order = list(range(len(up.u_blocks)))
        st.merkle = MerkleTree([t.to_bytes(self.params) for t in up.u_tags])
        st.C = [list(up.c_blocks[:n]), list(up.c_blocks[n:])]
        st.Ctags = [list(up.c_tags[:n]), list(up.c_tags[n:])]
        self.store = st
        return self.info()

    def info(self) -> wire.Info:
        st = self.store
        return wire.Info(st.W, len(st.order), st.merkle.root)

    # -- reads ------------------------------------------------------------

    def handle_read(self, i: int) -> wire.ReadProof:
        st = self.store
        if not 0 <= i < len(st.order):
            raise ProtocolError(f"logical index {i} out of range")
        phys = st.order[i]
        addr = Address("U", slot=phys)
        proof = st.merkle.prove(phys)
        tag = self.served_tag(addr)
        if addr in self.stale_copies:
            proof = type(proof)(tag.to_bytes(self.params), proof.path)
        return wire.ReadProof(self.served_block(addr), tag, proof)

    def handle_prove(self, indices) -> wire.ProofList:
        st = self.store
        try:
            return wire.ProofList(tuple(st.merkle.prove(i) for i in indices))
        except ValueError as exc:
            raise ProtocolError(str(exc)) from None

    # -- writes -----------------------------------------------------------

    def handle_write_u(self, req: wire.WriteRequest) -> bytes:
        st = self.store
        rec = req.record
        P = self.params
        if self.mode.kind == "skip_write":
            return st.merkle.root
        size = len(st.order)
        i = rec.logical_index
        if rec.updtype == "modify":
            if not 0 <= i < size or req.tag is None:
                raise ProtocolError("bad modify request")
            phys = st.order[i]
            self._remember_stale([Address("U", slot=phys)])
            st.u_blocks[phys] = data_block(P, rec.payload)
            st.u_tags[phys] = req.tag
            st.merkle.set(phys, req.tag.to_bytes(P))
        elif rec.updtype == "insert":
            if not 0 <= i <= size or size >= P.n or req.tag is None:
                raise ProtocolError("bad insert request")
            st.u_blocks.append(data_block(P, rec.payload))
            st.u_tags.append(req.tag)
            st.order.insert(i, size)
            st.merkle.append(req.tag.to_bytes(P))
        else:
            if not 0 <= i < size:
                raise ProtocolError("bad delete request")
            phys = st.order.pop(i)
            last = size - 1
            if phys != last:
                if req.moved_tag is None:
                    raise ProtocolError("delete needs the relocated tag")
                st.u_blocks[phys] = st.u_blocks[last]
                st.u_tags[phys] = req.moved_tag
                st.order[st.order.index(last)] = phys
            st.u_blocks.pop()
            st.u_tags.pop()
            st.merkle.swap_remove(phys)
            if phys != last:
                st.merkle.set(phys, req.moved_tag.to_bytes(P))
        return st.merkle.root

    def handle_block_rebuild(self, record_block: Block) -> wire.Transcript:
        st = self.store
        n = self.params.n
        w = st.W % n
        level = target_level(w, n)
        if level == self.params.k:
            # n-th write since the last rebuild of C: re-encode U, empty H
            touched = c_addresses(n) + [a for l in st.H for a in level_addresses(l)]
            self._remember_stale(touched)
            inputs = [st.u_blocks[p] for p in st.order]
            inputs += [zero_block(self.params)] * (n - len(inputs))
            X, Y = self.code.encode_full(self.ops, inputs)
            st.C = [X, Y]
            st.Ctags = [[None] * n, [None] * n]
            st.H.clear()
            st.Htags.clear()
            st.pending = frozenset(c_addresses(n))
            transcript = wire.Transcript("C", level, w)
        else:
            self._remember_stale([a for l in range(level) for a in level_addresses(l)])
            twisted = self.ops.smul(self.code.twist(w), record_block)
            lower = [st.H.pop(l) for l in range(level)]
            st.retired = {}
            for l in range(level):
                tx, ty = st.Htags.pop(l)
                st.retired.update(zip(level_addresses(l), tx + ty))
            X = self.code.rebuild_level(self.ops, [lv[0] for lv in lower], record_block, level)
            Y = self.code.rebuild_level(self.ops, [lv[1] for lv in lower], twisted, level)
            st.H[level] = [X, Y]
            st.Htags[level] = [[None] * len(X), [None] * len(Y)]
            st.pending = frozenset(level_addresses(level))
            transcript = wire.Transcript("H", level, w)
        st.W += 1
        return transcript

    def handle_write(self, req: wire.WriteRequest) -> wire.WriteResponse:
        if self.store.pending:
            raise ProtocolError("previous rebuild still awaits its tags")
        digest = self.handle_write_u(req)
        transcript = self.handle_block_rebuild(record_to_block(self.params, req.record))
        return wire.WriteResponse(digest, transcript)

    # -- tags -------------------------------------------------------------

    def serve_tags(self, addrs) -> wire.TagList:
        return wire.TagList(tuple(self.served_tag(a) for a in addrs))

    def store_tags(self, addrs, tags) -> wire.Ack:
        st = self.store
        if len(addrs) != len(tags):
            raise ProtocolError("address and tag counts differ")
        if frozenset(addrs) != st.pending or len(set(addrs)) != len(addrs):
            raise ProtocolError("stored tags do not match the pending rebuild")
        for a, t in zip(addrs, tags):
            if a.structure == "C":
                st.Ctags[_side(a)][a.slot] = t
            else:
                st.Htags[a.level][_side(a)][a.slot] = t
        st.pending = frozenset()
        st.retired = {}
        return wire.Ack()

    # -- audit ------------------------------------------------------------

    def handle_audit(self, challenge: wire.Challenge) -> wire.AuditProof:
        if self.mode.kind == "refuse":
            raise ProtocolError("server refuses to answer")
        q = self.params.q
        acc = [0] * self.params.m
        tags = []
        for nu, addr in challenge.entries:
            if addr.structure == "U":
                raise ProtocolError("U is not audited")
            block = self.served_block(addr)
            for s, b in enumerate(block):
                acc[s] = (acc[s] + nu * b) % q
            tags.append(self.served_tag(addr))
        return wire.AuditProof(tuple(acc), tuple(tags), self.store.W)

    # -- structural check ------------------------------------------------

    def validate(self) -> list[str]:
        st = self.store
        n = self.params.n
        out = []
        if sorted(st.order) != list(range(len(st.u_blocks))):
            out.append("position map is not a permutation of U")
        if len(st.u_tags) != len(st.u_blocks) or len(st.merkle) != len(st.u_blocks):
            out.append("U, U tags and Merkle leaves differ in length")
        if set(st.H) != set(st.Htags):
            out.append("H and H~ occupy different levels")
        if set(st.H) != {l for l in range(self.params.k) if (st.W % n) >> l & 1}:
            out.append("occupied levels disagree with the counter")
        for l, (X, Y) in st.H.items():
            tx, ty = st.Htags.get(l, ([], []))
            if not len(X) == len(Y) == len(tx) == len(ty) == 1 << l:
                out.append(f"level {l} has the wrong shape")
            if any(t is None for t in tx + ty):
                out.append(f"level {l} misses tags")
        for side in (0, 1):
            if len(st.C[side]) != n or len(st.Ctags[side]) != n:
                out.append("C or C~ has the wrong size")
            if any(t is None for t in st.Ctags[side]):
                out.append("C~ misses tags")
        return out

    # -- endpoint ---------------------------------------------------------

    def dispatch(self, msg):
        try:
            if isinstance(msg, wire.ReadRequest):
                return self.handle_read(msg.index)
            if isinstance(msg, wire.ProofRequest):
                return self.handle_prove(msg.indices)
            if isinstance(msg, wire.WriteRequest):
                return self.handle_write(msg)
            if isinstance(msg, wire.TagsRequest):
                return self.serve_tags(msg.addrs)
            if isinstance(msg, wire.StoreTags):
                return self.store_tags(msg.addrs, msg.tags)
            if isinstance(msg, wire.Challenge):
                return self.handle_audit(msg)
            if isinstance(msg, wire.CounterStatement):
                self.store.statement = msg
                return wire.Ack()
            if isinstance(msg, wire.GetStatement):
                if self.store.statement is None:
                    raise ProtocolError("no counter statement published")
                return self.store.statement
            if isinstance(msg, wire.InitUpload):
                return self.handle_init(msg)
            if isinstance(msg, wire.SetMode):
                self.set_mode(msg.spec)
                return wire.Ack()
            if isinstance(msg, wire.InfoRequest):
                return self.info()
        except (ProtocolError, ValueError, IndexError, KeyError) as exc:
            return wire.ErrorMsg(3, str(exc))
        return wire.ErrorMsg(1, f"unexpected {type(msg).__name__}")

    # -- persistence ------------------------------------------------------

    def save(self, path) -> None:
        state = (self.params, self.store, self.mode, self.lost, self.stale_copies, self.rng)
        with open(path, "wb") as fh:
            pickle.dump(state, fh)

    @classmethod
    def load(cls, path) -> "PORServer":
        with open(path, "rb") as fh:
            params, store, mode, lost, stale, rng = pickle.load(fh)
        srv = cls(params, rng)
        srv.store, srv.mode, srv.lost, srv.stale_copies = store, mode, lost, stale
        return srv
