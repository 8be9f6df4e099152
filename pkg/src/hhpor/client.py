"""The data owner.

Keeps the Merkle root, the global write counter and a position map; never
stores file blocks.  After each write it replays the server's rebuild on tags
only, in hash space, and re-signs the results at their new epochs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from . import wire
from .fftcode import BlockOps, FFTCode, HashOps
from .hierlog import c_addresses, level_addresses, slot_epoch, target_level
from .homhash import hash_block_secret
from .merkle import EMPTY_ROOT, MerkleError, MerkleProof, predict_root, root_of, verify
from .params import (
    Address,
    Block,
    SecretState,
    SystemParams,
    WriteRecord,
    data_block,
    data_payload,
    record_to_block,
)
from .sigtag import AuthTag, check_tag, get_scheme, sign_hash


class VerificationError(RuntimeError):
    """The server's answer failed a check; the client aborts."""


@dataclass
class ClientState:
    params: SystemParams
    secret: SecretState
    digest: bytes = EMPTY_ROOT
    W: int = 0
    # logical index -> (physical slot, epoch of its tag)
    posmap: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.posmap)

    def to_json(self) -> str:
        return json.dumps(
            {
                "warning": "plaintext client state; keep alongside the secret key",
                "digest": self.digest.hex(),
                "W": self.W,
                "posmap": self.posmap,
            }
        )

    @classmethod
    def from_json(cls, params, secret, text: str) -> "ClientState":
        d = json.loads(text)
        return cls(params, secret, bytes.fromhex(d["digest"]), d["W"], [tuple(x) for x in d["posmap"]])


def split_file(params: SystemParams, data: bytes) -> list[bytes]:
    cap = params.payload_capacity
    chunks = [data[i : i + cap] for i in range(0, len(data), cap)]
    if len(chunks) > params.n:
        raise ValueError(f"file needs {len(chunks)} blocks, capacity is {params.n}")
    return chunks


def _sign_many(params, secret, hashes, addrs, epoch) -> tuple[AuthTag, ...]:
    return tuple(sign_hash(params, secret, h, a, epoch) for h, a in zip(hashes, addrs))


def build_init(params: SystemParams, secret: SecretState, payloads: Sequence[bytes]):
    """Client state and upload for a file given as block payloads."""
    n = params.n
    if len(payloads) > n:
        raise ValueError(f"{len(payloads)} blocks exceed capacity {n}")
    code = FFTCode.from_params(params)
    u_blocks = [data_block(params, b) for b in payloads]
    u_hashes = [hash_block_secret(params, secret, b) for b in u_blocks]
    u_tags = _sign_many(params, secret, u_hashes, [Address("U", slot=i) for i in range(len(u_blocks))], 0)
    pad = n - len(u_blocks)
    X, Y = code.encode_full(BlockOps(params.q, params.m), u_blocks + [(0,) * params.m] * pad)
    hX, hY = code.encode_full(HashOps(params.p, params.q), u_hashes + [1] * pad)
    c_tags = _sign_many(params, secret, hX + hY, c_addresses(n), 0)
    state = ClientState(
        params,
        secret,
        root_of([t.to_bytes(params) for t in u_tags]) if u_tags else EMPTY_ROOT,
        0,
        [(i, 0) for i in range(len(u_blocks))],
    )
    upload = wire.InitUpload(tuple(u_blocks), u_tags, tuple(X + Y), c_tags)
    return state, upload


def sign_statement(state: ClientState) -> wire.CounterStatement:
    P = state.params
    msg = wire.statement_message(P.fid, state.W, state.digest)
    sig = get_scheme(P.sig_scheme).sign(state.secret.ssk, msg)
    return wire.CounterStatement(P.fid, state.W, state.digest, sig)


class PORClient:
    def __init__(self, state: ClientState, channel):
        self.state = state
        self.channel = channel
        self.code = FFTCode.from_params(state.params)
        self.hops = HashOps(state.params.p, state.params.q)

    @property
    def params(self) -> SystemParams:
        return self.state.params

    # -- init --------------------------------------------------------------

    @classmethod
    def init(cls, params, secret, data: bytes | Sequence[bytes], channel) -> "PORClient":
        payloads = split_file(params, data) if isinstance(data, (bytes, bytearray)) else list(data)
        state, upload = build_init(params, secret, payloads)
        client = cls(state, channel)
        with channel.metering("init"):
            info = channel.call(upload, wire.Info)
        if info.digest != state.digest or info.size != state.size:
            raise VerificationError("server disagrees with the uploaded tree")
        client.publish_counter()
        return client

    # -- read --------------------------------------------------------------

    def _check_leaf(self, proof: MerkleProof, phys: int, epoch: int) -> AuthTag:
        P = self.params
        try:
            tag, end = AuthTag.from_bytes(P, proof.leaf)
        except ValueError:
            raise VerificationError("leaf is not a tag") from None
        if end != len(proof.leaf) or not check_tag(P, tag, Address("U", slot=phys), epoch):
            raise VerificationError(f"tag at U:{phys} fails at epoch {epoch}")
        return tag

    def read_block(self, i: int) -> Block:
        st = self.state
        if not 0 <= i < st.size:
            raise IndexError(f"logical index {i} out of range")
        phys, epoch = st.posmap[i]
        with self.channel.metering("read"):
            resp = self.channel.call(wire.ReadRequest(i), wire.ReadProof)
        if not verify(st.digest, phys, resp.proof):
            raise VerificationError(f"Merkle proof for block {i} does not verify")
        tag = self._check_leaf(resp.proof, phys, epoch)
        if hash_block_secret(self.params, st.secret, resp.block) != tag.hash:
            raise VerificationError(f"block {i} does not match its tag")
        return resp.block

    def read(self, i: int) -> bytes:
        payload = data_payload(self.params, self.read_block(i))
        if payload is None:
            raise VerificationError("authenticated block is empty")
        return payload

    # -- write -------------------------------------------------------------

    def write(self, record: WriteRecord) -> wire.CounterStatement:
        st = self.state
        P = self.params
        size = st.size
        i = record.logical_index
        W1 = st.W + 1
        if record.updtype == "insert":
            if i > size or size >= P.n:
                raise ValueError("insert index out of range or file full")
        elif i >= size:
            raise ValueError(f"logical index {i} out of range")

        need = set()
        if record.updtype != "insert":
            need.add(st.posmap[i][0])
        if record.updtype != "modify" and size:
            need.add(size - 1)
        proofs: dict[int, MerkleProof] = {}
        if need:
            with self.channel.metering("write"):
                plist = self.channel.call(wire.ProofRequest(tuple(sorted(need))), wire.ProofList)
            if len(plist.proofs) != len(need):
                raise VerificationError("wrong number of proofs")
            proofs = dict(zip(sorted(need), plist.proofs))
        epoch_of = {ph: ep for ph, ep in st.posmap}
        leaf_tags = {ph: self._check_leaf(pr, ph, epoch_of[ph]) for ph, pr in proofs.items()}

        new_tag = moved_tag = None
        changes: dict[int, bytes] = {}
        posmap = list(st.posmap)
        if record.updtype == "modify":
            phys = posmap[i][0]
            new_tag = self._sign_u(data_block(P, record.payload), phys, W1)
            changes[phys] = new_tag.to_bytes(P)
            posmap[i] = (phys, W1)
            new_size = size
        elif record.updtype == "insert":
            new_tag = self._sign_u(data_block(P, record.payload), size, W1)
            changes[size] = new_tag.to_bytes(P)
            posmap.insert(i, (size, W1))
            new_size = size + 1
        else:
            phys = posmap.pop(i)[0]
            last = size - 1
            if phys != last:
                moved_tag = sign_hash(P, st.secret, leaf_tags[last].hash, Address("U", slot=phys), W1)
                changes[phys] = moved_tag.to_bytes(P)
                j = next(k for k, (ph, _) in enumerate(posmap) if ph == last)
                posmap[j] = (phys, W1)
            new_size = last
        try:
            expected = predict_root(st.digest, size, proofs, changes, new_size)
        except MerkleError as exc:
            raise VerificationError(f"cannot predict new root: {exc}") from None

        with self.channel.metering("write"):
            resp = self.channel.call(wire.WriteRequest(record, new_tag, moved_tag), wire.WriteResponse)
        if resp.digest != expected:
            raise VerificationError("server root differs from the predicted root")
        st.digest = expected
        st.posmap = posmap

        with self.channel.metering("rebuild-tags"):
            self._rebuild_tags(resp.transcript, record)
        st.W = W1
        return self.publish_counter()

    def _sign_u(self, block: Block, phys: int, epoch: int) -> AuthTag:
        P = self.params
        return sign_hash(P, self.state.secret, hash_block_secret(P, self.state.secret, block), Address("U", slot=phys), epoch)

    def _fetch_verified(self, addrs: Sequence[Address], epochs: Sequence[int]) -> list[int]:
        if not addrs:
            return []
        tl = self.channel.call(wire.TagsRequest(tuple(addrs)), wire.TagList)
        if len(tl.tags) != len(addrs):
            raise VerificationError("wrong number of tags")
        for a, e, t in zip(addrs, epochs, tl.tags):
            if not check_tag(self.params, t, a, e):
                raise VerificationError(f"tag at {a} fails at epoch {e}")
        return [t.hash for t in tl.tags]

    def _rebuild_tags(self, transcript: wire.Transcript, record: WriteRecord) -> None:
        st = self.state
        P = self.params
        n, W = P.n, st.W
        w = W % n
        level = target_level(w, n)
        kind = "C" if level == P.k else "H"
        if (transcript.kind, transcript.level, transcript.t) != (kind, level, w):
            raise VerificationError("unexpected rebuild transcript")
        if kind == "C":
            addrs = [Address("U", slot=ph) for ph, _ in st.posmap]
            hashes = self._fetch_verified(addrs, [ep for _, ep in st.posmap])
            hashes += [1] * (n - len(hashes))
            X, Y = self.code.encode_full(self.hops, hashes)
            targets = c_addresses(n)
        else:
            lower = []
            for l in range(level):
                addrs = level_addresses(l)
                hs = self._fetch_verified(addrs, [slot_epoch(a, n, W) for a in addrs])
                lower.append((hs[: 1 << l], hs[1 << l :]))
            h = hash_block_secret(P, st.secret, record_to_block(P, record))
            X = self.code.rebuild_level(self.hops, [x for x, _ in lower], h, level)
            Y = self.code.rebuild_level(
                self.hops, [y for _, y in lower], self.hops.smul(self.code.twist(w), h), level
            )
            targets = level_addresses(level)
        tags = _sign_many(P, st.secret, X + Y, targets, W + 1)
        self.channel.call(wire.StoreTags(tuple(targets), tags), wire.Ack)

    # -- counter -----------------------------------------------------------

    def publish_counter(self) -> wire.CounterStatement:
        stmt = sign_statement(self.state)
        with self.channel.metering("other"):
            self.channel.call(stmt, wire.Ack)
        return stmt

    # convenience wrappers
    def modify(self, i: int, payload: bytes):
        return self.write(WriteRecord("modify", i, payload))

    def insert(self, i: int, payload: bytes):
        return self.write(WriteRecord("insert", i, payload))

    def delete(self, i: int):
        return self.write(WriteRecord("delete", i))


def state_size(state: ClientState) -> int:
    """Bytes of mutable client state, excluding public parameters."""
    return len(state.to_json()) + len(state.secret.ssk) + sum(
        (c.bit_length() + 7) // 8 for c in state.secret.gamma
    )
