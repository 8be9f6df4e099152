"""Protocol messages and their canonical byte encoding.

Frame: type (1 byte) | length (4 bytes, big endian) | payload.
Big integers are 2-byte-length-prefixed big-endian magnitudes; blocks are m
fixed-width segment fields.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

from .merkle import MerkleError, MerkleProof
from .params import Address, Block, SystemParams, WriteRecord, block_to_record, record_to_block
from .sigtag import AuthTag, address_bytes

FRAME_HEADER = 5


class WireError(ValueError):
    pass


class MsgType(IntEnum):
    ERROR = 0
    ACK = 1
    READ_REQ = 2
    READ_PROOF = 3
    PROOF_REQ = 4
    PROOF_LIST = 5
    WRITE_REQ = 6
    WRITE_RESP = 7
    TAGS_REQ = 8
    TAG_LIST = 9
    STORE_TAGS = 10
    CHALLENGE = 11
    AUDIT_PROOF = 12
    STATEMENT = 13
    GET_STATEMENT = 14
    INIT_UPLOAD = 15
    SET_MODE = 16
    INFO_REQ = 17
    INFO = 18


# messages whose payload carries data blocks
BLOCK_CARRYING = {MsgType.READ_PROOF, MsgType.WRITE_REQ, MsgType.AUDIT_PROOF, MsgType.INIT_UPLOAD}


@dataclass(frozen=True)
class ErrorMsg:
    code: int
    reason: str


@dataclass(frozen=True)
class Ack:
    pass


@dataclass(frozen=True)
class ReadRequest:
    index: int


@dataclass(frozen=True)
class ReadProof:
    block: Block
    tag: AuthTag
    proof: MerkleProof


@dataclass(frozen=True)
class ProofRequest:
    indices: tuple[int, ...]


@dataclass(frozen=True)
class ProofList:
    proofs: tuple[MerkleProof, ...]


@dataclass(frozen=True)
class WriteRequest:
    record: WriteRecord
    tag: Optional[AuthTag]
    moved_tag: Optional[AuthTag] = None


@dataclass(frozen=True)
class Transcript:
    """Which rebuild the server ran: kind 'H' (level, local write t) or 'C'."""

    kind: str
    level: int
    t: int


@dataclass(frozen=True)
class WriteResponse:
    digest: bytes
    transcript: Transcript


@dataclass(frozen=True)
class TagsRequest:
    addrs: tuple[Address, ...]


@dataclass(frozen=True)
class TagList:
    tags: tuple[AuthTag, ...]


@dataclass(frozen=True)
class StoreTags:
    addrs: tuple[Address, ...]
    tags: tuple[AuthTag, ...]


@dataclass(frozen=True)
class CounterStatement:
    fid: bytes
    W: int
    digest: bytes
    signature: bytes

    def message(self) -> bytes:
        return statement_message(self.fid, self.W, self.digest)


def statement_message(fid: bytes, W: int, digest: bytes) -> bytes:
    return b"CTR\x00" + fid + W.to_bytes(8, "big") + digest


@dataclass(frozen=True)
class Challenge:
    entries: tuple[tuple[int, Address], ...]
    W: int
    # held by the verifier only; never serialized
    statement: Optional[CounterStatement] = field(default=None, compare=False)


@dataclass(frozen=True)
class AuditProof:
    bstar: Block
    tags: tuple[AuthTag, ...]
    W: int


@dataclass(frozen=True)
class GetStatement:
    pass


@dataclass(frozen=True)
class InitUpload:
    u_blocks: tuple[Block, ...]
    u_tags: tuple[AuthTag, ...]
    c_blocks: tuple[Block, ...]  # X side then Y side
    c_tags: tuple[AuthTag, ...]


@dataclass(frozen=True)
class SetMode:
    spec: str


@dataclass(frozen=True)
class InfoRequest:
    pass


@dataclass(frozen=True)
class Info:
    W: int
    size: int
    digest: bytes


_TYPE_OF = {
    ErrorMsg: MsgType.ERROR,
    Ack: MsgType.ACK,
    ReadRequest: MsgType.READ_REQ,
    ReadProof: MsgType.READ_PROOF,
    ProofRequest: MsgType.PROOF_REQ,
    ProofList: MsgType.PROOF_LIST,
    WriteRequest: MsgType.WRITE_REQ,
    WriteResponse: MsgType.WRITE_RESP,
    TagsRequest: MsgType.TAGS_REQ,
    TagList: MsgType.TAG_LIST,
    StoreTags: MsgType.STORE_TAGS,
    Challenge: MsgType.CHALLENGE,
    AuditProof: MsgType.AUDIT_PROOF,
    CounterStatement: MsgType.STATEMENT,
    GetStatement: MsgType.GET_STATEMENT,
    InitUpload: MsgType.INIT_UPLOAD,
    SetMode: MsgType.SET_MODE,
    InfoRequest: MsgType.INFO_REQ,
    Info: MsgType.INFO,
}

_SIDES = {0: "X", 1: "Y", 0xFF: None}
_STRUCTS = {0: "U", 1: "H", 2: "C"}
_UPDCODES = {"insert": 0, "delete": 1, "modify": 2}


class Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, count: int) -> bytes:
        end = self.pos + count
        if count < 0 or end > len(self.data):
            raise WireError("truncated payload")
        out = bytes(self.data[self.pos : end])
        self.pos = end
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self.take(2), "big")

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def bigint(self) -> int:
        return int.from_bytes(self.take(self.u16()), "big")

    def blob(self) -> bytes:
        return self.take(self.u32())

    def done(self) -> None:
        if self.pos != len(self.data):
            raise WireError("trailing bytes in payload")


def _bigint(x: int) -> bytes:
    mag = x.to_bytes((x.bit_length() + 7) // 8, "big")
    return len(mag).to_bytes(2, "big") + mag


def _u32(x: int) -> bytes:
    return x.to_bytes(4, "big")


def _u64(x: int) -> bytes:
    return x.to_bytes(8, "big")


class Codec:
    def __init__(self, params: SystemParams):
        self.params = params
        self.seg_width = params.seg_bytes

    # -- primitives --
    def block(self, b: Block) -> bytes:
        if len(b) != self.params.m:
            raise WireError("block has wrong segment count")
        return b"".join(s.to_bytes(self.seg_width, "big") for s in b)

    def read_block(self, r: Reader) -> Block:
        w = self.seg_width
        raw = r.take(w * self.params.m)
        out = tuple(int.from_bytes(raw[i : i + w], "big") for i in range(0, len(raw), w))
        if any(s >= self.params.q for s in out):
            raise WireError("segment out of range")
        return out

    def tag(self, t: AuthTag) -> bytes:
        return t.to_bytes(self.params)

    def read_tag(self, r: Reader) -> AuthTag:
        h = r.bigint()
        sig = r.take(r.u16())
        return AuthTag(h, sig)

    def addr(self, a: Address) -> bytes:
        return address_bytes(a)

    def read_addr(self, r: Reader) -> Address:
        s, lvl, side = r.u8(), r.u8(), r.u8()
        slot = r.u64()
        if s not in _STRUCTS or side not in _SIDES:
            raise WireError("bad address")
        try:
            return Address(_STRUCTS[s], None if lvl == 0xFF else lvl, _SIDES[side], slot)
        except ValueError as exc:
            raise WireError(str(exc)) from None

    def proof(self, p: MerkleProof) -> bytes:
        return p.to_bytes()

    def read_proof(self, r: Reader) -> MerkleProof:
        try:
            proof, end = MerkleProof.from_bytes(r.data, r.pos)
        except MerkleError as exc:
            raise WireError(str(exc)) from None
        r.pos = end
        return proof

    def _list(self, items, enc) -> bytes:
        return _u32(len(items)) + b"".join(enc(x) for x in items)

    def _read_list(self, r: Reader, dec) -> tuple:
        count = r.u32()
        if count > len(r.data):
            raise WireError("implausible list length")
        return tuple(dec(r) for _ in range(count))

    # -- messages --
    def payload(self, msg) -> bytes:
        P = self.params
        if isinstance(msg, ErrorMsg):
            text = msg.reason.encode()
            return bytes((msg.code,)) + _u32(len(text)) + text
        if isinstance(msg, (Ack, GetStatement, InfoRequest)):
            return b""
        if isinstance(msg, ReadRequest):
            return _u64(msg.index)
        if isinstance(msg, ReadProof):
            return self.block(msg.block) + self.proof(msg.proof)
        if isinstance(msg, ProofRequest):
            return self._list(msg.indices, _u64)
        if isinstance(msg, ProofList):
            return self._list(msg.proofs, self.proof)
        if isinstance(msg, WriteRequest):
            out = self.block(record_to_block(P, msg.record))
            for t in (msg.tag, msg.moved_tag):
                out += b"\x00" if t is None else b"\x01" + self.tag(t)
            return out
        if isinstance(msg, WriteResponse):
            tr = msg.transcript
            return msg.digest + tr.kind.encode() + bytes((tr.level,)) + _u64(tr.t)
        if isinstance(msg, TagsRequest):
            return self._list(msg.addrs, self.addr)
        if isinstance(msg, TagList):
            return self._list(msg.tags, self.tag)
        if isinstance(msg, StoreTags):
            return self._list(msg.addrs, self.addr) + self._list(msg.tags, self.tag)
        if isinstance(msg, Challenge):
            return _u64(msg.W) + self._list(msg.entries, lambda e: _bigint(e[0]) + self.addr(e[1]))
        if isinstance(msg, AuditProof):
            return _u64(msg.W) + self.block(msg.bstar) + self._list(msg.tags, self.tag)
        if isinstance(msg, CounterStatement):
            return msg.fid + _u64(msg.W) + msg.digest + msg.signature
        if isinstance(msg, InitUpload):
            return (
                self._list(msg.u_blocks, self.block)
                + self._list(msg.u_tags, self.tag)
                + self._list(msg.c_blocks, self.block)
                + self._list(msg.c_tags, self.tag)
            )
        if isinstance(msg, SetMode):
            return msg.spec.encode()
        if isinstance(msg, Info):
            return _u64(msg.W) + _u64(msg.size) + msg.digest
        raise WireError(f"cannot encode {type(msg).__name__}")

    def encode(self, msg) -> bytes:
        body = self.payload(msg)
        return bytes((_TYPE_OF[type(msg)],)) + _u32(len(body)) + body

    def decode(self, frame: bytes):
        if len(frame) < FRAME_HEADER:
            raise WireError("truncated frame header")
        try:
            mtype = MsgType(frame[0])
        except ValueError:
            raise WireError(f"unknown frame type {frame[0]}") from None
        length = int.from_bytes(frame[1:5], "big")
        if len(frame) != FRAME_HEADER + length:
            raise WireError("frame length mismatch")
        r = Reader(frame[FRAME_HEADER:])
        try:
            msg = self._decode_payload(mtype, r)
        except (ValueError, IndexError, UnicodeDecodeError) as exc:
            if isinstance(exc, WireError):
                raise
            raise WireError(f"malformed {mtype.name}: {exc}") from None
        r.done()
        return msg

    def _decode_payload(self, mtype: MsgType, r: Reader):
        P = self.params
        if mtype == MsgType.ERROR:
            code = r.u8()
            return ErrorMsg(code, r.take(r.u32()).decode())
        if mtype == MsgType.ACK:
            return Ack()
        if mtype == MsgType.GET_STATEMENT:
            return GetStatement()
        if mtype == MsgType.INFO_REQ:
            return InfoRequest()
        if mtype == MsgType.READ_REQ:
            return ReadRequest(r.u64())
        if mtype == MsgType.READ_PROOF:
            block = self.read_block(r)
            proof = self.read_proof(r)
            tag, end = AuthTag.from_bytes(P, proof.leaf)
            if end != len(proof.leaf):
                raise WireError("leaf is not a tag")
            return ReadProof(block, tag, proof)
        if mtype == MsgType.PROOF_REQ:
            return ProofRequest(self._read_list(r, Reader.u64))
        if mtype == MsgType.PROOF_LIST:
            return ProofList(self._read_list(r, self.read_proof))
        if mtype == MsgType.WRITE_REQ:
            record = block_to_record(P, self.read_block(r))
            tags = []
            for _ in range(2):
                flag = r.u8()
                if flag not in (0, 1):
                    raise WireError("bad optional flag")
                tags.append(self.read_tag(r) if flag else None)
            return WriteRequest(record, tags[0], tags[1])
        if mtype == MsgType.WRITE_RESP:
            digest = r.take(32)
            kind = r.take(1).decode()
            if kind not in ("H", "C"):
                raise WireError("bad transcript kind")
            return WriteResponse(digest, Transcript(kind, r.u8(), r.u64()))
        if mtype == MsgType.TAGS_REQ:
            return TagsRequest(self._read_list(r, self.read_addr))
        if mtype == MsgType.TAG_LIST:
            return TagList(self._read_list(r, self.read_tag))
        if mtype == MsgType.STORE_TAGS:
            return StoreTags(self._read_list(r, self.read_addr), self._read_list(r, self.read_tag))
        if mtype == MsgType.CHALLENGE:
            W = r.u64()
            return Challenge(self._read_list(r, lambda rr: (rr.bigint(), self.read_addr(rr))), W)
        if mtype == MsgType.AUDIT_PROOF:
            W = r.u64()
            return AuditProof(self.read_block(r), self._read_list(r, self.read_tag), W)
        if mtype == MsgType.STATEMENT:
            fid = r.take(16)
            W = r.u64()
            digest = r.take(32)
            return CounterStatement(fid, W, digest, r.take(len(r.data) - r.pos))
        if mtype == MsgType.INIT_UPLOAD:
            return InitUpload(
                self._read_list(r, self.read_block),
                self._read_list(r, self.read_tag),
                self._read_list(r, self.read_block),
                self._read_list(r, self.read_tag),
            )
        if mtype == MsgType.SET_MODE:
            return SetMode(r.take(len(r.data) - r.pos).decode())
        if mtype == MsgType.INFO:
            return Info(r.u64(), r.u64(), r.take(32))
        raise WireError(f"no decoder for {mtype.name}")  # pragma: no cover


def frame_type(frame: bytes) -> MsgType:
    return MsgType(frame[0])
