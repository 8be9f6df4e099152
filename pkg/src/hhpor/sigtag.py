"""Authentication tags: a homomorphic hash bound to (fid, addr, epoch) by a signature."""
from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from typing import Protocol

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives import serialization

from .homhash import decode_hash, encode_hash, hash_block_secret
from .params import Address, Block, SecretState, SystemParams

_STRUCT_CODE = {"U": 0, "H": 1, "C": 2}
_SIDE_CODE = {"X": 0, "Y": 1, None: 0xFF}


class SignatureScheme(Protocol):
    name: str

    def keygen(self, rng: random.Random) -> tuple[bytes, bytes]: ...

    def sign(self, ssk: bytes, msg: bytes) -> bytes: ...

    def verify(self, psk: bytes, msg: bytes, sig: bytes) -> bool: ...


class Ed25519Scheme:
    """Deterministic EdDSA; 64-byte signatures (4 * 128 bits)."""

    name = "ed25519"
    sig_bytes = 64

    def keygen(self, rng):
        sk = Ed25519PrivateKey.from_private_bytes(rng.randbytes(32))
        ssk = sk.private_bytes(
            serialization.Encoding.Raw,
            serialization.PrivateFormat.Raw,
            serialization.NoEncryption(),
        )
        psk = sk.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )
        return psk, ssk

    def sign(self, ssk, msg):
        return Ed25519PrivateKey.from_private_bytes(ssk).sign(msg)

    def verify(self, psk, msg, sig):
        try:
            Ed25519PublicKey.from_public_bytes(psk).verify(sig, msg)
        except (InvalidSignature, ValueError):
            return False
        return True


_SCHEMES: dict[str, SignatureScheme] = {"ed25519": Ed25519Scheme()}


def get_scheme(name: str) -> SignatureScheme:
    try:
        return _SCHEMES[name]
    except KeyError:
        raise ValueError(f"unknown signature scheme {name!r}") from None


def register_scheme(scheme: SignatureScheme) -> None:
    _SCHEMES[scheme.name] = scheme


@dataclass(frozen=True)
class AuthTag:
    hash: int
    signature: bytes

    def body_size(self, params: SystemParams) -> int:
        """Bytes of hash plus signature, without wire length prefixes."""
        return params.hash_bytes + len(self.signature)

    def to_bytes(self, params: SystemParams) -> bytes:
        return encode_hash(params, self.hash) + struct.pack(">H", len(self.signature)) + self.signature

    @classmethod
    def from_bytes(cls, params: SystemParams, data: bytes, offset: int = 0) -> tuple["AuthTag", int]:
        h, pos = decode_hash(params, data, offset)
        if len(data) < pos + 2:
            raise ValueError("truncated tag")
        (slen,) = struct.unpack_from(">H", data, pos)
        pos += 2
        if len(data) < pos + slen:
            raise ValueError("truncated tag")
        return cls(h, bytes(data[pos : pos + slen])), pos + slen


def address_bytes(addr: Address) -> bytes:
    level = 0xFF if addr.level is None else addr.level
    return bytes((_STRUCT_CODE[addr.structure], level, _SIDE_CODE[addr.side])) + addr.slot.to_bytes(8, "big")


def canonical_message(params: SystemParams, h: int, fid: bytes, addr: Address, epoch: int) -> bytes:
    if len(fid) != 16:
        raise ValueError("fid must be 16 bytes")
    return encode_hash(params, h) + fid + address_bytes(addr) + epoch.to_bytes(8, "big")


def sign_hash(params: SystemParams, secret: SecretState, h: int, addr: Address, epoch: int) -> AuthTag:
    msg = canonical_message(params, h, params.fid, addr, epoch)
    return AuthTag(h, get_scheme(params.sig_scheme).sign(secret.ssk, msg))


def make_tag(params: SystemParams, secret: SecretState, block: Block, addr: Address, epoch: int) -> AuthTag:
    return sign_hash(params, secret, hash_block_secret(params, secret, block), addr, epoch)


def check_tag(params: SystemParams, tag, addr: Address, epoch: int) -> bool:
    try:
        if not isinstance(tag, AuthTag) or not 0 < tag.hash < params.p:
            return False
        msg = canonical_message(params, tag.hash, params.fid, addr, epoch)
        return get_scheme(params.sig_scheme).verify(params.psk, msg, tag.signature)
    except (ValueError, OverflowError, TypeError):
        return False
