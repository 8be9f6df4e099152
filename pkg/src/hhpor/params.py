"""Parameter generation, block representation and epoch arithmetic.

All block arithmetic (erasure coding and audit combination) is carried out
per segment over Z_q.  The 2n-th root of unity used by the code therefore
lives in Z_q*, which is why ``q = 1 (mod 2n)`` is required on top of
``q | p - 1``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

import gmpy2

Block = tuple[int, ...]

STRUCTURES = ("U", "H", "C")
SIDES = ("X", "Y")
UPDTYPES = ("insert", "delete", "modify")


class SetupError(RuntimeError):
    pass


class EmptyLevelError(ValueError):
    pass


def powmod(base: int, exp: int, mod: int) -> int:
    return int(gmpy2.powmod(base, exp, mod))


def is_prime(x: int) -> bool:
    return bool(gmpy2.is_prime(x, 40))


def is_power_of_two(x: int) -> bool:
    return x >= 1 and x & (x - 1) == 0


@dataclass(frozen=True)
class SystemParams:
    """Public parameters of one outsourced file."""

    lam: int
    lambda_p: int
    lambda_q: int
    p: int
    q: int
    m: int
    gens: tuple[int, ...]
    omega: int
    n: int
    fid: bytes
    psk: bytes
    sig_scheme: str = "ed25519"

    @property
    def k(self) -> int:
        return self.n.bit_length() - 1

    @property
    def seg_bits(self) -> int:
        return self.lambda_q - 1

    @property
    def seg_bytes(self) -> int:
        return (self.q.bit_length() + 7) // 8

    @property
    def hash_bytes(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def block_capacity(self) -> int:
        """Bytes that fit into a full block of m segments."""
        return self.m * self.seg_bits // 8

    @property
    def payload_capacity(self) -> int:
        """Bytes of file data per block; segment 0 is reserved as a header."""
        return (self.m - 1) * self.seg_bits // 8

    def check(self) -> None:
        problems = validate(self)
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True)
class SecretState:
    ssk: bytes
    g: int
    gamma: tuple[int, ...]


@dataclass(frozen=True, order=True)
class Address:
    structure: str
    level: Optional[int] = None
    side: Optional[str] = None
    slot: int = 0

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"bad structure {self.structure!r}")
        if self.structure == "H":
            if self.level is None or self.level < 0 or self.side not in SIDES:
                raise ValueError("H address needs a level and a side")
            if not 0 <= self.slot < 1 << self.level:
                raise ValueError("H slot out of range for its level")
        elif self.structure == "C":
            if self.level is not None or self.side not in SIDES:
                raise ValueError("C address takes a side and no level")
        elif self.level is not None or self.side is not None:
            raise ValueError("U address takes neither level nor side")
        if self.slot < 0:
            raise ValueError("negative slot")

    def __str__(self) -> str:
        if self.structure == "U":
            return f"U:{self.slot}"
        if self.structure == "C":
            return f"C:{self.side}:{self.slot}"
        return f"H:{self.level}:{self.side}:{self.slot}"

    @classmethod
    def parse(cls, text: str) -> "Address":
        parts = text.split(":")
        if parts[0] == "U" and len(parts) == 2:
            return cls("U", slot=int(parts[1]))
        if parts[0] == "C" and len(parts) == 3:
            return cls("C", side=parts[1], slot=int(parts[2]))
        if parts[0] == "H" and len(parts) == 4:
            return cls("H", level=int(parts[1]), side=parts[2], slot=int(parts[3]))
        raise ValueError(f"cannot parse address {text!r}")


@dataclass(frozen=True)
class WriteRecord:
    updtype: str
    logical_index: int
    payload: Optional[bytes] = None

    def __post_init__(self):
        if self.updtype not in UPDTYPES:
            raise ValueError(f"unknown updtype {self.updtype!r}")
        if self.updtype == "delete" and self.payload is not None:
            raise ValueError("delete carries no payload")
        if self.updtype != "delete" and self.payload is None:
            raise ValueError(f"{self.updtype} needs a payload")
        if self.logical_index < 0:
            raise ValueError("negative index")


# Named profiles.  "paper" is the full-size 128-bit setting; m is free.
PROFILES = {
    "toy": dict(lam=16, lambda_p=64, lambda_q=33, m=4),
    "paper": dict(lam=128, lambda_p=1024, lambda_q=257, m=128),
}


def _random_bits(rng: random.Random, bits: int) -> int:
    return rng.getrandbits(bits) | (1 << (bits - 1))


def setup(
    lam: int,
    n: int,
    m: int,
    rng: Optional[random.Random] = None,
    lambda_q: Optional[int] = None,
    lambda_p: Optional[int] = None,
    sig_scheme: str = "ed25519",
    max_tries: int = 100_000,
) -> tuple[SystemParams, SecretState]:
    from .sigtag import get_scheme

    if not is_power_of_two(n):
        raise ValueError(f"n={n} is not a power of two")
    if m < 1:
        raise ValueError("m must be positive")
    if lam < 8:
        raise ValueError("lambda must be at least 8")
    rng = rng or random.SystemRandom()
    lambda_q = lambda_q or 2 * lam + 1
    lambda_p = lambda_p or 4 * lam
    two_n = 2 * n
    if lambda_q <= two_n.bit_length() + 1 or lambda_p <= lambda_q + 1:
        raise ValueError("bit lengths too small for this capacity")

    for _ in range(max_tries):
        q = _random_bits(rng, lambda_q - two_n.bit_length() + 1) * two_n + 1
        if q.bit_length() == lambda_q and is_prime(q):
            break
    else:
        raise SetupError("no prime q found within the retry bound")

    # even cofactors r with p = r*q + 1 of exactly lambda_p bits
    r_lo = -(-((1 << (lambda_p - 1)) - 1) // q)
    r_hi = ((1 << lambda_p) - 2) // q
    for _ in range(max_tries):
        p = (rng.randrange(r_lo, r_hi + 1) & ~1) * q + 1
        if p.bit_length() == lambda_p and is_prime(p):
            break
    else:
        raise SetupError("no prime p found within the retry bound")

    cofactor = (p - 1) // q
    for _ in range(max_tries):
        g = powmod(rng.randrange(2, p - 1), cofactor, p)
        if g != 1:
            break
    else:
        raise SetupError("no generator of G_q found")

    for _ in range(max_tries):
        omega = powmod(rng.randrange(2, q), (q - 1) // two_n, q)
        if powmod(omega, n, q) != 1:
            break
    else:
        raise SetupError("no root of unity of order 2n found")

    gamma = tuple(rng.randrange(1, q) for _ in range(m))
    gens = tuple(powmod(g, c, p) for c in gamma)
    psk, ssk = get_scheme(sig_scheme).keygen(rng)
    params = SystemParams(
        lam=lam,
        lambda_p=lambda_p,
        lambda_q=lambda_q,
        p=p,
        q=q,
        m=m,
        gens=gens,
        omega=omega,
        n=n,
        fid=rng.randbytes(16),
        psk=psk,
        sig_scheme=sig_scheme,
    )
    return params, SecretState(ssk=ssk, g=g, gamma=gamma)


def setup_profile(name: str, n: int, rng=None, m: Optional[int] = None, sig_scheme="ed25519"):
    prof = dict(PROFILES[name])
    if m is not None:
        prof["m"] = m
    return setup(
        prof["lam"], n, prof["m"], rng=rng, lambda_q=prof["lambda_q"],
        lambda_p=prof["lambda_p"], sig_scheme=sig_scheme,
    )


def validate(params: SystemParams, exhaustive: bool = False) -> list[str]:
    """Return the list of violated invariants (empty when params are sound)."""
    p, q, n = params.p, params.q, params.n
    out = []
    if not is_prime(p):
        out.append("p not prime")
    if not is_prime(q):
        out.append("q not prime")
    if (p - 1) % q:
        out.append("q does not divide p-1")
    if (q - 1) % (2 * n):
        out.append("q != 1 mod 2n")
    if not is_power_of_two(n):
        out.append("n not a power of two")
    if params.m < 1 or len(params.gens) != params.m:
        out.append("generator count differs from m")
    for i, g in enumerate(params.gens):
        if g == 1 or powmod(g, q, p) != 1:
            out.append(f"g_{i + 1} not in G_q")
    w = params.omega
    if powmod(w, 2 * n, q) != 1 or powmod(w, n, q) == 1:
        out.append("omega does not have order 2n")
    if exhaustive and any(powmod(w, j, q) == 1 for j in range(1, 2 * n)):
        out.append("omega has order below 2n")
    if len(params.fid) != 16:
        out.append("fid must be 16 bytes")
    return out


def secret_consistent(params: SystemParams, secret: SecretState) -> bool:
    return all(
        powmod(secret.g, c, params.p) == g for c, g in zip(secret.gamma, params.gens)
    ) and len(secret.gamma) == params.m


# -- blocks ---------------------------------------------------------------


def _pack(data: bytes, nseg: int, sbits: int) -> Block:
    cap = nseg * sbits // 8
    if len(data) > cap:
        raise ValueError(f"{len(data)} bytes exceed block capacity {cap}")
    acc = int.from_bytes(data.ljust(cap, b"\0"), "big") << (nseg * sbits - 8 * cap)
    mask = (1 << sbits) - 1
    return tuple((acc >> (sbits * (nseg - 1 - i))) & mask for i in range(nseg))


def _unpack(segments: Sequence[int], sbits: int) -> bytes:
    nseg = len(segments)
    cap = nseg * sbits // 8
    acc = 0
    for s in segments:
        if not 0 <= s < 1 << sbits:
            raise ValueError("segment does not carry payload bits")
        acc = (acc << sbits) | s
    return (acc >> (nseg * sbits - 8 * cap)).to_bytes(cap, "big")


def segment_block(params: SystemParams, data: bytes) -> Block:
    """Slice ``data`` MSB-first into m segments of lambda_q - 1 bits, zero padded."""
    return _pack(data, params.m, params.seg_bits)


def block_to_bytes(params: SystemParams, block: Block, length: Optional[int] = None) -> bytes:
    out = _unpack(block, params.seg_bits)
    return out if length is None else out[:length]


def zero_block(params: SystemParams) -> Block:
    return (0,) * params.m


def check_block(params: SystemParams, block: Sequence[int]) -> Block:
    if len(block) != params.m or any(not 0 <= s < params.q for s in block):
        raise ValueError("not a valid block")
    return tuple(block)


# Segment 0 of every stored block is a header.  In U (and C) it is
# 1 + payload length, 0 marking an empty capacity slot.  In H it packs the
# update type and logical index of the write record.


def data_block(params: SystemParams, payload: bytes) -> Block:
    if params.m < 2:
        raise ValueError("file blocks need m >= 2")
    return (1 + len(payload),) + _pack(payload, params.m - 1, params.seg_bits)


def data_payload(params: SystemParams, block: Block) -> Optional[bytes]:
    """Payload carried by a U block, or None for an empty slot."""
    if block[0] == 0:
        return None
    length = block[0] - 1
    if length > params.payload_capacity:
        raise ValueError("corrupt block header")
    return _unpack(block[1:], params.seg_bits)[:length]


def record_to_block(params: SystemParams, rec: WriteRecord) -> Block:
    code = UPDTYPES.index(rec.updtype)
    stride = params.payload_capacity + 1
    if rec.updtype == "delete":
        body: Block = (0,) * (params.m - 1)
        length = 0
    else:
        body = _pack(rec.payload, params.m - 1, params.seg_bits)
        length = len(rec.payload)
    header = 1 + length + stride * (code + 3 * rec.logical_index)
    if header >= params.q:
        raise ValueError("record header does not fit into a segment")
    return (header,) + body


def block_to_record(params: SystemParams, block: Block) -> WriteRecord:
    if block[0] == 0:
        raise ValueError("not a write record")
    stride = params.payload_capacity + 1
    length, rest = (block[0] - 1) % stride, (block[0] - 1) // stride
    code, index = rest % 3, rest // 3
    updtype = UPDTYPES[code]
    if updtype == "delete":
        return WriteRecord("delete", index)
    return WriteRecord(updtype, index, _unpack(block[1:], params.seg_bits)[:length])


def record_as_data_block(params: SystemParams, rec: WriteRecord) -> Block:
    return data_block(params, rec.payload)


# -- epochs ---------------------------------------------------------------


def epoch_of_level(w: int, level: int) -> int:
    """Counter value at which ``level`` was last filled, given local counter w."""
    if not (w >> level) & 1:
        raise EmptyLevelError(f"level {level} is empty at w={w}")
    return w & ~((1 << level) - 1)


# -- parameter files ------------------------------------------------------


def _hex(x: int) -> str:
    return format(x, "x")


def dump_params(params: SystemParams) -> str:
    lines = [
        f"lambda={params.lam}",
        f"lambda_p={params.lambda_p}",
        f"lambda_q={params.lambda_q}",
        f"p={_hex(params.p)}",
        f"q={_hex(params.q)}",
        f"m={params.m}",
        f"gens={','.join(_hex(g) for g in params.gens)}",
        f"omega={_hex(params.omega)}",
        f"n={params.n}",
        f"fid={params.fid.hex()}",
        f"psk={params.psk.hex()}",
        f"sig_scheme={params.sig_scheme}",
    ]
    return "\n".join(lines) + "\n"


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed line {raw!r}")
        out[key.strip()] = value.strip()
    return out


def load_params(text: str) -> SystemParams:
    kv = parse_kv(text)
    return SystemParams(
        lam=int(kv["lambda"]),
        lambda_p=int(kv["lambda_p"]),
        lambda_q=int(kv["lambda_q"]),
        p=int(kv["p"], 16),
        q=int(kv["q"], 16),
        m=int(kv["m"]),
        gens=tuple(int(g, 16) for g in kv["gens"].split(",")),
        omega=int(kv["omega"], 16),
        n=int(kv["n"]),
        fid=bytes.fromhex(kv["fid"]),
        psk=bytes.fromhex(kv["psk"]),
        sig_scheme=kv.get("sig_scheme", "ed25519"),
    )


def dump_secret(secret: SecretState) -> str:
    return (
        "# secret key material - keep private\n"
        f"ssk={secret.ssk.hex()}\n"
        f"g={_hex(secret.g)}\n"
        f"gamma={','.join(_hex(c) for c in secret.gamma)}\n"
    )


def load_secret(text: str) -> SecretState:
    kv = parse_kv(text)
    return SecretState(
        ssk=bytes.fromhex(kv["ssk"]),
        g=int(kv["g"], 16),
        gamma=tuple(int(c, 16) for c in kv["gamma"].split(",")),
    )
