"""Measured communication cost per operation.

Writes are amortized over one full cycle of n writes, so the periodic
rebuild of C and every level rebuild are counted at their true frequency.
Audits are sampled at random points of the same cycle.
"""
from __future__ import annotations

import random
from dataclasses import asdict, dataclass

from .auditor import audit
from .client import PORClient
from .params import setup_profile
from .server import PORServer
from .transport import Channel, LoopbackTransport


@dataclass(frozen=True)
class BenchConfig:
    ns: tuple[int, ...] = (1 << 6, 1 << 12)
    c: int = 8
    trials: int = 32
    profile: str = "toy"
    m: int | None = None
    seed: int = 0


@dataclass
class BenchRow:
    n: int
    beta: int  # bytes of one block on the wire
    tag_bytes: int
    label_bytes: int
    read: float
    write: float
    audit: float
    audit_entries: float

    @property
    def residual_read(self) -> float:
        return self.read - self.beta

    @property
    def residual_write(self) -> float:
        return self.write - self.beta

    @property
    def residual_audit(self) -> float:
        return self.audit - self.beta

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(
            residual_read=self.residual_read,
            residual_write=self.residual_write,
            residual_audit=self.residual_audit,
        )
        return d


def measure(n: int, cfg: BenchConfig) -> BenchRow:
    rng = random.Random(cfg.seed * 1_000_003 + n)
    params, secret = setup_profile(cfg.profile, n, rng, m=cfg.m)
    server = PORServer(params, random.Random(rng.random()))
    channel = Channel(params, LoopbackTransport(server))
    cap = params.payload_capacity
    client = PORClient.init(params, secret, [rng.randbytes(cap) for _ in range(n)], channel)
    meter = channel.meter
    beta = params.m * params.seg_bytes

    meter.reset()
    reads = max(1, cfg.trials)
    for _ in range(reads):
        client.read_block(rng.randrange(n))
    read_bytes = meter.total("read") / reads

    # one random point per stratum of the cycle, so level occupancy is fair
    T = min(n, max(1, cfg.trials))
    points = {rng.randrange(j * n // T, (j + 1) * n // T) for j in range(T)}
    audit_bytes = audit_entries = 0
    audits = 0
    write_bytes = 0
    for w in range(n):
        meter.reset()
        client.modify(rng.randrange(n), rng.randbytes(cap))
        write_bytes += meter.total() - meter.total("audit")
        if w in points:
            meter.reset()
            res = audit(params, channel, cfg.c, rng)
            if not res.ok:
                raise RuntimeError(f"honest audit failed at n={n}: {res.reason}")
            audit_bytes += meter.total("audit")
            audit_entries += res.entries
            audits += 1
    tag = server.store.u_tags[0]
    return BenchRow(
        n=n,
        beta=beta,
        tag_bytes=len(tag.to_bytes(params)),
        label_bytes=32,
        read=read_bytes,
        write=write_bytes / n,
        audit=audit_bytes / audits,
        audit_entries=audit_entries / audits,
    )


def run_bench(cfg: BenchConfig) -> list[BenchRow]:
    return [measure(n, cfg) for n in cfg.ns]


def format_table(rows: list[BenchRow]) -> str:
    head = f"{'n':>6} {'beta':>5} {'read':>9} {'write':>9} {'audit':>9} {'res_w':>9} {'res_a':>9} {'r':>6}"
    lines = [head]
    for r in rows:
        lines.append(
            f"{r.n:>6} {r.beta:>5} {r.read:>9.1f} {r.write:>9.1f} {r.audit:>9.1f} "
            f"{r.residual_write:>9.1f} {r.residual_audit:>9.1f} {r.audit_entries:>6.1f}"
        )
    if len(rows) >= 2:
        a, b = rows[0], rows[-1]
        lines.append(
            f"residual growth n={a.n}->{b.n}: write x{b.residual_write / a.residual_write:.2f}, "
            f"audit x{b.residual_audit / a.residual_audit:.2f}"
        )
    return "\n".join(lines)
