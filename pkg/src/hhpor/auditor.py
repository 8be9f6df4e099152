"""Public verification: challenge generation and proof checking.

Everything here runs on SystemParams alone; no secret state is reachable.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from . import wire
from .hierlog import audit_addresses, slot_epoch
from .homhash import combine_many, hash_block
from .params import SystemParams
from .sigtag import check_tag, get_scheme


class StatementError(ValueError):
    pass


def check_statement(params: SystemParams, stmt: wire.CounterStatement) -> bool:
    return stmt.fid == params.fid and get_scheme(params.sig_scheme).verify(
        params.psk, stmt.message(), stmt.signature
    )


def gen_challenge(
    params: SystemParams,
    stmt: wire.CounterStatement,
    c: int,
    rng: Optional[random.Random] = None,
) -> wire.Challenge:
    if not check_statement(params, stmt):
        raise StatementError("counter statement does not verify")
    rng = rng or random.SystemRandom()
    addrs = audit_addresses(stmt.W % params.n, params.n, c, rng)
    entries = tuple((rng.randrange(1, params.q), a) for a in addrs)
    return wire.Challenge(entries, stmt.W, stmt)


def verify_proof(params: SystemParams, challenge: wire.Challenge, proof) -> int:
    """1 iff every tag is fresh and authentic and h(B*) matches the tag product."""
    stmt = challenge.statement
    if stmt is None or not check_statement(params, stmt) or stmt.W != challenge.W:
        return 0
    if not isinstance(proof, wire.AuditProof) or proof.W != stmt.W:
        return 0
    if len(proof.tags) != len(challenge.entries) or len(proof.bstar) != params.m:
        return 0
    if any(not 0 <= s < params.q for s in proof.bstar):
        return 0
    for (_, addr), tag in zip(challenge.entries, proof.tags):
        try:
            epoch = slot_epoch(addr, params.n, stmt.W)
        except ValueError:
            return 0
        if not check_tag(params, tag, addr, epoch):
            return 0
    hstar = combine_many(params, ((t.hash, nu) for (nu, _), t in zip(challenge.entries, proof.tags)))
    return int(hash_block(params, proof.bstar) == hstar)


@dataclass(frozen=True)
class AuditResult:
    ok: bool
    vacuous: bool
    entries: int
    reason: str = ""


def audit(params: SystemParams, channel, c: int, rng=None) -> AuditResult:
    """Fetch the latest statement, challenge, verify."""
    with channel.metering("audit"):
        stmt = channel.call(wire.GetStatement(), wire.CounterStatement)
        try:
            challenge = gen_challenge(params, stmt, c, rng)
        except StatementError as exc:
            return AuditResult(False, False, 0, str(exc))
        if not challenge.entries:
            return AuditResult(True, True, 0)
        try:
            proof = channel.call(challenge, wire.AuditProof)
        except Exception as exc:  # a refusing or broken server fails the audit
            return AuditResult(False, False, len(challenge.entries), f"no proof: {exc}")
    ok = bool(verify_proof(params, challenge, proof))
    return AuditResult(ok, False, len(challenge.entries), "" if ok else "proof rejected")
