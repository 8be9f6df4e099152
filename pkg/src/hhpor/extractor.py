"""Recover the latest file from any server that keeps passing audits.

For each occupied level and for C the extractor first finds the slots the
server answers correctly (group testing by halving), then challenges that
set J repeatedly with fresh coefficients until it holds |J| independent
accepted rows, solves for the blocks and erasure-decodes the level.  The
decoded write records are replayed, oldest first, over the decoded C.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import wire
from .auditor import check_statement, verify_proof
from .fftcode import DecodeError, FFTCode
from .hierlog import LogSchedule, c_addresses, codeword_position, level_addresses
from .homhash import hash_block
from .linalg import EchelonBasis, SingularMatrixError, solve_mod
from .params import Address, Block, SystemParams, block_to_record, data_payload

Oracle = Callable[[wire.Challenge], object]


class ExtractionFailure(RuntimeError):
    def __init__(self, message: str, report: Optional["ExtractionReport"] = None):
        super().__init__(message)
        self.report = report


@dataclass
class LevelReport:
    name: str
    positions: int
    good: int = 0
    test_challenges: int = 0
    solve_challenges: int = 0
    rank: int = 0
    ok: bool = False
    reason: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ExtractionReport:
    W: int
    levels: list = field(default_factory=list)
    payloads: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(lv.ok for lv in self.levels)

    @property
    def data(self) -> bytes:
        return b"".join(self.payloads)


def server_oracle(server) -> Oracle:
    """Rewindable access: the server state stays fixed during extraction."""
    return server.handle_audit


def channel_oracle(channel) -> Oracle:
    return lambda ch: channel.call(ch, wire.AuditProof)


def _ask(params, oracle: Oracle, stmt, entries) -> Optional[wire.AuditProof]:
    challenge = wire.Challenge(tuple(entries), stmt.W, stmt)
    try:
        proof = oracle(challenge)
    except Exception:
        return None
    return proof if verify_proof(params, challenge, proof) else None


def find_good(params, oracle: Oracle, stmt, addrs: Sequence[Address], rng, counter: list) -> list[Address]:
    """Addresses whose answers verify, found by recursive halving."""
    if not addrs:
        return []
    counter[0] += 1
    entries = [(rng.randrange(1, params.q), a) for a in addrs]
    if _ask(params, oracle, stmt, entries) is not None:
        return list(addrs)
    if len(addrs) == 1:
        return []
    mid = len(addrs) // 2
    return find_good(params, oracle, stmt, addrs[:mid], rng, counter) + find_good(
        params, oracle, stmt, addrs[mid:], rng, counter
    )


def extract_blocks(
    params: SystemParams,
    oracle: Oracle,
    stmt: wire.CounterStatement,
    J: Sequence[Address],
    rng: Optional[random.Random] = None,
    max_attempts: Optional[int] = None,
    report: Optional[LevelReport] = None,
) -> dict[Address, Block]:
    if not J:
        raise ValueError("J must not be empty")
    rng = rng or random.SystemRandom()
    max_attempts = len(J) + 64 if max_attempts is None else max_attempts
    q = params.q
    basis = EchelonBasis(q)
    rows, rhs, tags = [], [], None
    attempts = 0
    while len(rows) < len(J) and attempts < max_attempts:
        attempts += 1
        nus = [rng.randrange(1, q) for _ in J]
        proof = _ask(params, oracle, stmt, zip(nus, J))
        if proof is not None and basis.add(nus):
            rows.append(nus)
            rhs.append(proof.bstar)
            tags = proof.tags
    if report is not None:
        report.solve_challenges += attempts
        report.rank = len(rows)
    if len(rows) < len(J):
        raise ExtractionFailure(f"rank {len(rows)} of {len(J)} after {attempts} challenges")
    try:
        sol = solve_mod(rows, rhs, q)
    except SingularMatrixError as exc:  # pragma: no cover - rows are independent
        raise ExtractionFailure(str(exc)) from None
    blocks = {a: tuple(b) for a, b in zip(J, sol)}
    for a, t in zip(J, tags):
        if hash_block(params, blocks[a]) != t.hash:
            raise ExtractionFailure(f"extracted block at {a} does not match its tag")
    return blocks


def _extract_group(params, oracle, stmt, name, addrs, level, t0, rng, max_extra, report):
    rep = LevelReport(name, len(addrs))
    report.levels.append(rep)
    counter = [0]
    good = find_good(params, oracle, stmt, addrs, rng, counter)
    rep.test_challenges = counter[0]
    rep.good = len(good)
    size = 1 << level
    if len(good) < size:
        rep.reason = f"only {len(good)} of {len(addrs)} slots answer, need {size}"
        return None
    try:
        blocks = extract_blocks(params, oracle, stmt, good, rng, len(good) + max_extra, rep)
        known = {codeword_position(a, params.n): b for a, b in blocks.items()}
        inputs = FFTCode.from_params(params).decode(known, level, t0)
    except (ExtractionFailure, DecodeError) as exc:
        rep.reason = str(exc)
        return None
    rep.ok = True
    return inputs


def extract_all(
    params: SystemParams,
    oracle: Oracle,
    stmt: wire.CounterStatement,
    rng: Optional[random.Random] = None,
    max_extra: int = 64,
) -> ExtractionReport:
    """Reconstruct the logical file as of the statement's counter."""
    if not check_statement(params, stmt):
        raise ExtractionFailure("counter statement does not verify")
    rng = rng or random.SystemRandom()
    n = params.n
    sched = LogSchedule(n, stmt.W)
    report = ExtractionReport(stmt.W)

    base = _extract_group(params, oracle, stmt, "C", c_addresses(n), params.k, 0, rng, max_extra, report)
    timed = []
    for l in sorted(sched.occupied, reverse=True):
        start = sched.level_start(l)
        inputs = _extract_group(
            params, oracle, stmt, f"H{l}", level_addresses(l), l, start, rng, max_extra, report
        )
        if inputs is not None:
            timed.extend((start + j, blk) for j, blk in enumerate(inputs))
    if not report.ok:
        bad = ", ".join(lv.name for lv in report.levels if not lv.ok)
        raise ExtractionFailure(f"could not extract {bad}", report)

    payloads = []
    for blk in base:
        payload = data_payload(params, blk)
        if payload is None:
            break
        payloads.append(payload)
    for _, blk in sorted(timed, key=lambda x: x[0]):
        rec = block_to_record(params, blk)
        if rec.updtype == "modify":
            payloads[rec.logical_index] = rec.payload
        elif rec.updtype == "insert":
            payloads.insert(rec.logical_index, rec.payload)
        else:
            payloads.pop(rec.logical_index)
    report.payloads = payloads
    return report
