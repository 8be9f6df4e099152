"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` to see the verdicts
inline; they are also collected in the terminal summary.
"""
import dataclasses
import itertools
import json
import random
import subprocess
import sys
import textwrap
import time

import pytest

from hhpor import wire
from hhpor.auditor import audit, gen_challenge, verify_proof
from hhpor.bench import BenchConfig, run_bench
from hhpor.client import VerificationError
from hhpor.extractor import extract_all, server_oracle
from hhpor.fftcode import BlockOps, FFTCode, ScalarOps
from hhpor.hierlog import c_addresses, level_addresses
from hhpor.homhash import combine, hash_block, hash_block_secret
from hhpor.params import Address, dump_params, setup_profile
from hhpor.sigtag import AuthTag, make_tag
from conftest import System
from oracles import coherence_problems, det_mod, generator_closed_form, hash_direct

VERDICTS: list[str] = []


def verdict(num: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:>2} {title}: {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None and VERDICTS:
        reporter.write_sep("=", "acceptance criteria")
        for line in VERDICTS:
            reporter.write_line(line)


def rand_block(rng, P):
    return tuple(rng.randrange(P.q) for _ in range(P.m))


# 1 -------------------------------------------------------------------------


def test_c01_homomorphism():
    start = time.perf_counter()
    failures, checked = 0, []
    for name in ("toy", "paper"):
        P, S = setup_profile(name, 16, random.Random(101))
        rng = random.Random(102)
        for _ in range(1000):
            u, v = rand_block(rng, P), rand_block(rng, P)
            a, b = rng.randrange(P.q), rng.randrange(P.q)
            w = tuple((a * x + b * y) % P.q for x, y in zip(u, v))
            hu, hv, hw = hash_block(P, u), hash_block(P, v), hash_block(P, w)
            ok = hw == combine(P, hu, a, hv, b)
            ok &= all(hash_block_secret(P, S, z) == h for z, h in ((u, hu), (v, hv), (w, hw)))
            failures += not ok
        # product form against the builtin-pow oracle on a subsample
        ok = all(hash_direct(P.p, P.gens, z) == hash_block(P, z) for z in (rand_block(rng, P) for _ in range(20)))
        failures += not ok
        checked.append(f"{name} m={P.m}")
    elapsed = time.perf_counter() - start
    verdict(1, "homomorphism", failures == 0 and elapsed < 60,
            f"2x1000 samples ({', '.join(checked)}), {failures} failures, {elapsed:.1f}s (< 60s)")


# 2 -------------------------------------------------------------------------

P32, S32 = setup_profile("toy", 32, random.Random(232))
CODE32 = FFTCode.from_params(P32)


def test_c02_cascade_equals_generator_product():
    rng = random.Random(2)
    q, bad, total = P32.q, 0, 0
    for level in range(6):
        for _ in range(100):
            t0 = rng.randrange(0, 32, 1 << level)
            G = generator_closed_form(q, P32.omega, 32, level, t0)
            if CODE32.generator_matrix(level, t0) != G:
                bad += 1
            xs = [rng.randrange(q) for _ in range(1 << level)]
            X, Y = CODE32.encode_level(ScalarOps(q), xs, t0)
            expect = [sum(x * G[j][c] for j, x in enumerate(xs)) % q for c in range(2 << level)]
            bad += list(X) + list(Y) != expect
            total += 1
    verdict(2, "cascade = x.G_l", bad == 0, f"{total} inputs over l=0..5, {bad} mismatches")


# 3 -------------------------------------------------------------------------


def test_c03_mds():
    rng = random.Random(3)
    q, checks, singular = P32.q, 0, 0
    for level in range(6):
        size = 1 << level
        G = generator_closed_form(q, P32.omega, 32, level, 0)
        if level <= 3:
            subsets = itertools.combinations(range(2 * size), size)
        else:
            subsets = (sorted(rng.sample(range(2 * size), size)) for _ in range(500))
        for cols in subsets:
            checks += 1
            singular += det_mod([[G[r][c] for c in cols] for r in range(size)], q) == 0
    verdict(3, "MDS", singular == 0, f"{checks} square submatrices, {singular} singular")


# 4 -------------------------------------------------------------------------


def test_c04_erasure_roundtrip():
    rng = random.Random(4)
    ops = BlockOps(P32.q, P32.m)
    trials = bad = 0
    for level in range(6):
        size = 1 << level
        if level <= 2:
            keeps = list(itertools.combinations(range(2 * size), size))
        else:
            keeps = [rng.sample(range(2 * size), size) for _ in range(500)]
        if level <= 2:
            keeps = keeps + [rng.sample(range(2 * size), size) for _ in range(500)]
        for keep in keeps:
            t0 = rng.randrange(0, 32, size)
            inputs = [rand_block(rng, P32) for _ in range(size)]
            X, Y = CODE32.encode_level(ops, inputs, t0)
            word = list(X) + list(Y)
            trials += 1
            bad += CODE32.decode({i: word[i] for i in keep}, level, t0) != inputs
    verdict(4, "erasure round-trip", bad == 0, f"{trials} erase-half trials over l=0..5, {bad} mismatches")


# 5 -------------------------------------------------------------------------


def test_c05_honest_end_to_end(toy16):
    start = time.perf_counter()
    P, S = toy16
    rng = random.Random(5)
    sys_ = System(P, S, [rng.randbytes(P.payload_capacity) for _ in range(8)], seed=5)
    counts = {"read": 0, "write": 0, "audit": 0}
    problems = []
    for step in range(200):
        op = rng.choice(["read", "write", "audit"]) if sys_.ref else rng.choice(["write", "audit"])
        counts[op] += 1
        if op == "read":
            i = rng.randrange(len(sys_.ref))
            if sys_.client.read(i) != sys_.ref[i]:
                problems.append(f"step {step}: read {i} mismatch")
        elif op == "write":
            sys_.random_write()
        elif not audit(P, sys_.channel, 8, rng).ok:
            problems.append(f"step {step}: audit failed")
        bad = coherence_problems(sys_.server, P.p, P.gens)
        if bad:
            problems.append(f"step {step}: incoherent slots {bad[:3]}")
    elapsed = time.perf_counter() - start
    verdict(5, "honest run n=16", not problems and elapsed < 300,
            f"200 ops {counts}, W={sys_.statement.W}, {len(problems)} problems, {elapsed:.1f}s (< 300s)")


# 6 -------------------------------------------------------------------------


def _stale_trial(P, S, rng, seed):
    """Replay an old genuinely signed (block, tag) pair; True if caught."""
    sys_ = System(P, S, [rng.randbytes(P.payload_capacity) for _ in range(6)], seed=seed)
    srv = sys_.server
    kind = rng.choice("UHC")
    if kind == "U":
        i = rng.randrange(len(sys_.ref))
        slot = sys_.client.state.posmap[i][0]
        srv.set_mode(f"stale:U:{slot}")
        sys_.client.modify(i, b"fresh")
        assert Address("U", slot=slot) in srv.stale_copies
        try:
            sys_.client.read(i)
        except VerificationError:
            return True
        return False
    if kind == "C":
        addr = rng.choice(c_addresses(P.n))
    else:
        level = rng.randrange(P.k)
        addr = rng.choice(level_addresses(level))
    srv.set_mode(f"stale:{addr}")
    while not (addr in srv.stale_copies and srv.occupied(addr)):
        sys_.random_write()
    block, tag = srv.stale_copies[addr]
    assert hash_block(P, block) == tag.hash  # a consistent, once-valid pair
    stmt = sys_.statement
    ch = wire.Challenge(((rng.randrange(1, P.q), addr),), stmt.W, stmt)
    return verify_proof(P, ch, srv.handle_audit(ch)) == 0


def test_c06_stale_replay_detected(toy16):
    P, S = toy16
    rng = random.Random(6)
    caught = sum(_stale_trial(P, S, rng, seed) for seed in range(200))
    verdict(6, "freshness", caught == 200, f"stale replay detected in {caught}/200 trials")


# 7 -------------------------------------------------------------------------


def test_c07_detection_probability(toy64):
    P, S = toy64
    sys_ = System(P, S, [bytes([i]) for i in range(40)], seed=7)
    rng = random.Random(7)

    def pass_rate(c, trials):
        passed = 0
        for _ in range(trials):
            sys_.server.set_mode("delete:C:0.5")  # a fresh half of C each trial
            passed += audit(P, sys_.channel, c, rng).ok
        return passed / trials

    p8, p2, p4 = pass_rate(8, 1000), pass_rate(2, 1000), pass_rate(4, 1000)
    detect = 1 - p8
    squared = p2 * p2
    consistent = squared / 3 <= p4 <= squared * 3
    verdict(7, "detection", detect >= 0.99 and consistent,
            f"c=8 detection {detect:.3f} (>= 0.99); pass c=2 {p2:.3f}, c=4 {p4:.3f} vs c=2 squared {squared:.3f} (within 3x)")


# 8 -------------------------------------------------------------------------


def test_c08_extraction(toy64):
    start = time.perf_counter()
    P, S = toy64
    rng = random.Random(8)
    sys_ = System(P, S, [rng.randbytes(P.payload_capacity) for _ in range(40)], seed=8)
    for _ in range(P.n + 45):
        sys_.random_write()
    stmt = sys_.statement

    honest = extract_all(P, server_oracle(sys_.server), stmt, random.Random(81))
    budget_ok = all(lv.test_challenges + lv.solve_challenges <= lv.positions + 64 for lv in honest.levels)
    spent = {lv.name: lv.test_challenges + lv.solve_challenges for lv in honest.levels}

    sys_.server.set_mode("delete:all:0.49")
    attacked = extract_all(P, server_oracle(sys_.server), stmt, random.Random(82))
    exact = attacked.payloads == sys_.ref and honest.payloads == sys_.ref
    elapsed = time.perf_counter() - start
    verdict(8, "extraction", exact and budget_ok and elapsed < 600,
            f"W={stmt.W}, levels {[lv.name for lv in attacked.levels]}, 49% deleted: "
            f"{'bit-exact' if exact else 'MISMATCH'}; honest challenges per level {spent}; {elapsed:.1f}s (< 600s)")


# 9 -------------------------------------------------------------------------


def test_c09_bandwidth_trends():
    lo, hi = run_bench(BenchConfig(ns=(1 << 6, 1 << 12), c=8, trials=32, seed=0))
    gw = hi.residual_write / lo.residual_write
    ga = hi.residual_audit / lo.residual_audit
    ratio_lo = lo.residual_audit / lo.residual_write
    ratio_hi = hi.residual_audit / hi.residual_write
    per_entry = hi.residual_audit / hi.audit_entries
    Pp, Sp = setup_profile("paper", 4, random.Random(9))
    tag = make_tag(Pp, Sp, rand_block(random.Random(9), Pp), Address("C", None, "X", 0), 0)
    paper_tag = tag.body_size(Pp)  # hash + signature; wire framing adds length prefixes
    framed = len(tag.to_bytes(Pp))
    ok = (
        1.5 <= gw <= 2.5
        and 1.5 <= ga <= 2.5
        and abs(ratio_hi / ratio_lo - 1) <= 0.25
        and hi.tag_bytes <= per_entry <= 2 * hi.tag_bytes
        and paper_tag == 192
    )
    verdict(9, "bandwidth", ok,
            f"residual growth n=64->4096 write x{gw:.2f} audit x{ga:.2f} (2.0 +/- 0.5); "
            f"audit/write residual {ratio_lo:.2f} -> {ratio_hi:.2f}; "
            f"audit bytes per entry {per_entry:.0f} vs tag {hi.tag_bytes}; paper tag {paper_tag} B ({framed} B framed)")


# 10 ------------------------------------------------------------------------

PUBLIC_SCRIPT = textwrap.dedent(
    """
    import json, pickle, random, sys
    sys.modules["hhpor.client"] = None  # the secret-holding side cannot even be imported
    import hhpor.params, hhpor.sigtag, hhpor.homhash

    def forbidden(*a, **k):
        raise RuntimeError("secret path reached")

    class NoSecret:
        def __init__(self, *a, **k):
            forbidden()

    hhpor.params.SecretState = NoSecret
    hhpor.sigtag.sign_hash = hhpor.sigtag.make_tag = forbidden
    hhpor.homhash.hash_block_secret = forbidden

    from hhpor.auditor import audit
    from hhpor.extractor import extract_all, server_oracle
    from hhpor.params import load_params
    from hhpor.server import PORServer
    from hhpor.transport import Channel, LoopbackTransport

    workdir = sys.argv[1]
    params = load_params(open(workdir + "/params.pub").read())
    server = PORServer.load(workdir + "/server.snap")
    ch = Channel(params, LoopbackTransport(server))
    rng = random.Random(0)
    audits = [audit(params, ch, 8, rng).ok for _ in range(20)]
    rep = extract_all(params, server_oracle(server), server.store.statement, rng)
    print(json.dumps({"audits": audits, "payloads": [p.hex() for p in rep.payloads]}))
    """
)


def test_c10_publicness(toy16, tmp_path):
    P, S = toy16
    rng = random.Random(10)
    sys_ = System(P, S, [rng.randbytes(P.payload_capacity) for _ in range(6)], seed=10)
    for _ in range(11):
        sys_.random_write()
    (tmp_path / "params.pub").write_text(dump_params(P))
    sys_.server.save(tmp_path / "server.snap")
    proc = subprocess.run([sys.executable, "-c", PUBLIC_SCRIPT, str(tmp_path)],
                          capture_output=True, text=True, timeout=300)
    out = json.loads(proc.stdout) if proc.returncode == 0 else {"audits": [], "payloads": []}
    runs = proc.returncode == 0 and all(out["audits"]) and [bytes.fromhex(h) for h in out["payloads"]] == sys_.ref

    # negative test: the verifier's only key material is params.psk
    stmt = sys_.statement
    ch = gen_challenge(P, stmt, 4, random.Random(11))
    proof = sys_.server.handle_audit(ch)
    other, _ = setup_profile("toy", 16, random.Random(12))
    swapped = dataclasses.replace(P, psk=other.psk)
    forged_tag = AuthTag(proof.tags[0].hash, bytes(64))
    forged = wire.AuditProof(proof.bstar, (forged_tag,) + proof.tags[1:], proof.W)
    negative = (
        verify_proof(P, ch, proof) == 1
        and verify_proof(swapped, ch, proof) == 0
        and verify_proof(P, ch, forged) == 0
    )
    detail = "secret-free process audits and extracts" if runs else f"subprocess failed: {proc.stderr[-300:]}"
    verdict(10, "publicness", runs and negative,
            f"{detail}; verify_proof(params, challenge, proof) accepts with params.psk, rejects a foreign psk and a forged signature")

