"""Command line front end.

State lives in a working directory (``--dir``): params.pub, secret.key,
client.state and, for the in-process server, server.snap.  With
``--connect host:port`` commands talk to a running ``serve`` instead.

Exit codes: 0 ok, 1 usage, 2 verification failure, 3 protocol error.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
from contextlib import contextmanager
from pathlib import Path

from . import wire
from .auditor import audit
from .bench import BenchConfig, format_table, run_bench
from .client import ClientState, PORClient, VerificationError
from .extractor import ExtractionFailure, channel_oracle, extract_all
from .params import (
    PROFILES,
    WriteRecord,
    dump_params,
    dump_secret,
    load_params,
    load_secret,
    parse_kv,
    setup_profile,
)
from .server import PORServer
from .transport import Channel, LoopbackTransport, RemoteError, TCPServer, TCPTransport

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_PROTOCOL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _fail("usage", message, EXIT_USAGE)


def _fail(kind: str, reason: str, code: int):
    print(json.dumps({"error": kind, "reason": reason}), file=sys.stderr)
    raise SystemExit(code)


def _apply_config(args) -> None:
    """Fill options left at None from a key=value config file."""
    if not args.config:
        return
    for key, value in parse_kv(Path(args.config).read_text()).items():
        key = key.replace("-", "_")
        if getattr(args, key, None) is None:
            setattr(args, key, value)


class Workspace:
    def __init__(self, root):
        self.root = Path(root)
        self.params_path = self.root / "params.pub"
        self.secret_path = self.root / "secret.key"
        self.state_path = self.root / "client.state"
        self.snap_path = self.root / "server.snap"

    def params(self):
        if not self.params_path.exists():
            raise UsageError(f"no parameters in {self.root}; run keygen first")
        return load_params(self.params_path.read_text())

    def secret(self):
        return load_secret(self.secret_path.read_text())

    def client_state(self, params):
        if not self.state_path.exists():
            raise UsageError("no client state; run init first")
        return ClientState.from_json(params, self.secret(), self.state_path.read_text())

    def save_state(self, state: ClientState) -> None:
        self.state_path.write_text(state.to_json() + "\n")


@contextmanager
def _session(args, ws: Workspace, params, fresh: bool = False):
    """Channel to the server: remote over TCP or a snapshot loaded in-process."""
    if args.connect:
        host, _, port = args.connect.rpartition(":")
        channel = Channel(params, TCPTransport(host or "127.0.0.1", int(port)))
        try:
            yield channel
        finally:
            channel.close()
        return
    if fresh:
        server = PORServer(params)
    elif ws.snap_path.exists():
        server = PORServer.load(ws.snap_path)
    else:
        raise UsageError("no server snapshot; run init first")
    try:
        yield Channel(params, LoopbackTransport(server))
    finally:
        server.save(ws.snap_path)


def _rng(args):
    return random.Random(int(args.seed)) if args.seed is not None else random.SystemRandom()


def cmd_keygen(args, ws):
    ws.root.mkdir(parents=True, exist_ok=True)
    profile = args.params or "toy"
    if profile not in PROFILES:
        raise UsageError(f"unknown profile {profile!r}")
    m = int(args.m) if args.m is not None else None
    params, secret = setup_profile(profile, int(args.n or 16), _rng(args), m=m)
    ws.params_path.write_text(dump_params(params))
    ws.secret_path.write_text(dump_secret(secret))
    ws.secret_path.chmod(0o600)
    print(f"fid={params.fid.hex()} n={params.n} m={params.m} q_bits={params.q.bit_length()}")


def cmd_init(args, ws):
    params = ws.params()
    data = Path(args.file).read_bytes() if args.file else b""
    with _session(args, ws, params, fresh=True) as ch:
        client = PORClient.init(params, ws.secret(), data, ch)
    ws.save_state(client.state)
    print(f"blocks={client.state.size} digest={client.state.digest.hex()}")


def cmd_read(args, ws):
    params = ws.params()
    state = ws.client_state(params)
    with _session(args, ws, params) as ch:
        payload = PORClient(state, ch).read(int(args.index))
    if args.out:
        Path(args.out).write_bytes(payload)
    else:
        sys.stdout.write(payload.hex() + "\n")


def cmd_write(args, ws):
    params = ws.params()
    state = ws.client_state(params)
    data = Path(args.data).read_bytes() if args.data else None
    if args.modify is not None:
        rec = WriteRecord("modify", args.modify, data)
    elif args.insert is not None:
        rec = WriteRecord("insert", args.insert, data)
    else:
        rec = WriteRecord("delete", args.delete)
    with _session(args, ws, params) as ch:
        client = PORClient(state, ch)
        stmt = client.write(rec)
    ws.save_state(client.state)
    print(f"W={stmt.W} digest={stmt.digest.hex()}")


def cmd_audit(args, ws):
    params = ws.params()
    with _session(args, ws, params) as ch:
        res = audit(params, ch, int(args.per_level), _rng(args))
    print(json.dumps({"ok": res.ok, "vacuous": res.vacuous, "entries": res.entries}))
    if not res.ok:
        _fail("verification", res.reason or "audit failed", EXIT_VERIFY)


def cmd_extract(args, ws):
    params = ws.params()
    with _session(args, ws, params) as ch:
        stmt = ch.call(wire.GetStatement(), wire.CounterStatement)
        try:
            rep = extract_all(params, channel_oracle(ch), stmt, _rng(args))
            failure = None
        except ExtractionFailure as exc:
            rep, failure = exc.report, exc
    if args.report and rep is not None:
        with open(args.report, "w") as fh:
            for lv in rep.levels:
                fh.write(json.dumps(lv.as_dict()) + "\n")
    if failure is not None:
        _fail("verification", str(failure), EXIT_VERIFY)
    if args.out:
        Path(args.out).write_bytes(rep.data)
    print(json.dumps({"W": rep.W, "blocks": len(rep.payloads), "bytes": len(rep.data)}))


def cmd_attack(args, ws):
    params = ws.params()
    with _session(args, ws, params) as ch:
        ch.call(wire.SetMode(args.mode), wire.Ack)
    print(f"mode={args.mode}")


def cmd_bench(args, ws):
    ns = tuple(int(x) for x in str(args.n or "64,4096").split(","))
    cfg = BenchConfig(
        ns=ns, c=int(args.per_level), trials=int(args.trials),
        profile=args.params or "toy", seed=int(args.seed or 0),
    )
    rows = run_bench(cfg)
    if args.json:
        print(json.dumps([r.as_dict() for r in rows]))
    else:
        print(format_table(rows))


def cmd_serve(args, ws):
    params = ws.params()
    server = PORServer.load(ws.snap_path) if ws.snap_path.exists() else PORServer(params)
    srv = TCPServer((args.host, int(args.port)), server, on_request=lambda: server.save(ws.snap_path))
    host, port = srv.server_address
    print(f"listening on {host}:{port}", flush=True)
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.server_close()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file supplying defaults")
    common.add_argument("--params", help="parameter profile (toy, paper)")
    common.add_argument("--dir", default=None, help="working directory (default .hhpor)")
    common.add_argument("--connect", default=None, help="host:port of a running server")
    common.add_argument("--seed", default=None, help="deterministic randomness")

    p = _Parser(prog="hhpor", description="dynamic proofs of retrievability")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("keygen", parents=[common], help="generate parameters and keys")
    s.add_argument("--n", default=None, help="capacity in blocks (power of two)")
    s.add_argument("--m", default=None, help="segments per block")

    s = sub.add_parser("init", parents=[common], help="upload a file")
    s.add_argument("--file")

    s = sub.add_parser("read", parents=[common], help="authenticated read")
    s.add_argument("--index", type=int, required=True)
    s.add_argument("--out")

    s = sub.add_parser("write", parents=[common], help="modify, insert or delete a block")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--modify", type=int, metavar="I")
    g.add_argument("--insert", type=int, metavar="I")
    g.add_argument("--delete", type=int, metavar="I")
    s.add_argument("--data", help="file holding the new block payload")

    s = sub.add_parser("audit", parents=[common], help="run one public audit")
    s.add_argument("--per-level", default=None, help="challenges per level (default 8)")

    s = sub.add_parser("extract", parents=[common], help="reconstruct the file from audits")
    s.add_argument("--out")
    s.add_argument("--report", help="JSON-lines per-level report")

    s = sub.add_parser("attack", parents=[common], help="set the server's adversary mode")
    s.add_argument("--mode", required=True)

    s = sub.add_parser("bench", parents=[common], help="measure bytes per operation")
    s.add_argument("--n", default=None, help="comma-separated capacities")
    s.add_argument("--per-level", default=None)
    s.add_argument("--trials", default=None)
    s.add_argument("--json", action="store_true")

    s = sub.add_parser("serve", parents=[common], help="run the TCP server")
    s.add_argument("--host", default=None)
    s.add_argument("--port", default=None)
    return p


_DEFAULTS = {"dir": ".hhpor", "per_level": "8", "trials": "32", "host": "127.0.0.1", "port": "7878"}

COMMANDS = {
    "keygen": cmd_keygen,
    "init": cmd_init,
    "read": cmd_read,
    "write": cmd_write,
    "audit": cmd_audit,
    "extract": cmd_extract,
    "attack": cmd_attack,
    "bench": cmd_bench,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_config(args)
        for key, value in _DEFAULTS.items():
            if getattr(args, key, None) is None and hasattr(args, key):
                setattr(args, key, value)
        if args.cmd == "write" and args.delete is None and not args.data:
            raise UsageError("modify and insert need --data")
        COMMANDS[args.cmd](args, Workspace(args.dir))
    except (UsageError, FileNotFoundError) as exc:
        _fail("usage", str(exc), EXIT_USAGE)
    except VerificationError as exc:
        _fail("verification", str(exc), EXIT_VERIFY)
    except (RemoteError, wire.WireError, OSError) as exc:
        _fail("protocol", str(exc), EXIT_PROTOCOL)
    except (ValueError, IndexError) as exc:
        _fail("usage", str(exc), EXIT_USAGE)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
