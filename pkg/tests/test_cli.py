import json

import pytest

from hhpor.cli import main
from hhpor.params import load_params
from hhpor.server import PORServer
from hhpor.transport import background_server


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def ws(tmp_path, capsys):
    d = str(tmp_path / "ws")
    assert run(capsys, "keygen", "--dir", d, "--n", "16", "--seed", "1")[0] == 0
    data = tmp_path / "file.bin"
    data.write_bytes(bytes(range(100)))
    assert run(capsys, "init", "--dir", d, "--file", str(data))[0] == 0
    return d, tmp_path


def test_read_write_audit_extract(ws, capsys):
    d, tmp = ws
    code, out, _ = run(capsys, "read", "--dir", d, "--index", "0")
    assert code == 0 and bytes.fromhex(out.strip()) == bytes(range(100))[: len(bytes.fromhex(out.strip()))]
    (tmp / "new.bin").write_bytes(b"hello")
    assert run(capsys, "write", "--dir", d, "--insert", "0", "--data", str(tmp / "new.bin"))[0] == 0
    assert run(capsys, "write", "--dir", d, "--modify", "1", "--data", str(tmp / "new.bin"))[0] == 0
    assert run(capsys, "write", "--dir", d, "--delete", "1")[0] == 0
    code, out, _ = run(capsys, "audit", "--dir", d, "--seed", "3")
    assert code == 0 and json.loads(out)["ok"]
    out_file, rep = tmp / "out.bin", tmp / "rep.jsonl"
    code, out, _ = run(capsys, "extract", "--dir", d, "--out", str(out_file), "--report", str(rep))
    assert code == 0 and json.loads(out)["W"] == 3
    assert out_file.read_bytes().startswith(b"hello")
    assert all(json.loads(line)["ok"] for line in rep.read_text().splitlines())


def test_attack_makes_audit_exit_2(ws, capsys):
    d, _ = ws
    assert run(capsys, "attack", "--dir", d, "--mode", "delete:C:0.9")[0] == 0
    code, _, err = run(capsys, "audit", "--dir", d, "--per-level", "8", "--seed", "0")
    assert code == 2 and json.loads(err.strip().splitlines()[-1])["error"] == "verification"
    code, _, err = run(capsys, "extract", "--dir", d, "--seed", "0")
    assert code == 2


def test_usage_errors_exit_1(tmp_path, capsys):
    d = str(tmp_path / "none")
    assert run(capsys, "read", "--dir", d, "--index", "0")[0] == 1
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys, "keygen", "--dir", d, "--params", "nope")[0] == 1
    code, _, err = run(capsys, "keygen", "--dir", d, "--n", "12")
    assert code == 1 and json.loads(err.strip().splitlines()[-1])["error"] == "usage"


def test_bad_index_and_missing_data(ws, capsys):
    d, _ = ws
    assert run(capsys, "read", "--dir", d, "--index", "99")[0] == 1
    assert run(capsys, "write", "--dir", d, "--modify", "0")[0] == 1


def test_config_file_supplies_defaults(tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    d = tmp_path / "ws"
    cfg.write_text(f"dir={d}\nn=8\nseed=4\n")
    assert run(capsys, "keygen", "--config", str(cfg))[0] == 0
    assert load_params((d / "params.pub").read_text()).n == 8


def test_tcp_session(ws, capsys):
    d, tmp = ws
    params = load_params((tmp / "ws" / "params.pub").read_text())
    with background_server(PORServer(params)) as (host, port):
        addr = f"{host}:{port}"
        assert run(capsys, "init", "--dir", d, "--connect", addr)[0] == 0
        (tmp / "x.bin").write_bytes(b"xyz")
        assert run(capsys, "write", "--dir", d, "--connect", addr, "--insert", "0", "--data", str(tmp / "x.bin"))[0] == 0
        code, out, _ = run(capsys, "read", "--dir", d, "--connect", addr, "--index", "0")
        assert code == 0 and bytes.fromhex(out.strip()) == b"xyz"
        code, out, _ = run(capsys, "audit", "--dir", d, "--connect", addr)
        assert code == 0 and json.loads(out)["ok"]
    assert run(capsys, "audit", "--dir", d, "--connect", addr)[0] == 3


def test_bench_json(capsys):
    code, out, _ = run(capsys, "bench", "--n", "16", "--trials", "4", "--per-level", "2", "--json")
    assert code == 0
    (row,) = json.loads(out)
    assert row["n"] == 16 and row["audit"] > row["beta"]
