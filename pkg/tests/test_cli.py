from __future__ import annotations

import json
import os
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from actorvm import snapshot
from actorvm.cli import CliError, main, parse_block, parse_value, render_value
from actorvm.demo import LEDGER_ID

from .conftest import EMPTY_GENESIS_ROOT, LEDGER_GENESIS_ROOT, aid


def run(capsys, *argv: str) -> tuple[int, str, str]:
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def demo(tmp_path, capsys) -> Path:
    assert main(["demo", "--out", str(tmp_path / "demo")]) == 0
    capsys.readouterr()
    return tmp_path / "demo"


def balances(capsys, state: Path) -> dict[str, int]:
    code, out, _ = run(capsys, "inspect", "--state", str(state), "--actor", "0x" + LEDGER_ID.hex())
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("code_size ")
    result = {}
    for line in lines[1:]:
        k, v = line.split()
        result[bytes.fromhex(k[2:]).decode()] = int.from_bytes(bytes.fromhex(v[2:]), "big", signed=True)
    return result


def write_block(path: Path, extrinsics: list) -> Path:
    path.write_text(json.dumps({"extrinsics": extrinsics}))
    return path


def test_init_prints_golden_ledger_root(demo, capsys):
    out_path = demo / "s.enss"
    code, out, _ = run(capsys, "init", "--genesis", str(demo / "genesis.yaml"), "--out", str(out_path))
    assert code == 0 and out.strip() == "0x" + LEDGER_GENESIS_ROOT
    assert out_path.exists()
    assert run(capsys, "root", "--state", str(out_path))[1].strip() == "0x" + LEDGER_GENESIS_ROOT


def test_init_duplicate_id_fails_and_names_id(tmp_path, capsys):
    dup = "0x" + aid(1).hex()
    g = tmp_path / "g.yaml"
    g.write_text(f"kernel_actors:\n  - {{id: '{dup}', code: ''}}\n  - {{id: '{dup}', code: ''}}\n")
    code, _, err = run(capsys, "init", "--genesis", str(g), "--out", str(tmp_path / "s.enss"))
    assert code != 0 and aid(1).hex() in err
    assert not (tmp_path / "s.enss").exists()


def test_init_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "init", "--genesis", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "s.enss"))
    assert code != 0 and "nope.yaml" in err
    assert list(tmp_path.iterdir()) == []


def test_apply_to_absent_actor_is_exit_zero(demo, tmp_path, capsys):
    s = tmp_path / "s.enss"
    run(capsys, "init", "--genesis", str(demo / "genesis.yaml"), "--out", str(s))
    block = write_block(tmp_path / "b.json", [{"id_to": "0x" + aid("ghost").hex(), "function_call": "f", "parameters": []}])
    receipts = tmp_path / "r.json"
    code, out, _ = run(capsys, "apply", "--state", str(s), "--block", str(block), "--receipts", str(receipts))
    assert code == 0 and out.strip() == "0x" + LEDGER_GENESIS_ROOT
    (r,) = json.loads(receipts.read_text())["receipts"]
    assert r["disposition"] == "IgnoredNoActor" and r["fuel_used"] == 0


def test_apply_empty_block(demo, tmp_path, capsys):
    s = tmp_path / "s.enss"
    run(capsys, "init", "--genesis", str(demo / "genesis.yaml"), "--out", str(s))
    code, out, _ = run(capsys, "apply", "--state", str(s), "--block", str(write_block(tmp_path / "b.json", [])))
    assert code == 0 and out.strip() == "0x" + LEDGER_GENESIS_ROOT


def test_ledger_transfer_moves_balances(demo, tmp_path, capsys):
    s = tmp_path / "s.enss"
    run(capsys, "init", "--genesis", str(demo / "genesis.yaml"), "--out", str(s))
    code, out, _ = run(capsys, "apply", "--state", str(s), "--block", str(demo / "block1.json"))
    assert code == 0 and out.strip() != "0x" + LEDGER_GENESIS_ROOT
    assert balances(capsys, s) == {"A": 70, "B": 30, "C": 50}


def test_apply_bad_block_leaves_snapshot_untouched(demo, tmp_path, capsys):
    s = tmp_path / "s.enss"
    run(capsys, "init", "--genesis", str(demo / "genesis.yaml"), "--out", str(s))
    before = s.read_bytes()
    bad = tmp_path / "bad.json"
    bad.write_text('{"extrinsics": [{"id_to": "0x00"}]}')
    code, _, err = run(capsys, "apply", "--state", str(s), "--block", str(bad))
    assert code != 0 and "id_to" in err
    assert s.read_bytes() == before


def test_apply_limits_from_flags(tmp_path, capsys):
    me = "0x" + aid("loop").hex()
    g = tmp_path / "g.yaml"
    g.write_text(f"kernel_actors:\n  - id: '{me}'\n    code: |\n      func go\n        push {me}\n        push \"go\"\n        send 0\n")
    s = tmp_path / "s.enss"
    run(capsys, "init", "--genesis", str(g), "--out", str(s))
    block = write_block(tmp_path / "b.json", [{"id_to": me, "function_call": "go", "parameters": []}])
    r = tmp_path / "r.json"
    assert run(capsys, "apply", "--state", str(s), "--block", str(block), "--receipts", str(r), "--max-messages", "3")[0] == 0
    kinds = [x["disposition"] for x in json.loads(r.read_text())["receipts"]]
    assert kinds == ["Processed"] * 3 + ["DroppedBudget"]


def test_inspect_empty_genesis(tmp_path, capsys):
    g = tmp_path / "g.yaml"
    g.write_text("{}\n")
    s = tmp_path / "s.enss"
    assert run(capsys, "init", "--genesis", str(g), "--out", str(s))[1].strip() == "0x" + EMPTY_GENESIS_ROOT
    code, out, _ = run(capsys, "inspect", "--state", str(s))
    assert code == 0 and len(out.splitlines()) == 1


def test_inspect_key_and_absent(demo, tmp_path, capsys):
    s = tmp_path / "s.enss"
    run(capsys, "init", "--genesis", str(demo / "genesis.yaml"), "--out", str(s))
    ledger = "0x" + LEDGER_ID.hex()
    assert run(capsys, "inspect", "--state", str(s), "--actor", ledger, "--key", "0x41")[1].strip() == "0x0000000000000064"
    assert run(capsys, "inspect", "--state", str(s), "--actor", ledger, "--key", "0x5a") == (0, "absent\n", "")
    assert run(capsys, "inspect", "--state", str(s), "--actor", "0x" + aid(0).hex()) == (0, "absent\n", "")


def test_inspect_corrupt_snapshot(tmp_path, capsys):
    bad = tmp_path / "bad.enss"
    bad.write_bytes(b"ENSS\x01\x00")
    code, _, err = run(capsys, "inspect", "--state", str(bad))
    assert code != 0 and "truncated" in err


def test_asm_halt(tmp_path, capsys):
    f = tmp_path / "p.asm"
    f.write_text("func main\n  halt\n")
    assert run(capsys, "asm", str(f)) == (0, "0x454e534f0100000001000000046d61696e000000011c\n", "")


def test_asm_undefined_label(tmp_path, capsys):
    f = tmp_path / "p.asm"
    f.write_text("func main\n  jump far_away\n")
    code, _, err = run(capsys, "asm", str(f))
    assert code != 0 and "far_away" in err and "line 2" in err


def _run_sequence(demo: Path, work: Path, blocks: list[str], capsys) -> tuple[list[str], dict[str, int]]:
    s = work / "s.enss"
    roots = [run(capsys, "init", "--genesis", str(demo / "genesis.yaml"), "--out", str(s))[1].strip()]
    for b in blocks:
        code, out, _ = run(capsys, "apply", "--state", str(s), "--block", str(demo / b))
        assert code == 0
        roots.append(out.strip())
    return roots, balances(capsys, s)


def test_demo_upgrade_changes_transfer_logic(demo, tmp_path, capsys):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    plain_roots, plain = _run_sequence(demo, tmp_path / "a", ["block1.json", "block3.json"], capsys)
    up_roots, upgraded = _run_sequence(demo, tmp_path / "b", ["block1.json", "block2.json", "block3.json"], capsys)
    assert plain == {"A": 65, "B": 40, "C": 45}
    assert upgraded == {"A": 64, "B": 40, "C": 44, "fee-pool": 2}
    assert plain_roots[-1] != up_roots[-1]
    assert sum(plain.values()) == sum(upgraded.values()) == 150


def test_outputs_are_byte_stable(demo, tmp_path, capsys):
    runs = []
    for name in ("x", "y"):
        (tmp_path / name).mkdir()
        roots, _ = _run_sequence(demo, tmp_path / name, ["block1.json", "block2.json", "block3.json"], capsys)
        runs.append((roots, (tmp_path / name / "s.enss").read_bytes()))
    assert runs[0] == runs[1]


def test_save_failure_leaves_no_partial_file(tmp_path, monkeypatch):
    from actorvm import WorldState

    target = tmp_path / "s.enss"
    target.write_bytes(b"original")

    def boom(*a):
        raise OSError("disk full")

    monkeypatch.setattr(snapshot.os, "replace", boom)
    with pytest.raises(OSError):
        snapshot.save_snapshot(WorldState(), target)
    assert target.read_bytes() == b"original"
    assert [p.name for p in tmp_path.iterdir()] == ["s.enss"]


def test_module_entry_point(tmp_path):
    f = tmp_path / "p.asm"
    f.write_text("func main\n  halt\n")
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "actorvm", "asm", str(f)], capture_output=True, text=True, env=env)
    assert proc.returncode == 0 and proc.stdout.startswith("0x454e534f")


values = st.one_of(st.integers(-(2**63), 2**63 - 1), st.binary(max_size=64))


@given(values)
def test_json_value_round_trip(v):
    r = render_value(v)
    assert parse_value(r) == v
    if "bytes" in r:
        assert r["bytes"] == r["bytes"].lower() and len(r["bytes"]) % 2 == 0


@pytest.mark.parametrize(
    "obj",
    [{"int": "9223372036854775808"}, {"int": "x"}, {"bytes": "00"}, {"bytes": "0xzz"}, {"float": "1"}, {}, {"int": "1", "bytes": "0x"}],
)
def test_json_value_errors(obj):
    with pytest.raises(CliError):
        parse_value(obj)


def test_parse_block_function_call_forms():
    target = "0x" + aid(1).hex()
    b = parse_block({"extrinsics": [
        {"id_to": target, "function_call": "transfer", "parameters": [{"int": "5"}]},
        {"id_to": target, "function_call": "0x6869", "parameters": []},
    ]})  # fmt: skip
    assert [m.function_call for m in b.extrinsics] == [b"transfer", b"hi"]
    assert b.extrinsics[0].parameters == (5,)
    with pytest.raises(CliError):
        parse_block({"extrinsics": [{"id_to": target, "function_call": "f", "parameters": [{"int": "1"}] * 33}]})
