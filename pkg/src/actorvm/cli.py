"""Command-line front end.

    actorvm init --genesis genesis.yaml --out state.enss
    actorvm apply --state state.enss --block block.json [--receipts out.json]
    actorvm root --state state.enss
    actorvm inspect --state state.enss [--actor 0x..] [--key 0x..]
    actorvm asm program.asm
    actorvm demo --out fixtures/

VM-level outcomes (ignored or trapped messages) are reported in receipts and
never change the exit code; only I/O, parse and genesis errors exit 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from .asm import AsmError, assemble
from .demo import write_demo
from .genesis import GenesisError, VmConfig, build_genesis, parse_genesis
from .program import ProgramError, encode_program
from .snapshot import SnapshotError, load_snapshot, save_snapshot, state_root
from .state import ID_LEN, INT_MAX, INT_MIN, Extrinsic, Internal, Message, Value, check_value
from .stf import Block, Receipt, apply_block


class CliError(Exception):
    pass


def hex0x(b: bytes) -> str:
    return "0x" + b.hex()


def parse_hex(s: Any, what: str) -> bytes:
    if not isinstance(s, str) or not s.startswith("0x"):
        raise CliError(f"{what}: expected 0x-prefixed hex, got {s!r}")
    try:
        return bytes.fromhex(s[2:])
    except ValueError:
        raise CliError(f"{what}: bad hex {s!r}") from None


def render_value(v: Value) -> dict[str, str]:
    if isinstance(v, int):
        return {"int": str(v)}
    return {"bytes": hex0x(v)}


def parse_value(obj: Any, what: str = "value") -> Value:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise CliError(f"{what}: expected an object with exactly one of 'int' or 'bytes'")
    ((kind, raw),) = obj.items()
    if kind == "int":
        if isinstance(raw, bool) or not isinstance(raw, (str, int)):
            raise CliError(f"{what}: int must be a decimal string")
        try:
            n = int(raw)
        except ValueError:
            raise CliError(f"{what}: bad integer {raw!r}") from None
        if not INT_MIN <= n <= INT_MAX:
            raise CliError(f"{what}: integer out of signed 64-bit range")
        return n
    if kind == "bytes":
        try:
            return check_value(parse_hex(raw, what))
        except ValueError as e:
            raise CliError(f"{what}: {e}") from None
    raise CliError(f"{what}: unknown value kind {kind!r}")


def parse_block(doc: Any) -> Block:
    if not isinstance(doc, dict) or not isinstance(doc.get("extrinsics"), list):
        raise CliError("block: expected an object with an 'extrinsics' list")
    msgs = []
    for i, ext in enumerate(doc["extrinsics"]):
        what = f"extrinsic {i}"
        if not isinstance(ext, dict):
            raise CliError(f"{what}: expected an object")
        target = parse_hex(ext.get("id_to"), f"{what} id_to")
        if len(target) != ID_LEN:
            raise CliError(f"{what}: id_to must be {ID_LEN} bytes")
        fn = ext.get("function_call")
        if not isinstance(fn, str):
            raise CliError(f"{what}: function_call must be a string")
        fname = parse_hex(fn, what) if fn.startswith("0x") else fn.encode("utf-8")
        params = ext.get("parameters", [])
        if not isinstance(params, list):
            raise CliError(f"{what}: parameters must be a list")
        values = tuple(parse_value(p, f"{what} parameter {j}") for j, p in enumerate(params))
        try:
            msgs.append(Message(target, fname, values, Extrinsic(i)))
        except ValueError as e:
            raise CliError(f"{what}: {e}") from None
    return Block(tuple(msgs))


def render_receipt(r: Receipt) -> dict[str, Any]:
    m = r.message
    origin: dict[str, Any]
    if isinstance(m.origin, Internal):
        origin = {"internal": hex0x(m.origin.sender)}
    else:
        origin = {"extrinsic": m.origin.block_index}
    return {
        "id_to": hex0x(m.id_to),
        "function_call": hex0x(m.function_call),
        "origin": origin,
        "disposition": r.disposition.value,
        "trap": None if r.trap is None else r.trap.value,
        "fuel_used": r.fuel_used,
        "messages_emitted": r.messages_emitted,
        "actors_created": r.actors_created,
    }


def _write_text_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None


def _load_state(path: str):
    try:
        return load_snapshot(path)
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None
    except SnapshotError as e:
        raise CliError(f"{path}: {e}") from None


def cmd_init(args: argparse.Namespace) -> int:
    try:
        doc = parse_genesis(_read_text(args.genesis))
        state = build_genesis(doc)
    except GenesisError as e:
        raise CliError(f"{args.genesis}: {e}") from None
    save_snapshot(state, args.out)
    print(hex0x(state_root(state)))
    return 0


def _config(args: argparse.Namespace) -> VmConfig:
    cfg = VmConfig()
    if args.genesis:
        try:
            cfg = parse_genesis(_read_text(args.genesis)).config
        except GenesisError as e:
            raise CliError(f"{args.genesis}: {e}") from None
    overrides = {
        k: v
        for k, v in (
            ("fuel_per_message", args.fuel),
            ("max_messages_per_block", args.max_messages),
            ("max_queue_len", args.max_queue),
        )
        if v is not None
    }
    try:
        return VmConfig(**{**cfg.__dict__, **overrides})
    except ValueError as e:
        raise CliError(str(e)) from None


def cmd_apply(args: argparse.Namespace) -> int:
    state = _load_state(args.state)
    try:
        block_doc = json.loads(_read_text(args.block))
    except json.JSONDecodeError as e:
        raise CliError(f"{args.block}: invalid JSON: {e}") from None
    block = parse_block(block_doc)
    new_state, receipts = apply_block(state, block, _config(args))
    save_snapshot(new_state, args.state)
    if args.receipts:
        doc = {"receipts": [render_receipt(r) for r in receipts]}
        _write_text_atomic(Path(args.receipts), json.dumps(doc, indent=2) + "\n")
    print(hex0x(state_root(new_state)))
    return 0


def cmd_root(args: argparse.Namespace) -> int:
    print(hex0x(state_root(_load_state(args.state))))
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    state = _load_state(args.state)
    if args.actor is None:
        if args.key is not None:
            raise CliError("--key requires --actor")
        for actor in state.actors():
            print(f"{hex0x(actor.id)} {len(actor.storage)}")
        return 0
    actor = state.get(parse_hex(args.actor, "--actor"))
    if actor is None:
        print("absent")
        return 0
    if args.key is not None:
        value = actor.storage.get(parse_hex(args.key, "--key"))
        print("absent" if value is None else hex0x(value))
        return 0
    print(f"code_size {len(actor.code)}")
    for key, value in actor.storage.items():
        print(f"{hex0x(key)} {hex0x(value)}")
    return 0


def cmd_asm(args: argparse.Namespace) -> int:
    try:
        blob = encode_program(assemble(_read_text(args.file)))
    except AsmError as e:
        raise CliError(f"{args.file}: {e}") from None
    except ProgramError as e:
        raise CliError(f"{args.file}: {e}") from None
    print(hex0x(blob))
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    for path in write_demo(args.out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="actorvm", description="Deterministic actor VM state transition tool")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="build the genesis state")
    p.add_argument("--genesis", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("apply", help="apply a block to a snapshot in place")
    p.add_argument("--state", required=True)
    p.add_argument("--block", required=True)
    p.add_argument("--receipts")
    p.add_argument("--genesis", help="take VM limits from this genesis document's config")
    p.add_argument("--fuel", type=int, help="fuel per message")
    p.add_argument("--max-messages", type=int, help="messages processed per block before dropping")
    p.add_argument("--max-queue", type=int, help="global queue length limit")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("root", help="print the state root")
    p.add_argument("--state", required=True)
    p.set_defaults(func=cmd_root)

    p = sub.add_parser("inspect", help="show actors or storage")
    p.add_argument("--state", required=True)
    p.add_argument("--actor")
    p.add_argument("--key")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("asm", help="assemble a program and print its code blob")
    p.add_argument("file")
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("demo", help="write the ledger demo fixtures")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
