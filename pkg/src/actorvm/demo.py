"""
Ledger demo fixtures.

A single kernel actor keeps balances in its own storage (account name ->
8-byte big-endian integer) and exposes ``transfer(from, to, amount)`` and
``upgrade(code)``. Block 2 of the demo calls ``upgrade`` with a new build
of the ledger whose transfers charge a fee, so the transfer rules change
through an ordinary extrinsic.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .asm import assemble
from .program import encode_program

LEDGER_ID = hashlib.sha256(b"demo/ledger").digest()
FEE_POOL = "fee-pool"
UPGRADE_FEE = 1
GENESIS_BALANCES = {"A": 100, "B": 50, "C": 0}
BLOCK1_TRANSFERS = [("A", "C", 30), ("B", "C", 20)]
BLOCK3_TRANSFERS = [("A", "B", 10), ("C", "A", 5)]


def _read_balance(key: str, tag: str) -> list[str]:
    # key -> balance on stack; missing entries count as 0
    return [
        f"    {key}",
        "    sget",
        f"    jump_if {tag}_have",
        "    pop",
        "    push 0",
        f"    jump {tag}_ready",
        f"{tag}_have:",
        "    btoi",
        f"{tag}_ready:",
    ]


def _credit(key: str, tag: str) -> list[str]:
    # amount on stack -> stored at key (added to current balance); consumes amount
    return _read_balance(key, tag) + [
        "    add",
        f"    {key}",
        "    swap",
        "    itob",
        "    sset",
    ]


def ledger_source(fee: int = 0) -> str:
    """Assembly for the ledger actor; ``fee`` is charged to the sender per transfer."""
    from_key = "push 0\n    param"
    to_key = "push 1\n    param"
    lines = [
        "; transfer(from: bytes, to: bytes, amount: int)",
        "; traps on a negative amount or insufficient funds",
        "func transfer",
        "    push 2",
        "    param",
        "    dup 0",
        "    push 0",
        "    lt",
        "    jump_if fail",
    ]
    if fee:
        lines += [f"    push {fee}", "    add"]
    # stack: total debit
    lines += _read_balance(from_key, "debit")
    lines += [
        "    dup 0",
        "    dup 2",
        "    lt",
        "    jump_if fail",
        "    dup 1",
        "    sub",
        f"    {from_key}",
        "    swap",
        "    itob",
        "    sset",
    ]
    if fee:
        lines += [f"    push {fee}", "    sub"]
    lines += _credit(to_key, "credit")
    if fee:
        lines += [f"    push {fee}"]
        lines += _credit(f'push "{FEE_POOL}"', "fee")
    lines += [
        "    halt",
        "fail:",
        "    trap",
        "",
        "; upgrade(code: bytes) replaces this actor's program",
        "func upgrade",
        "    push 0",
        "    param",
        "    set_code",
        "    halt",
    ]
    return "\n".join(lines) + "\n"


def ledger_genesis_yaml(balances: dict[str, int] | None = None) -> str:
    balances = GENESIS_BALANCES if balances is None else balances
    code = "\n".join("      " + line if line else "" for line in ledger_source().splitlines())
    storage = "\n".join(f'      - {{key: "{k}", value: {{int: {v}}}}}' for k, v in balances.items())
    return (
        "config:\n"
        "  fuel_per_message: 10000\n"
        "  max_messages_per_block: 100000\n"
        "  max_queue_len: 1000000\n"
        "templates: {}\n"
        "kernel_actors:\n"
        f'  - id: "0x{LEDGER_ID.hex()}"\n'
        "    code: |\n"
        f"{code}\n"
        "    storage:\n"
        f"{storage}\n"
        "user_actors: []\n"
    )


def _bytes_param(b: bytes) -> dict[str, str]:
    return {"bytes": "0x" + b.hex()}


def transfer_block(transfers: list[tuple[str, str, int]]) -> dict:
    return {
        "extrinsics": [
            {
                "id_to": "0x" + LEDGER_ID.hex(),
                "function_call": "transfer",
                "parameters": [_bytes_param(a.encode()), _bytes_param(b.encode()), {"int": str(n)}],
            }
            for a, b, n in transfers
        ]
    }


def upgrade_block(fee: int = UPGRADE_FEE) -> dict:
    blob = encode_program(assemble(ledger_source(fee)))
    return {
        "extrinsics": [
            {"id_to": "0x" + LEDGER_ID.hex(), "function_call": "upgrade", "parameters": [_bytes_param(blob)]}
        ]
    }


def write_demo(out_dir: str | Path) -> list[Path]:
    """Write genesis.yaml, block1..3.json and the v2 ledger source into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "genesis.yaml": ledger_genesis_yaml(),
        "block1.json": json.dumps(transfer_block(BLOCK1_TRANSFERS), indent=2) + "\n",
        "block2.json": json.dumps(upgrade_block(), indent=2) + "\n",
        "block3.json": json.dumps(transfer_block(BLOCK3_TRANSFERS), indent=2) + "\n",
        "ledger_v1.asm": ledger_source(),
        "ledger_v2.asm": ledger_source(UPGRADE_FEE),
    }
    written = []
    for name, text in files.items():
        p = out / name
        p.write_text(text, encoding="utf-8")
        written.append(p)
    return written
