"""
Text assembler for actor programs.

    ; comments run to end of line
    func transfer            ; starts a function (name: bare word, "quoted" or 0xhex)
        push 0               ; int literal -> PUSH_INT
        push "from"          ; quoted string -> PUSH_BYTES (UTF-8)
        push 0x00ff          ; hex -> PUSH_BYTES
    again:                   ; label = index of the next instruction
        jump_if again
        halt

Mnemonics are case-insensitive and underscores are optional, so
``jump_if``, ``jumpif`` and ``JUMPIF`` are the same opcode. Labels are
local to their function; a label at the very end resolves to the
function length, i.e. the implicit halt.
"""

from __future__ import annotations

import ast
import re

from .program import Instruction, Op, Program, ProgramError

_TOKEN = re.compile(r'"(?:[^"\\]|\\.)*"|;.*|[^\s;"]+')
_LABEL = re.compile(r"^[A-Za-z_.$][\w.$-]*$")
_INT = re.compile(r"^[+-]?\d+$")

_MNEMONICS = {op.name.replace("_", "").lower(): op for op in Op}
_MNEMONICS.update({"btoi": Op.BYTES_TO_INT, "itob": Op.INT_TO_BYTES})
_COUNT_OPS = {Op.DUP, Op.SEND, Op.CREATE}


class AsmError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _tokens(line: str) -> list[str]:
    out = []
    for tok in _TOKEN.findall(line):
        if tok.startswith(";"):
            break
        out.append(tok)
    return out


def _parse_bytes(tok: str, lineno: int) -> bytes:
    if tok.startswith('"'):
        try:
            return ast.literal_eval(tok).encode("utf-8")
        except (ValueError, SyntaxError) as e:
            raise AsmError(lineno, f"bad string literal {tok}: {e}") from None
    if tok.lower().startswith("0x"):
        try:
            return bytes.fromhex(tok[2:])
        except ValueError:
            raise AsmError(lineno, f"bad hex literal {tok}") from None
    raise AsmError(lineno, f"expected bytes literal, got {tok!r}")


def _parse_name(tok: str, lineno: int) -> bytes:
    if tok.startswith('"') or tok.lower().startswith("0x"):
        return _parse_bytes(tok, lineno)
    return tok.encode("utf-8")


def assemble(source: str) -> Program:
    """Assemble source text into a Program, raising AsmError with a line number."""
    functions: dict[bytes, list[tuple[int, Op, object]]] = {}
    labels: dict[bytes, dict[str, int]] = {}
    current: bytes | None = None

    for lineno, line in enumerate(source.splitlines(), 1):
        toks = _tokens(line)
        while toks and toks[0].endswith(":") and not toks[0].startswith('"'):
            name = toks.pop(0)[:-1]
            if current is None:
                raise AsmError(lineno, f"label {name!r} outside a function")
            if not _LABEL.match(name):
                raise AsmError(lineno, f"invalid label name {name!r}")
            if name in labels[current]:
                raise AsmError(lineno, f"duplicate label {name!r}")
            labels[current][name] = len(functions[current])
        if not toks:
            continue
        head = toks[0].lower()
        if head in ("func", ".func"):
            if len(toks) != 2:
                raise AsmError(lineno, "func takes exactly one name")
            current = _parse_name(toks[1], lineno)
            if current in functions:
                raise AsmError(lineno, f"duplicate function {toks[1]}")
            functions[current] = []
            labels[current] = {}
            continue
        if current is None:
            raise AsmError(lineno, "instruction outside a function")
        mnemonic = head.replace("_", "")
        args = toks[1:]
        if mnemonic == "push":
            if len(args) != 1:
                raise AsmError(lineno, "push takes one operand")
            op = Op.PUSH_INT if _INT.match(args[0]) else Op.PUSH_BYTES
        elif mnemonic in _MNEMONICS:
            op = _MNEMONICS[mnemonic]
        else:
            raise AsmError(lineno, f"unknown mnemonic {toks[0]!r}")

        takes_arg = op in _COUNT_OPS or op in (Op.PUSH_INT, Op.PUSH_BYTES, Op.JUMP, Op.JUMP_IF)
        if len(args) != (1 if takes_arg else 0):
            raise AsmError(lineno, f"{op.name} takes {1 if takes_arg else 0} operand(s), got {len(args)}")

        arg: object = None
        if op is Op.PUSH_INT:
            if not _INT.match(args[0]):
                raise AsmError(lineno, f"expected integer, got {args[0]!r}")
            arg = int(args[0])
        elif op is Op.PUSH_BYTES:
            arg = _parse_bytes(args[0], lineno)
        elif op in _COUNT_OPS:
            if not _INT.match(args[0]):
                raise AsmError(lineno, f"expected count, got {args[0]!r}")
            arg = int(args[0])
        elif op in (Op.JUMP, Op.JUMP_IF):
            arg = args[0]
        functions[current].append((lineno, op, arg))

    resolved: dict[bytes, list[Instruction]] = {}
    for name, body in functions.items():
        out = []
        for lineno, op, arg in body:
            if op in (Op.JUMP, Op.JUMP_IF):
                tok = str(arg)
                if _INT.match(tok):
                    arg = int(tok)
                elif tok in labels[name]:
                    arg = labels[name][tok]
                else:
                    raise AsmError(lineno, f"undefined label {tok!r}")
                if not 0 <= arg <= len(body):
                    raise AsmError(lineno, f"jump target {tok} out of range")
            try:
                out.append(Instruction(op, arg))  # type: ignore[arg-type]
            except ProgramError as e:
                raise AsmError(lineno, str(e)) from None
        resolved[name] = out
    try:
        return Program(resolved)
    except ProgramError as e:
        raise AsmError(0, str(e)) from None


def _render_bytes(b: bytes) -> str:
    return "0x" + b.hex()


def disassemble(program: Program) -> str:
    """Render a Program as assembler source that assembles back to it."""
    lines = []
    for name, body in program.functions.items():
        lines.append(f"func {_render_bytes(name)}")
        targets = sorted({ins.arg for ins in body if ins.op in (Op.JUMP, Op.JUMP_IF)})
        names = {t: f"L{t}" for t in targets}
        for i, ins in enumerate(body):
            if i in names:
                lines.append(f"{names[i]}:")
            mnemonic = ins.op.name.lower()
            if ins.op is Op.PUSH_BYTES:
                lines.append(f"    {mnemonic} {_render_bytes(ins.arg)}")  # type: ignore[arg-type]
            elif ins.op in (Op.JUMP, Op.JUMP_IF):
                lines.append(f"    {mnemonic} {names[ins.arg]}")  # type: ignore[index]
            elif ins.arg is not None:
                lines.append(f"    {mnemonic} {ins.arg}")
            else:
                lines.append(f"    {mnemonic}")
        if len(body) in names:
            lines.append(f"{names[len(body)]}:")
    return "\n".join(lines) + "\n"
