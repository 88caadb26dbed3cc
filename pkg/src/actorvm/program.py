"""
Instruction set and the canonical CodeBlob encoding.

Blob layout (all integers big-endian)::

    b"ENSO" | 0x01 | u32 function count
    per function, names strictly ascending:
        u32 name length | name | u32 instruction count
        per instruction: opcode byte | operands

Operands: PUSH_INT carries 8 bytes two's complement, PUSH_BYTES a u32
length plus the bytes, DUP/JUMP/JUMP_IF/SEND/CREATE a u32.
"""

from __future__ import annotations

import struct
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from enum import IntEnum
from typing import Union

from .state import INT_MAX, INT_MIN, MAX_FUNCTION_NAME, MAX_PARAMS

MAGIC = b"ENSO"
VERSION = 0x01
MAX_PUSH_BYTES = 1024
MAX_FUNCTION_LEN = 65536
MAX_BLOB = 262144
MAX_DUP_DEPTH = 15


class Op(IntEnum):
    PUSH_INT = 0x00
    PUSH_BYTES = 0x01
    POP = 0x02
    DUP = 0x03
    SWAP = 0x04
    ADD = 0x05
    SUB = 0x06
    MUL = 0x07
    DIV = 0x08
    EQ = 0x09
    LT = 0x0A
    NOT = 0x0B
    CONCAT = 0x0C
    LEN = 0x0D
    SLICE = 0x0E
    JUMP = 0x0F
    JUMP_IF = 0x10
    PARAM_COUNT = 0x11
    PARAM = 0x12
    SELF_ID = 0x13
    SGET = 0x14
    SSET = 0x15
    SDEL = 0x16
    XGET = 0x17
    SEND = 0x18
    CREATE = 0x19
    SET_ID = 0x1A
    SET_CODE = 0x1B
    HALT = 0x1C
    TRAP = 0x1D
    # int <-> 8-byte big-endian conversions, needed to keep numbers in storage
    BYTES_TO_INT = 0x1E
    INT_TO_BYTES = 0x1F


JUMPS = frozenset({Op.JUMP, Op.JUMP_IF})
_U32_OPERAND = {Op.DUP: MAX_DUP_DEPTH, Op.JUMP: None, Op.JUMP_IF: None, Op.SEND: MAX_PARAMS, Op.CREATE: MAX_PARAMS}

Arg = Union[int, bytes, None]


class ProgramError(ValueError):
    """A program violates a structural limit."""


class DecodeError(ProgramError):
    """A byte string is not a canonical CodeBlob."""


@dataclass(frozen=True)
class Instruction:
    op: Op
    arg: Arg = None

    def __post_init__(self) -> None:
        op = Op(self.op)
        object.__setattr__(self, "op", op)
        arg = self.arg
        if op is Op.PUSH_INT:
            if isinstance(arg, bool) or not isinstance(arg, int) or not INT_MIN <= arg <= INT_MAX:
                raise ProgramError(f"PUSH_INT needs a signed 64-bit integer, got {arg!r}")
        elif op is Op.PUSH_BYTES:
            if not isinstance(arg, bytes) or len(arg) > MAX_PUSH_BYTES:
                raise ProgramError(f"PUSH_BYTES needs at most {MAX_PUSH_BYTES} bytes")
        elif op in _U32_OPERAND:
            limit = _U32_OPERAND[op]
            if isinstance(arg, bool) or not isinstance(arg, int) or arg < 0 or arg > 0xFFFFFFFF:
                raise ProgramError(f"{op.name} needs an unsigned operand, got {arg!r}")
            if limit is not None and arg > limit:
                raise ProgramError(f"{op.name} operand {arg} exceeds {limit}")
        elif arg is not None:
            raise ProgramError(f"{op.name} takes no operand")

    def __repr__(self) -> str:
        if self.arg is None:
            return self.op.name
        return f"{self.op.name} {self.arg!r}"


def _check_function(name: bytes, body: tuple[Instruction, ...]) -> None:
    if not isinstance(name, bytes) or not 1 <= len(name) <= MAX_FUNCTION_NAME:
        raise ProgramError(f"function name must be 1..{MAX_FUNCTION_NAME} bytes")
    if len(body) > MAX_FUNCTION_LEN:
        raise ProgramError(f"function {name!r} has more than {MAX_FUNCTION_LEN} instructions")
    for i, ins in enumerate(body):
        if not isinstance(ins, Instruction):
            raise ProgramError(f"function {name!r} entry {i} is not an Instruction")
        # target == len(body) is a jump to the implicit halt at the end
        if ins.op in JUMPS and ins.arg > len(body):  # type: ignore[operator]
            raise ProgramError(f"jump target {ins.arg} out of range in function {name!r} at {i}")


class Program:
    """Named functions, each a flat instruction list, kept sorted by name."""

    __slots__ = ("functions",)

    def __init__(self, functions: Mapping[bytes, Iterable[Instruction]] | Iterable[tuple[bytes, Iterable[Instruction]]] = ()):
        items = functions.items() if isinstance(functions, Mapping) else functions
        funcs: dict[bytes, tuple[Instruction, ...]] = {}
        for name, body in items:
            body = tuple(body)
            _check_function(name, body)
            funcs[name] = body
        self.functions: dict[bytes, tuple[Instruction, ...]] = {k: funcs[k] for k in sorted(funcs)}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Program):
            return NotImplemented
        return self.functions == other.functions

    def __hash__(self) -> int:
        return hash(tuple(self.functions.items()))

    def __contains__(self, name: object) -> bool:
        return name in self.functions

    def __getitem__(self, name: bytes) -> tuple[Instruction, ...]:
        return self.functions[name]

    def __repr__(self) -> str:
        return f"Program({self.functions!r})"


EMPTY_PROGRAM = Program()


def _encode_instruction(ins: Instruction, out: list[bytes]) -> None:
    out.append(bytes((ins.op,)))
    if ins.op is Op.PUSH_INT:
        out.append(struct.pack(">q", ins.arg))
    elif ins.op is Op.PUSH_BYTES:
        out.append(struct.pack(">I", len(ins.arg)))  # type: ignore[arg-type]
        out.append(ins.arg)  # type: ignore[arg-type]
    elif ins.op in _U32_OPERAND:
        out.append(struct.pack(">I", ins.arg))


def encode_program(p: Program) -> bytes:
    out = [MAGIC, bytes((VERSION,)), struct.pack(">I", len(p.functions))]
    for name, body in p.functions.items():
        out.append(struct.pack(">I", len(name)))
        out.append(name)
        out.append(struct.pack(">I", len(body)))
        for ins in body:
            _encode_instruction(ins, out)
    blob = b"".join(out)
    if len(blob) > MAX_BLOB:
        raise ProgramError(f"encoded program is {len(blob)} bytes, limit {MAX_BLOB}")
    return blob


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise DecodeError(f"truncated blob at offset {self.pos}")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]


def decode_program(blob: bytes) -> Program:
    """Parse a canonical CodeBlob, rejecting anything non-canonical."""
    if not isinstance(blob, (bytes, bytearray)):
        raise DecodeError("blob must be bytes")
    if len(blob) > MAX_BLOB:
        raise DecodeError(f"blob exceeds {MAX_BLOB} bytes")
    r = _Reader(bytes(blob))
    if r.take(4) != MAGIC:
        raise DecodeError("bad magic")
    if r.take(1)[0] != VERSION:
        raise DecodeError("unsupported version")
    count = r.u32()
    funcs: list[tuple[bytes, tuple[Instruction, ...]]] = []
    prev: bytes | None = None
    for _ in range(count):
        name = r.take(r.u32())
        if prev is not None and name <= prev:
            raise DecodeError("function names not strictly ascending")
        prev = name
        n = r.u32()
        if n > MAX_FUNCTION_LEN:
            raise DecodeError(f"function {name!r} too long")
        body = []
        for _ in range(n):
            code = r.take(1)[0]
            try:
                op = Op(code)
            except ValueError:
                raise DecodeError(f"unknown opcode 0x{code:02x}") from None
            if op is Op.PUSH_INT:
                arg: Arg = struct.unpack(">q", r.take(8))[0]
            elif op is Op.PUSH_BYTES:
                arg = r.take(r.u32())
            elif op in _U32_OPERAND:
                arg = r.u32()
            else:
                arg = None
            try:
                body.append(Instruction(op, arg))
            except ProgramError as e:
                raise DecodeError(str(e)) from None
        funcs.append((name, tuple(body)))
    if r.pos != len(r.data):
        raise DecodeError("trailing bytes after last function")
    try:
        return Program(funcs)
    except DecodeError:
        raise
    except ProgramError as e:
        raise DecodeError(str(e)) from None
