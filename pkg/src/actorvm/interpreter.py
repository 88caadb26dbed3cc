"""
Executes one function call of one actor against a read-only world view.

Nothing is written to the world here. Every side effect (storage writes,
outgoing messages, actor creations, id/code replacement) is appended to an
``EffectBuffer`` which the state transition commits only if the run halts.

Operand order for multi-operand opcodes (top of stack listed first):

    ADD SUB MUL DIV LT   b, a         -> a op b
    EQ                   b, a         -> 1 if a == b else 0
    CONCAT               b, a         -> a + b
    SLICE                end, start, data -> data[start:end]
    SGET / SDEL          key
    SSET                 value, key
    XGET                 key, actor id -> value, flag
    SEND n               param[n-1] .. param[0], function name, target id
    CREATE n             param[n-1] .. param[0], template name -> new id

SGET and XGET push the value and then a flag (1 present, 0 absent), so the
flag is on top; absent entries push empty bytes.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .genesis import resolve_template
from .program import DecodeError, Instruction, Op, Program, decode_program
from .state import (
    ID_LEN,
    INT_MAX,
    INT_MIN,
    MAX_BYTES,
    MAX_FUNCTION_NAME,
    MAX_KEY,
    Actor,
    Internal,
    Message,
    Value,
    WorldState,
)

STACK_CAPACITY = 256
CREATE_TAG = b"enso/create"


class TrapReason(Enum):
    STACK_UNDERFLOW = "StackUnderflow"
    STACK_OVERFLOW = "StackOverflow"
    ARITHMETIC_OVERFLOW = "ArithmeticOverflow"
    DIV_BY_ZERO = "DivByZero"
    TYPE_MISMATCH = "TypeMismatch"
    BAD_JUMP = "BadJump"
    PARAM_OUT_OF_RANGE = "ParamOutOfRange"
    FUEL_EXHAUSTED = "FuelExhausted"
    VALUE_TOO_LARGE = "ValueTooLarge"
    UNKNOWN_TEMPLATE = "UnknownTemplate"
    BAD_CODE_BLOB = "BadCodeBlob"
    ID_COLLISION = "IdCollision"
    EXPLICIT_TRAP = "ExplicitTrap"
    QUEUE_OVERFLOW = "QueueOverflow"


@dataclass(frozen=True)
class SendMsg:
    message: Message


@dataclass(frozen=True)
class CreateActor:
    template_name: bytes
    init_params: tuple[Value, ...]
    assigned_id: bytes


Effect = Union[SendMsg, CreateActor]


@dataclass
class EffectBuffer:
    storage_writes: list[tuple[bytes, bytes | None]] = field(default_factory=list)
    outgoing: list[Effect] = field(default_factory=list)
    new_id: bytes | None = None
    new_code: bytes | None = None

    def creations(self) -> list[CreateActor]:
        return [e for e in self.outgoing if isinstance(e, CreateActor)]


@dataclass(frozen=True)
class Outcome:
    trap: TrapReason | None
    fuel_used: int
    stack: tuple[Value, ...] = ()

    @property
    def halted(self) -> bool:
        return self.trap is None


def created_actor_id(n: int) -> bytes:
    """Id for the n-th actor ever created (0-based)."""
    return hashlib.sha256(CREATE_TAG + struct.pack(">Q", n)).digest()


class Trap(Exception):
    def __init__(self, reason: TrapReason):
        super().__init__(reason.value)
        self.reason = reason


def _checked(v: int) -> int:
    if not INT_MIN <= v <= INT_MAX:
        raise Trap(TrapReason.ARITHMETIC_OVERFLOW)
    return v


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


class Machine:
    """One execution context. Use :func:`execute` rather than this directly."""

    def __init__(self, view: WorldState, actor: Actor, msg: Message, body: tuple[Instruction, ...]):
        self.view = view
        self.actor = actor
        self.msg = msg
        self.body = body
        self.stack: list[Value] = []
        self.pc = 0
        self.effects = EffectBuffer()
        self._overlay: dict[bytes, bytes | None] = {}
        self.halted = False

    # stack helpers

    def push(self, v: Value) -> None:
        if len(self.stack) >= STACK_CAPACITY:
            raise Trap(TrapReason.STACK_OVERFLOW)
        self.stack.append(v)

    def pop(self) -> Value:
        if not self.stack:
            raise Trap(TrapReason.STACK_UNDERFLOW)
        return self.stack.pop()

    def pop_int(self) -> int:
        v = self.pop()
        if not isinstance(v, int):
            raise Trap(TrapReason.TYPE_MISMATCH)
        return v

    def pop_bytes(self) -> bytes:
        v = self.pop()
        if not isinstance(v, bytes):
            raise Trap(TrapReason.TYPE_MISMATCH)
        return v

    def pop_sized(self, lo: int, hi: int) -> bytes:
        b = self.pop_bytes()
        if len(b) > hi:
            raise Trap(TrapReason.VALUE_TOO_LARGE)
        if len(b) < lo:
            raise Trap(TrapReason.TYPE_MISMATCH)
        return b

    def pop_id(self) -> bytes:
        b = self.pop_bytes()
        if len(b) != ID_LEN:
            raise Trap(TrapReason.TYPE_MISMATCH)
        return b

    def pop_params(self, n: int) -> tuple[Value, ...]:
        if len(self.stack) < n:
            raise Trap(TrapReason.STACK_UNDERFLOW)
        params = tuple(self.stack[len(self.stack) - n:])
        del self.stack[len(self.stack) - n:]
        return params

    # execution

    def step(self, ins: Instruction) -> None:
        op = ins.op
        self.pc += 1
        if op is Op.PUSH_INT or op is Op.PUSH_BYTES:
            self.push(ins.arg)  # type: ignore[arg-type]
        elif op is Op.POP:
            self.pop()
        elif op is Op.DUP:
            depth = ins.arg
            if len(self.stack) <= depth:  # type: ignore[operator]
                raise Trap(TrapReason.STACK_UNDERFLOW)
            self.push(self.stack[-1 - depth])  # type: ignore[operator]
        elif op is Op.SWAP:
            if len(self.stack) < 2:
                raise Trap(TrapReason.STACK_UNDERFLOW)
            self.stack[-1], self.stack[-2] = self.stack[-2], self.stack[-1]
        elif op in _ARITH:
            b = self.pop_int()
            a = self.pop_int()
            self.push(_ARITH[op](a, b))
        elif op is Op.EQ:
            b = self.pop()
            a = self.pop()
            if type(a) is not type(b):
                raise Trap(TrapReason.TYPE_MISMATCH)
            self.push(1 if a == b else 0)
        elif op is Op.NOT:
            self.push(1 if self.pop_int() == 0 else 0)
        elif op is Op.CONCAT:
            b = self.pop_bytes()
            a = self.pop_bytes()
            if len(a) + len(b) > MAX_BYTES:
                raise Trap(TrapReason.VALUE_TOO_LARGE)
            self.push(a + b)
        elif op is Op.LEN:
            self.push(len(self.pop_bytes()))
        elif op is Op.SLICE:
            end = self.pop_int()
            start = self.pop_int()
            data = self.pop_bytes()
            if not 0 <= start <= end <= len(data):
                raise Trap(TrapReason.PARAM_OUT_OF_RANGE)
            self.push(data[start:end])
        elif op is Op.JUMP:
            self.jump(ins.arg)  # type: ignore[arg-type]
        elif op is Op.JUMP_IF:
            if self.pop_int() != 0:
                self.jump(ins.arg)  # type: ignore[arg-type]
        elif op is Op.PARAM_COUNT:
            self.push(len(self.msg.parameters))
        elif op is Op.PARAM:
            i = self.pop_int()
            if not 0 <= i < len(self.msg.parameters):
                raise Trap(TrapReason.PARAM_OUT_OF_RANGE)
            self.push(self.msg.parameters[i])
        elif op is Op.SELF_ID:
            self.push(self.actor.id)
        elif op is Op.SGET:
            key = self.pop_sized(1, MAX_KEY)
            if key in self._overlay:
                value = self._overlay[key]
            else:
                value = self.actor.storage.get(key)
            self._push_lookup(value)
        elif op is Op.SSET:
            value = self.pop_bytes()
            key = self.pop_sized(1, MAX_KEY)
            self._write(key, value)
        elif op is Op.SDEL:
            self._write(self.pop_sized(1, MAX_KEY), None)
        elif op is Op.XGET:
            key = self.pop_sized(1, MAX_KEY)
            other = self.view.get(self.pop_id())
            self._push_lookup(None if other is None else other.storage.get(key))
        elif op is Op.SEND:
            params = self.pop_params(ins.arg)  # type: ignore[arg-type]
            fname = self.pop_sized(1, MAX_FUNCTION_NAME)
            target = self.pop_id()
            msg = Message(target, fname, params, Internal(self.actor.id))
            self.effects.outgoing.append(SendMsg(msg))
        elif op is Op.CREATE:
            params = self.pop_params(ins.arg)  # type: ignore[arg-type]
            name = self.pop_sized(1, MAX_FUNCTION_NAME)
            blob = resolve_template(self.view, name)
            if blob is None:
                raise Trap(TrapReason.UNKNOWN_TEMPLATE)
            _require_decodable(blob)
            n = self.view.creation_counter + len(self.effects.creations())
            if n >= 2**64:
                raise Trap(TrapReason.ARITHMETIC_OVERFLOW)
            new_id = created_actor_id(n)
            self.push(new_id)
            self.effects.outgoing.append(CreateActor(name, params, new_id))
        elif op is Op.SET_ID:
            self.effects.new_id = self.pop_id()
        elif op is Op.SET_CODE:
            blob = self.pop_bytes()
            _require_decodable(blob)
            self.effects.new_code = blob
        elif op is Op.HALT:
            self.halted = True
        elif op is Op.TRAP:
            raise Trap(TrapReason.EXPLICIT_TRAP)
        elif op is Op.BYTES_TO_INT:
            b = self.pop_bytes()
            if len(b) != 8:
                raise Trap(TrapReason.TYPE_MISMATCH)
            self.push(struct.unpack(">q", b)[0])
        elif op is Op.INT_TO_BYTES:
            self.push(struct.pack(">q", self.pop_int()))
        else:  # pragma: no cover - Op is exhaustive
            raise AssertionError(op)

    def jump(self, target: int) -> None:
        if not 0 <= target <= len(self.body):
            raise Trap(TrapReason.BAD_JUMP)
        self.pc = target

    def _push_lookup(self, value: bytes | None) -> None:
        if value is None:
            self.push(b"")
            self.push(0)
        else:
            self.push(value)
            self.push(1)

    def _write(self, key: bytes, value: bytes | None) -> None:
        self._overlay[key] = value
        self.effects.storage_writes.append((key, value))

    def run(self, fuel_limit: int) -> Outcome:
        fuel = 0
        body = self.body
        try:
            while not self.halted and self.pc < len(body):
                if fuel >= fuel_limit:
                    raise Trap(TrapReason.FUEL_EXHAUSTED)
                fuel += 1
                self.step(body[self.pc])
        except Trap as t:
            return Outcome(t.reason, fuel, tuple(self.stack))
        return Outcome(None, fuel, tuple(self.stack))


def _add(a: int, b: int) -> int:
    return _checked(a + b)


def _sub(a: int, b: int) -> int:
    return _checked(a - b)


def _mul(a: int, b: int) -> int:
    return _checked(a * b)


def _div(a: int, b: int) -> int:
    if b == 0:
        raise Trap(TrapReason.DIV_BY_ZERO)
    return _checked(_trunc_div(a, b))


def _lt(a: int, b: int) -> int:
    return 1 if a < b else 0


_ARITH = {Op.ADD: _add, Op.SUB: _sub, Op.MUL: _mul, Op.DIV: _div, Op.LT: _lt}


def _require_decodable(blob: bytes) -> None:
    try:
        decode_program(blob)
    except DecodeError:
        raise Trap(TrapReason.BAD_CODE_BLOB) from None


def execute(
    view: WorldState,
    actor: Actor,
    msg: Message,
    fuel_limit: int,
    program: Program | None = None,
) -> tuple[EffectBuffer, Outcome]:
    """Run ``msg.function_call`` of ``actor`` with at most ``fuel_limit`` instructions.

    The caller must have checked that the actor's code decodes and defines
    the function; ``program`` may be passed to skip decoding again. On a
    trap the returned buffer must be discarded.
    """
    if program is None:
        program = decode_program(actor.code)
    machine = Machine(view, actor, msg, program[msg.function_call])
    outcome = machine.run(fuel_limit)
    return machine.effects, outcome
