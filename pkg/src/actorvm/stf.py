"""
The state transition function: apply a block of extrinsics to a world state.

All extrinsics are queued first, in block order; the queue is then drained
one message at a time, and every message an execution emits is appended to
the tail. A message's effects are committed all-or-nothing.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from .genesis import VmConfig, resolve_template
from .interpreter import CreateActor, EffectBuffer, SendMsg, TrapReason, execute
from .program import DecodeError, Program, decode_program
from .snapshot import state_root
from .state import Actor, Extrinsic, Internal, Message, MessageQueue, StorageMap, Value, WorldState

__all__ = [
    "Block",
    "Disposition",
    "Receipt",
    "VmConfig",
    "apply_block",
    "process_message",
]

INIT_FUNCTION = b"init"


class Disposition(Enum):
    PROCESSED = "Processed"
    IGNORED_NO_ACTOR = "IgnoredNoActor"
    IGNORED_NO_FUNCTION = "IgnoredNoFunction"
    IGNORED_BAD_CODE = "IgnoredBadCode"
    TRAPPED = "Trapped"
    DROPPED_BUDGET = "DroppedBudget"


@dataclass(frozen=True)
class Receipt:
    message: Message
    disposition: Disposition
    trap: TrapReason | None = None
    fuel_used: int = 0
    messages_emitted: int = 0
    actors_created: int = 0

    @property
    def label(self) -> str:
        """Disposition name, with the trap reason when trapped."""
        if self.trap is not None:
            return f"Trapped({self.trap.value})"
        return self.disposition.value


@dataclass(frozen=True)
class Block:
    extrinsics: tuple[Message, ...] = ()

    def __post_init__(self) -> None:
        exts = tuple(self.extrinsics)
        for i, m in enumerate(exts):
            if m.origin != Extrinsic(i):
                raise ValueError(f"extrinsic {i} has origin {m.origin}, expected Extrinsic({i})")
        object.__setattr__(self, "extrinsics", exts)

    @classmethod
    def of(cls, calls: Iterable[tuple[bytes, bytes, Sequence[Value]]]) -> Block:
        """Build a block from (target id, function name, parameters) triples."""
        return cls(tuple(Message(t, f, tuple(p), Extrinsic(i)) for i, (t, f, p) in enumerate(calls)))


@lru_cache(maxsize=4096)
def _decode(code: bytes) -> Program | None:
    try:
        return decode_program(code)
    except DecodeError:
        return None


class _CommitTrap(Exception):
    def __init__(self, reason: TrapReason):
        self.reason = reason


def _commit(s: WorldState, actor: Actor, fx: EffectBuffer) -> tuple[WorldState, list[Message], int]:
    storage = dict(actor.storage.items())
    for key, value in fx.storage_writes:
        if value is None:
            storage.pop(key, None)
        else:
            storage[key] = value
    code = actor.code if fx.new_code is None else fx.new_code
    updated = Actor(actor.id, code, StorageMap(storage))

    creations = fx.creations()
    if fx.new_id is not None and fx.new_id != actor.id:
        if fx.new_id in s or any(c.assigned_id == fx.new_id for c in creations):
            raise _CommitTrap(TrapReason.ID_COLLISION)
        s = s.remove(actor.id)
        updated = Actor(fx.new_id, updated.code, updated.storage)
    s = s.put(updated)

    counter = s.creation_counter
    for c in creations:
        if c.assigned_id in s:
            raise _CommitTrap(TrapReason.ID_COLLISION)
        blob = resolve_template(s, c.template_name)
        if blob is None:
            raise _CommitTrap(TrapReason.UNKNOWN_TEMPLATE)
        if _decode(blob) is None:
            raise _CommitTrap(TrapReason.BAD_CODE_BLOB)
        s = s.put(Actor(c.assigned_id, blob))
        counter += 1
    s = s.with_counter(counter)

    out = []
    for e in fx.outgoing:
        if isinstance(e, SendMsg):
            out.append(e.message)
        elif isinstance(e, CreateActor):
            out.append(Message(e.assigned_id, INIT_FUNCTION, e.init_params, Internal(actor.id)))
    return s, out, len(creations)


def process_message(s: WorldState, m: Message, cfg: VmConfig) -> tuple[WorldState, list[Message], Receipt]:
    """Deliver one message. Never raises for VM-level failures; see the receipt."""
    actor = s.get(m.id_to)
    if actor is None:
        return s, [], Receipt(m, Disposition.IGNORED_NO_ACTOR)
    program = _decode(actor.code)
    if program is None:
        return s, [], Receipt(m, Disposition.IGNORED_BAD_CODE)
    if m.function_call not in program:
        return s, [], Receipt(m, Disposition.IGNORED_NO_FUNCTION)

    fx, outcome = execute(s, actor, m, cfg.fuel_per_message, program=program)
    if not outcome.halted:
        return s, [], Receipt(m, Disposition.TRAPPED, outcome.trap, outcome.fuel_used)
    try:
        s2, emitted, created = _commit(s, actor, fx)
    except _CommitTrap as t:
        return s, [], Receipt(m, Disposition.TRAPPED, t.reason, outcome.fuel_used)
    return s2, emitted, Receipt(m, Disposition.PROCESSED, None, outcome.fuel_used, len(emitted), created)


def apply_block(
    s: WorldState, b: Block, cfg: VmConfig = VmConfig(), *, check_atomicity: bool = False
) -> tuple[WorldState, list[Receipt]]:
    """Apply a block, returning the new state and one receipt per queued message.

    With ``check_atomicity`` the state root is recomputed around every
    message and an AssertionError is raised if a non-processed message
    changed it. That is slow and meant for tests.
    """
    queue = MessageQueue(b.extrinsics)
    receipts: list[Receipt] = []
    processed = 0
    while len(queue):
        if processed >= cfg.max_messages_per_block:
            while (m := queue.pop()) is not None:
                receipts.append(Receipt(m, Disposition.DROPPED_BUDGET))
            break
        m = queue.pop()
        assert m is not None
        s2, emitted, receipt = process_message(s, m, cfg)
        processed += 1
        if emitted and len(queue) + len(emitted) > cfg.max_queue_len:
            s2, emitted = s, []
            receipt = Receipt(m, Disposition.TRAPPED, TrapReason.QUEUE_OVERFLOW, receipt.fuel_used)
        if check_atomicity and receipt.disposition is not Disposition.PROCESSED:
            assert state_root(s2) == state_root(s), f"non-processed message changed state: {receipt}"
        s = s2
        for e in emitted:
            queue.push(e)
        receipts.append(receipt)
    return s, receipts
