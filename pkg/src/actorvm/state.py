"""
World state, actors, messages and the global message queue.

Nothing in here executes code. Values handed around by the VM are plain
Python objects: an ``int`` constrained to the signed 64-bit range, or a
``bytes`` of at most 64 KiB.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Union

ID_LEN = 32
INT_MIN = -(2**63)
INT_MAX = 2**63 - 1
MAX_BYTES = 65536
MAX_KEY = 1024
MAX_FUNCTION_NAME = 256
MAX_PARAMS = 32

Value = Union[int, bytes]


def check_value(v: object) -> Value:
    """Validate a VM value, returning it unchanged."""
    if isinstance(v, bool):
        raise TypeError("bool is not a VM value")
    if isinstance(v, int):
        if not INT_MIN <= v <= INT_MAX:
            raise ValueError(f"integer {v} outside signed 64-bit range")
        return v
    if isinstance(v, bytes):
        if len(v) > MAX_BYTES:
            raise ValueError(f"byte string of {len(v)} bytes exceeds {MAX_BYTES}")
        return v
    raise TypeError(f"unsupported value type {type(v).__name__}")


def check_id(raw: object) -> bytes:
    if not isinstance(raw, bytes) or len(raw) != ID_LEN:
        raise ValueError(f"actor id must be {ID_LEN} bytes")
    return raw


def check_key(key: object) -> bytes:
    if not isinstance(key, bytes) or not 1 <= len(key) <= MAX_KEY:
        raise ValueError(f"storage key must be 1..{MAX_KEY} bytes")
    return key


class StorageMap(Mapping[bytes, bytes]):
    """Immutable key/value map iterating in bytewise-ascending key order.

    ``set`` and ``delete`` return new maps.
    """

    __slots__ = ("_data", "_keys")

    def __init__(self, entries: Mapping[bytes, bytes] | Iterable[tuple[bytes, bytes]] = ()):
        data = dict(entries)
        for k, v in data.items():
            check_key(k)
            if not isinstance(v, bytes) or len(v) > MAX_BYTES:
                raise ValueError(f"storage value must be bytes of at most {MAX_BYTES}")
        self._data = data
        self._keys: list[bytes] | None = None

    def __getitem__(self, key: bytes) -> bytes:
        return self._data[key]

    def __iter__(self) -> Iterator[bytes]:
        if self._keys is None:
            self._keys = sorted(self._data)
        return iter(self._keys)

    def __len__(self) -> int:
        return len(self._data)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, StorageMap):
            return self._data == other._data
        return NotImplemented

    def __hash__(self) -> int:
        return hash(tuple(self.items()))

    def __repr__(self) -> str:
        return f"StorageMap({dict(self.items())!r})"

    def set(self, key: bytes, value: bytes) -> StorageMap:
        data = dict(self._data)
        data[key] = value
        return StorageMap(data)

    def delete(self, key: bytes) -> StorageMap:
        if key not in self._data:
            return self
        data = dict(self._data)
        del data[key]
        return StorageMap(data)


@dataclass(frozen=True)
class Actor:
    id: bytes
    code: bytes = b""
    storage: StorageMap = field(default_factory=StorageMap)

    def __post_init__(self) -> None:
        check_id(self.id)
        if not isinstance(self.code, bytes):
            raise TypeError("actor code must be bytes")
        if not isinstance(self.storage, StorageMap):
            object.__setattr__(self, "storage", StorageMap(self.storage))


@dataclass(frozen=True)
class Extrinsic:
    """Origin of a message delivered from outside the state, in a block."""

    block_index: int


@dataclass(frozen=True)
class Internal:
    """Origin of a message sent by an actor."""

    sender: bytes


Origin = Union[Extrinsic, Internal]


@dataclass(frozen=True)
class Message:
    id_to: bytes
    function_call: bytes
    parameters: tuple[Value, ...] = ()
    origin: Origin = Extrinsic(0)

    def __post_init__(self) -> None:
        check_id(self.id_to)
        if not isinstance(self.function_call, bytes) or not 1 <= len(self.function_call) <= MAX_FUNCTION_NAME:
            raise ValueError(f"function_call must be 1..{MAX_FUNCTION_NAME} bytes")
        params = tuple(self.parameters)
        if len(params) > MAX_PARAMS:
            raise ValueError(f"at most {MAX_PARAMS} parameters allowed")
        for p in params:
            check_value(p)
        object.__setattr__(self, "parameters", params)


class MessageQueue:
    """The single global FIFO queue."""

    def __init__(self, items: Iterable[Message] = ()):
        self._items: deque[Message] = deque(items)

    def push(self, m: Message) -> MessageQueue:
        self._items.append(m)
        return self

    def pop(self) -> Message | None:
        """Remove and return the head, or None when empty."""
        if not self._items:
            return None
        return self._items.popleft()

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Message]:
        return iter(self._items)


class WorldState:
    """Immutable set of actors keyed by id, plus the creation counter.

    Mutators return new states; the receiver is never changed.
    """

    __slots__ = ("_actors", "creation_counter", "_order")

    def __init__(self, actors: Iterable[Actor] = (), creation_counter: int = 0):
        if not 0 <= creation_counter < 2**64:
            raise ValueError("creation_counter must fit in u64")
        self._actors: dict[bytes, Actor] = {}
        for a in actors:
            self._actors[a.id] = a
        self.creation_counter = creation_counter
        self._order: list[bytes] | None = None

    @classmethod
    def _from_dict(cls, actors: dict[bytes, Actor], creation_counter: int) -> WorldState:
        s = cls.__new__(cls)
        s._actors = actors
        s.creation_counter = creation_counter
        s._order = None
        return s

    def get(self, actor_id: bytes) -> Actor | None:
        return self._actors.get(actor_id)

    def put(self, actor: Actor) -> WorldState:
        actors = dict(self._actors)
        actors[actor.id] = actor
        return WorldState._from_dict(actors, self.creation_counter)

    def remove(self, actor_id: bytes) -> WorldState:
        actors = dict(self._actors)
        actors.pop(actor_id, None)
        return WorldState._from_dict(actors, self.creation_counter)

    def with_counter(self, creation_counter: int) -> WorldState:
        return WorldState._from_dict(self._actors, creation_counter)

    def __contains__(self, actor_id: object) -> bool:
        return actor_id in self._actors

    def __len__(self) -> int:
        return len(self._actors)

    def ids(self) -> list[bytes]:
        if self._order is None:
            self._order = sorted(self._actors)
        return list(self._order)

    def actors(self) -> Iterator[Actor]:
        """Actors in bytewise-ascending id order."""
        return (self._actors[i] for i in self.ids())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WorldState):
            return NotImplemented
        return self.creation_counter == other.creation_counter and self._actors == other._actors

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"WorldState({len(self._actors)} actors, creation_counter={self.creation_counter})"


def queue_push(q: MessageQueue, m: Message) -> MessageQueue:
    return q.push(m)


def queue_pop(q: MessageQueue) -> tuple[Message | None, MessageQueue]:
    return q.pop(), q


def state_get(s: WorldState, actor_id: bytes) -> Actor | None:
    return s.get(actor_id)


def state_put(s: WorldState, a: Actor) -> WorldState:
    return s.put(a)
