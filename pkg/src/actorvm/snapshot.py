"""
Canonical world-state encoding, state roots and snapshot files.

Snapshot layout (big-endian)::

    b"ENSS" | 0x01 | u64 creation_counter | u32 actor count
    per actor, ids strictly ascending:
        32-byte id | u32 code length | code | u32 entry count
        per entry, keys strictly ascending:
            u32 key length | key | u32 value length | value

The state root is SHA-256 over exactly these bytes.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from pathlib import Path

from .state import ID_LEN, MAX_BYTES, MAX_KEY, Actor, StorageMap, WorldState

MAGIC = b"ENSS"
VERSION = 0x01
EXTENSION = ".enss"


class SnapshotError(ValueError):
    pass


def encode_state(s: WorldState) -> bytes:
    out = [MAGIC, bytes((VERSION,)), struct.pack(">QI", s.creation_counter, len(s))]
    for actor in s.actors():
        out.append(actor.id)
        out.append(struct.pack(">I", len(actor.code)))
        out.append(actor.code)
        out.append(struct.pack(">I", len(actor.storage)))
        for key, value in actor.storage.items():
            out.append(struct.pack(">I", len(key)))
            out.append(key)
            out.append(struct.pack(">I", len(value)))
            out.append(value)
    return b"".join(out)


def state_root(s: WorldState) -> bytes:
    return hashlib.sha256(encode_state(s)).digest()


def decode_state(data: bytes) -> WorldState:
    """Inverse of encode_state; rejects truncated or non-canonical input."""
    view = memoryview(data)
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(view):
            raise SnapshotError(f"truncated snapshot at offset {pos}")
        chunk = bytes(view[pos:pos + n])
        pos += n
        return chunk

    def u32() -> int:
        return struct.unpack(">I", take(4))[0]

    if take(4) != MAGIC:
        raise SnapshotError("bad magic")
    if take(1)[0] != VERSION:
        raise SnapshotError("unsupported snapshot version")
    counter, count = struct.unpack(">QI", take(12))
    actors = []
    prev_id: bytes | None = None
    for _ in range(count):
        actor_id = take(ID_LEN)
        if prev_id is not None and actor_id <= prev_id:
            raise SnapshotError("actor ids not strictly ascending")
        prev_id = actor_id
        code = take(u32())
        entries = []
        prev_key: bytes | None = None
        for _ in range(u32()):
            key = take(u32())
            if not 1 <= len(key) <= MAX_KEY:
                raise SnapshotError(f"storage key length {len(key)} out of range")
            if prev_key is not None and key <= prev_key:
                raise SnapshotError("storage keys not strictly ascending")
            prev_key = key
            value = take(u32())
            if len(value) > MAX_BYTES:
                raise SnapshotError(f"storage value of {len(value)} bytes too large")
            entries.append((key, value))
        actors.append(Actor(actor_id, code, StorageMap(entries)))
    if pos != len(view):
        raise SnapshotError("trailing bytes after last actor")
    return WorldState(actors, counter)


def save_snapshot(s: WorldState, path: str | os.PathLike[str]) -> None:
    """Write atomically: temp file in the same directory, then rename."""
    path = Path(path)
    data = encode_state(s)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def load_snapshot(path: str | os.PathLike[str]) -> WorldState:
    return decode_state(Path(path).read_bytes())
