"""
Genesis: bootstrapping a world state from a genesis document.

The template registry is an ordinary actor at a reserved id whose storage
maps template name -> CodeBlob. ``Create`` resolves templates through it,
so templates can be changed later by whatever code the registry runs.

Genesis document (YAML)::

    config:                       # optional, VmConfig fields
      fuel_per_message: 10000
    registry_code: |              # optional assembly, default: no functions
      func register
        ...
    templates:
      counter: |
        func init
          halt
    kernel_actors:
      - id: 0x<64 hex digits>
        code: |
          func transfer
            ...
        storage:
          - {key: "A", value: {int: 100}}
    user_actors:
      - template: counter
        id: 0x<64 hex digits>
        storage: []

Storage keys and values are byte strings written as ``0x..`` hex, as plain
text (UTF-8), or as ``{int: n}`` for the 8-byte big-endian encoding of n.
"""

from __future__ import annotations

import hashlib
import struct
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Union

import yaml

from .asm import AsmError, assemble
from .program import EMPTY_PROGRAM, Program, ProgramError, decode_program, encode_program
from .state import ID_LEN, INT_MAX, INT_MIN, MAX_FUNCTION_NAME, Actor, StorageMap, WorldState

REGISTRY_ID = hashlib.sha256(b"enso/template-registry").digest()

ProgramSource = Union[str, Program]


class GenesisError(ValueError):
    pass


@dataclass(frozen=True)
class VmConfig:
    fuel_per_message: int = 10000
    max_messages_per_block: int = 100000
    max_queue_len: int = 1000000

    def __post_init__(self) -> None:
        for name in ("fuel_per_message", "max_messages_per_block", "max_queue_len"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or not 1 <= v < 2**64:
                raise ValueError(f"{name} must be an integer in 1..2^64-1, got {v!r}")


@dataclass(frozen=True)
class KernelActorDecl:
    id: bytes
    program: ProgramSource
    storage: Sequence[tuple[bytes, bytes]] = ()


@dataclass(frozen=True)
class UserActorDecl:
    template: bytes
    id: bytes
    storage: Sequence[tuple[bytes, bytes]] = ()


@dataclass(frozen=True)
class GenesisDoc:
    config: VmConfig = field(default_factory=VmConfig)
    templates: Mapping[bytes, ProgramSource] = field(default_factory=dict)
    kernel_actors: Sequence[KernelActorDecl] = ()
    user_actors: Sequence[UserActorDecl] = ()
    registry_program: ProgramSource = EMPTY_PROGRAM


def resolve_template(s: WorldState, name: bytes) -> bytes | None:
    """CodeBlob registered under ``name``, or None."""
    registry = s.get(REGISTRY_ID)
    if registry is None:
        return None
    return registry.storage.get(name)


def _to_program(src: ProgramSource, what: str) -> Program:
    if isinstance(src, Program):
        return src
    try:
        return assemble(src)
    except AsmError as e:
        raise GenesisError(f"{what}: {e}") from None


def _blob(src: ProgramSource, what: str) -> bytes:
    try:
        return encode_program(_to_program(src, what))
    except ProgramError as e:
        raise GenesisError(f"{what}: {e}") from None


def _storage(entries: Sequence[tuple[bytes, bytes]], what: str) -> StorageMap:
    keys = [k for k, _ in entries]
    if len(set(keys)) != len(keys):
        raise GenesisError(f"{what}: duplicate storage key")
    try:
        return StorageMap(entries)
    except ValueError as e:
        raise GenesisError(f"{what}: {e}") from None


def build_genesis(doc: GenesisDoc) -> WorldState:
    """Construct the genesis world state; creation_counter starts at 0."""
    seen: set[bytes] = {REGISTRY_ID}

    def claim(actor_id: bytes, what: str) -> None:
        if not isinstance(actor_id, bytes) or len(actor_id) != ID_LEN:
            raise GenesisError(f"{what}: actor id must be {ID_LEN} bytes")
        if actor_id == REGISTRY_ID:
            raise GenesisError(f"{what}: id 0x{actor_id.hex()} is reserved for the template registry")
        if actor_id in seen:
            raise GenesisError(f"{what}: duplicate actor id 0x{actor_id.hex()}")
        seen.add(actor_id)

    registry_entries = []
    for name, src in doc.templates.items():
        if not isinstance(name, bytes) or not 1 <= len(name) <= MAX_FUNCTION_NAME:
            raise GenesisError(f"template name must be 1..{MAX_FUNCTION_NAME} bytes: {name!r}")
        registry_entries.append((name, _blob(src, f"template {name.decode('utf-8', 'replace')}")))
    registry_blob = _blob(doc.registry_program, "registry code")
    actors = [Actor(REGISTRY_ID, registry_blob, _storage(registry_entries, "registry"))]

    for i, decl in enumerate(doc.kernel_actors):
        what = f"kernel actor {i}"
        claim(decl.id, what)
        actors.append(Actor(decl.id, _blob(decl.program, what), _storage(decl.storage, what)))

    templates = dict(registry_entries)
    for i, decl in enumerate(doc.user_actors):
        what = f"user actor {i}"
        claim(decl.id, what)
        if decl.template not in templates:
            raise GenesisError(f"{what}: unknown template {decl.template!r}")
        actors.append(Actor(decl.id, templates[decl.template], _storage(decl.storage, what)))

    return WorldState(actors, 0)


# -- document parsing ---------------------------------------------------------


def parse_bytes_field(v: Any, what: str) -> bytes:
    """Interpret a genesis storage key/value: 0x-hex, UTF-8 text or {int: n}."""
    if isinstance(v, Mapping):
        if set(v) != {"int"}:
            raise GenesisError(f"{what}: expected {{int: n}}, got {dict(v)!r}")
        try:
            n = int(v["int"])
        except (TypeError, ValueError):
            raise GenesisError(f"{what}: bad integer {v['int']!r}") from None
        if not INT_MIN <= n <= INT_MAX:
            raise GenesisError(f"{what}: integer out of 64-bit range")
        return struct.pack(">q", n)
    if isinstance(v, bool) or not isinstance(v, (str, int)):
        raise GenesisError(f"{what}: expected string, got {v!r}")
    v = str(v)
    if v.startswith("0x"):
        try:
            return bytes.fromhex(v[2:])
        except ValueError:
            raise GenesisError(f"{what}: bad hex {v!r}") from None
    return v.encode("utf-8")


def _parse_id(v: Any, what: str) -> bytes:
    if not isinstance(v, str) or not v.startswith("0x"):
        raise GenesisError(f"{what}: id must be a 0x-prefixed hex string")
    try:
        raw = bytes.fromhex(v[2:])
    except ValueError:
        raise GenesisError(f"{what}: bad hex id {v!r}") from None
    if len(raw) != ID_LEN:
        raise GenesisError(f"{what}: id must be {ID_LEN} bytes, got {len(raw)}")
    return raw


def _parse_storage(v: Any, what: str) -> list[tuple[bytes, bytes]]:
    if v is None:
        return []
    if not isinstance(v, list):
        raise GenesisError(f"{what}: storage must be a list")
    out = []
    for j, entry in enumerate(v):
        if not isinstance(entry, Mapping) or set(entry) != {"key", "value"}:
            raise GenesisError(f"{what}: storage entry {j} needs exactly 'key' and 'value'")
        out.append((parse_bytes_field(entry["key"], what), parse_bytes_field(entry["value"], what)))
    return out


class _Loader(yaml.SafeLoader):
    """SafeLoader that keeps 0x-literals as strings so leading zeros survive."""


def _int_or_hex(loader: yaml.SafeLoader, node: yaml.ScalarNode) -> Any:
    text = loader.construct_scalar(node)
    if text.lstrip("+-").lower().startswith("0x"):
        return text
    return loader.construct_yaml_int(node)


_Loader.add_constructor("tag:yaml.org,2002:int", _int_or_hex)


def parse_genesis(text: str) -> GenesisDoc:
    try:
        raw = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as e:
        raise GenesisError(f"invalid YAML: {e}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, Mapping):
        raise GenesisError("genesis document must be a mapping")
    unknown = set(raw) - {"config", "registry_code", "templates", "kernel_actors", "user_actors"}
    if unknown:
        raise GenesisError(f"unknown genesis sections: {sorted(unknown)}")

    try:
        config = VmConfig(**(raw.get("config") or {}))
    except (TypeError, ValueError) as e:
        raise GenesisError(f"config: {e}") from None

    templates: dict[bytes, ProgramSource] = {}
    for name, src in (raw.get("templates") or {}).items():
        if not isinstance(src, str):
            raise GenesisError(f"template {name}: source must be text")
        templates[parse_bytes_field(name, "template name")] = src

    kernel = []
    for i, k in enumerate(raw.get("kernel_actors") or []):
        what = f"kernel actor {i}"
        if not isinstance(k, Mapping) or "id" not in k or "code" not in k:
            raise GenesisError(f"{what}: needs 'id' and 'code'")
        kernel.append(KernelActorDecl(_parse_id(k["id"], what), str(k["code"]), _parse_storage(k.get("storage"), what)))

    users = []
    for i, u in enumerate(raw.get("user_actors") or []):
        what = f"user actor {i}"
        if not isinstance(u, Mapping) or "id" not in u or "template" not in u:
            raise GenesisError(f"{what}: needs 'id' and 'template'")
        users.append(
            UserActorDecl(
                parse_bytes_field(u["template"], what),
                _parse_id(u["id"], what),
                _parse_storage(u.get("storage"), what),
            )
        )

    registry_code = raw.get("registry_code")
    return GenesisDoc(
        config=config,
        templates=templates,
        kernel_actors=kernel,
        user_actors=users,
        registry_program=EMPTY_PROGRAM if registry_code is None else str(registry_code),
    )


def check_registry(s: WorldState) -> None:
    """Raise GenesisError if a registry entry is not a valid CodeBlob."""
    registry = s.get(REGISTRY_ID)
    if registry is None:
        return
    for name, blob in registry.storage.items():
        try:
            decode_program(blob)
        except ProgramError as e:
            raise GenesisError(f"template {name!r}: {e}") from None
