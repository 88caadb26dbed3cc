from __future__ import annotations

import hashlib

import pytest

from actorvm import Actor, GenesisDoc, Message, StorageMap, WorldState, assemble, encode_program
from actorvm.genesis import KernelActorDecl
from actorvm.state import Extrinsic

EMPTY_STATE_ROOT = "2bdead3452b05db89e1139b3ddd1aea44b37efaa41827f7f6547ab236fff6d2a"
EMPTY_GENESIS_ROOT = "f680519f7a5df3910c8a500c9be147372cd2c3df2ae2f932dae77344987e4979"
LEDGER_GENESIS_ROOT = "3ed6408fc1e27bdec64cc83f084c6484148c148dd95cb7ba37d4e6562074790f"
FIRST_CREATED_ID = "35e5e2ca296161c0dbb03527820e3092e5bfa81b1f19d47d1147805d9dfbff2b"


def aid(name: str | int) -> bytes:
    return hashlib.sha256(f"test/{name}".encode()).digest()


def blob(src: str) -> bytes:
    return encode_program(assemble(src))


def actor(name: str | int, src: str, storage: dict[bytes, bytes] | None = None) -> Actor:
    return Actor(aid(name), blob(src), StorageMap(storage or {}))


def msg(target: bytes, fn: str | bytes, *params, index: int = 0) -> Message:
    if isinstance(fn, str):
        fn = fn.encode()
    return Message(target, fn, params, Extrinsic(index))


def kernel_doc(**actors: str) -> GenesisDoc:
    return GenesisDoc(kernel_actors=[KernelActorDecl(aid(n), src) for n, src in actors.items()])


@pytest.fixture
def empty_state() -> WorldState:
    return WorldState()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
