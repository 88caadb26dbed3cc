from __future__ import annotations

import hashlib

import pytest

from actorvm import (
    REGISTRY_ID,
    Actor,
    Block,
    GenesisDoc,
    GenesisError,
    StorageMap,
    VmConfig,
    WorldState,
    apply_block,
    assemble,
    build_genesis,
    decode_program,
    encode_program,
    parse_genesis,
    resolve_template,
    state_root,
)
from actorvm.demo import LEDGER_ID, ledger_genesis_yaml, ledger_source
from actorvm.genesis import KernelActorDecl, UserActorDecl
from actorvm.interpreter import created_actor_id
from actorvm.stf import Disposition

from .conftest import EMPTY_GENESIS_ROOT, LEDGER_GENESIS_ROOT, aid

COUNTER = "func init\n halt\nfunc inc\n halt\n"


def test_registry_id_is_hash_of_tag():
    assert REGISTRY_ID == hashlib.sha256(b"enso/template-registry").digest()


def test_empty_doc_has_only_registry():
    s = build_genesis(GenesisDoc())
    assert s.ids() == [REGISTRY_ID]
    assert s.get(REGISTRY_ID).code == encode_program(assemble(""))
    assert s.creation_counter == 0
    assert state_root(s).hex() == EMPTY_GENESIS_ROOT


def test_duplicate_kernel_id_rejected():
    doc = GenesisDoc(kernel_actors=[KernelActorDecl(aid(1), ""), KernelActorDecl(aid(1), "")])
    with pytest.raises(GenesisError, match=aid(1).hex()):
        build_genesis(doc)


@pytest.mark.parametrize(
    "doc",
    [
        GenesisDoc(kernel_actors=[KernelActorDecl(REGISTRY_ID, "")]),
        GenesisDoc(user_actors=[UserActorDecl(b"missing", aid(1))]),
        GenesisDoc(kernel_actors=[KernelActorDecl(aid(1), "func f\n jump nowhere\n")]),
        GenesisDoc(templates={b"t": "func f\n bogus\n"}),
        GenesisDoc(templates={b"t": COUNTER}, kernel_actors=[KernelActorDecl(aid(1), "")],
                   user_actors=[UserActorDecl(b"t", aid(1))]),
        GenesisDoc(kernel_actors=[KernelActorDecl(aid(1), "", [(b"k", b"1"), (b"k", b"2")])]),
    ],
)  # fmt: skip
def test_invalid_docs_rejected(doc):
    with pytest.raises(GenesisError):
        build_genesis(doc)


def test_ledger_genesis_matches_hand_built_state():
    s = build_genesis(parse_genesis(ledger_genesis_yaml()))
    expected = WorldState(
        [
            Actor(REGISTRY_ID, encode_program(assemble(""))),
            Actor(
                LEDGER_ID,
                encode_program(assemble(ledger_source())),
                StorageMap({b"A": (100).to_bytes(8, "big"), b"B": (50).to_bytes(8, "big"), b"C": bytes(8)}),
            ),
        ]
    )
    assert len(s) == 2
    assert state_root(s) == state_root(expected)
    assert state_root(s).hex() == LEDGER_GENESIS_ROOT
    assert int.from_bytes(s.get(LEDGER_ID).storage[b"A"], "big") == 100


def test_user_actors_get_template_code():
    s = build_genesis(GenesisDoc(templates={b"counter": COUNTER}, user_actors=[UserActorDecl(b"counter", aid(7))]))
    assert s.get(aid(7)).code == resolve_template(s, b"counter")


def test_resolve_template():
    s = build_genesis(GenesisDoc(templates={b"counter": COUNTER}))
    assert resolve_template(s, b"nope") is None
    assert decode_program(resolve_template(s, b"counter")) == assemble(COUNTER)


def test_genesis_is_deterministic():
    doc_text = ledger_genesis_yaml()
    assert state_root(build_genesis(parse_genesis(doc_text))) == state_root(build_genesis(parse_genesis(doc_text)))


REGISTRY_CODE = """
func register
    push 0
    param
    push 1
    param
    sset
    halt
"""

MAKER = """
func make
    push "counter"
    create 0
    halt
"""


def test_registry_update_is_seen_by_resolve_and_create():
    doc = GenesisDoc(
        templates={b"counter": COUNTER},
        registry_program=REGISTRY_CODE,
        kernel_actors=[KernelActorDecl(aid("maker"), MAKER)],
    )
    s = build_genesis(doc)
    new_blob = encode_program(assemble("func init\n halt\nfunc v2\n halt\n"))
    s, receipts = apply_block(s, Block.of([(REGISTRY_ID, b"register", (b"counter", new_blob))]), VmConfig())
    assert receipts[0].disposition is Disposition.PROCESSED
    assert resolve_template(s, b"counter") == new_blob
    # a later block creates from the updated template
    s, _ = apply_block(s, Block.of([(aid("maker"), b"make", ())]), VmConfig())
    assert s.get(created_actor_id(0)).code == new_blob


def test_registry_with_empty_program_ignores_messages():
    s = build_genesis(GenesisDoc(templates={b"counter": COUNTER}))
    s2, receipts = apply_block(s, Block.of([(REGISTRY_ID, b"register", (b"x", b"y"))]), VmConfig())
    assert receipts[0].disposition is Disposition.IGNORED_NO_FUNCTION and s2 == s


def test_parse_genesis_document():
    text = f"""
config:
  fuel_per_message: 77
templates:
  counter: |
    func init
      halt
kernel_actors:
  - id: 0x{aid(1).hex()}
    code: |
      func f
        halt
    storage:
      - {{key: "k", value: 0x00ff}}
      - {{key: 0x01, value: {{int: -1}}}}
user_actors:
  - template: counter
    id: "0x{aid(2).hex()}"
"""
    doc = parse_genesis(text)
    assert doc.config.fuel_per_message == 77 and doc.config.max_queue_len == 1000000
    s = build_genesis(doc)
    assert dict(s.get(aid(1)).storage) == {b"k": b"\x00\xff", b"\x01": b"\xff" * 8}
    assert s.get(aid(2)).code == resolve_template(s, b"counter")


def test_unquoted_hex_id_keeps_leading_zeros():
    raw = bytes(31) + b"\x01"
    doc = parse_genesis(f"kernel_actors:\n  - id: 0x{raw.hex()}\n    code: ''\n")
    assert doc.kernel_actors[0].id == raw


@pytest.mark.parametrize(
    "text",
    [
        "bogus_section: 1",
        "config: {fuel_per_message: 0}",
        "kernel_actors: [{id: '0x00', code: ''}]",
        "kernel_actors: [{code: ''}]",
        "templates: {t: 5}",
        "[1, 2]",
        "key: [unclosed",
    ],
)
def test_parse_errors(text):
    with pytest.raises(GenesisError):
        parse_genesis(text)
