"""Deterministic actor-model virtual machine for use as a blockchain state transition function."""

from .asm import AsmError, assemble, disassemble
from .genesis import REGISTRY_ID, GenesisDoc, GenesisError, VmConfig, build_genesis, parse_genesis, resolve_template
from .interpreter import EffectBuffer, Outcome, TrapReason, execute
from .program import DecodeError, Instruction, Op, Program, ProgramError, decode_program, encode_program
from .snapshot import SnapshotError, decode_state, encode_state, load_snapshot, save_snapshot, state_root
from .state import Actor, Extrinsic, Internal, Message, MessageQueue, StorageMap, WorldState
from .stf import Block, Disposition, Receipt, apply_block, process_message

__version__ = "0.1.0"
