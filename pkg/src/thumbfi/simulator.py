"""Event-stream simulator for laid-out programs.

The core fetches one aligned 32-bit word from instruction memory whenever
the program counter moves into a word it does not hold, and reuses the
buffered word otherwise. A taken branch drops the buffer. Every fetched word
and every word returned by a load goes through a hook before use, and
each instruction's halfwords pass through a third hook before decode;
these are the injection points used by :mod:`thumbfi.faults`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

from .assembler import ProgramImage
from .encoding import UnsupportedInstruction, decode_halfwords, is_wide_prefix
from .isa import (
    LR, MASK32, PC, RAM_BASE, RAM_SIZE, Condition, ExceptionKind, Imm, Instruction,
    MachineState, Status, initial_state,
)

DEFAULT_MAX_STEPS = 10_000


@dataclass(frozen=True)
class FetchEvent:
    index: int
    address: int
    word: int


@dataclass(frozen=True)
class LoadEvent:
    index: int
    address: int
    value: int


@dataclass(frozen=True)
class InstructionEvent:
    """One instruction about to be decoded (its raw halfwords)."""

    index: int
    address: int
    halfwords: tuple


class Hooks(Protocol):
    def fetch(self, event: FetchEvent) -> int: ...

    def load(self, event: LoadEvent) -> int: ...

    def instruction(self, event: InstructionEvent) -> tuple: ...


class IdentityHooks:
    def fetch(self, event):
        return event.word

    def load(self, event):
        return event.value

    def instruction(self, event):
        return event.halfwords


@dataclass
class RunResult:
    state: MachineState
    trace: list                      # FetchEvent / LoadEvent in program order
    steps: int
    executed: list = field(default_factory=list)  # InstructionEvent
    detected: bool = False           # the error handler was reached

    @property
    def fetches(self) -> list:
        return [e for e in self.trace if isinstance(e, FetchEvent)]

    @property
    def loads(self) -> list:
        return [e for e in self.trace if isinstance(e, LoadEvent)]

    @property
    def status(self) -> Status:
        return self.state.status

    def dump_trace(self) -> str:
        return dump_trace(self.trace)


def dump_trace(trace) -> str:
    lines = []
    for event in trace:
        if isinstance(event, FetchEvent):
            lines.append(f"F {event.index} {event.address:08x} {event.word:08x}")
        else:
            lines.append(f"L {event.index} {event.address:08x} {event.value:08x}")
    return "\n".join(lines) + ("\n" if lines else "")


class _Fault(Exception):
    def __init__(self, kind: ExceptionKind):
        self.kind = kind


def fetch_word_of(image: ProgramImage, address: int) -> tuple[int, int]:
    """The aligned fetch word containing ``address``."""
    aligned = address & ~3
    word = image.fetch_word(aligned) if image.contains(address) else None
    if word is None:
        raise ValueError(f"address {address:#x} is outside the image")
    return aligned, word


def _add(a, b, carry=0):
    unsigned = a + b + carry
    result = unsigned & MASK32
    overflow = bool(((a ^ result) & (b ^ result)) >> 31)
    return result, unsigned > MASK32, overflow


class Core:
    """One run in progress. Not reusable across runs."""

    def __init__(self, image: ProgramImage, state: MachineState, hooks: Hooks | None = None):
        self.image = image
        self.state = state
        self.hooks = hooks or IdentityHooks()
        self.trace: list = []
        self.executed: list = []
        self.steps = 0
        self.detected = False
        self._buffer: tuple[int, int] | None = None
        self._fetches = 0
        self._loads = 0

    # -- memory ----------------------------------------------------------

    def _halfword(self, address: int) -> int:
        aligned = address & ~3
        if self._buffer is None or self._buffer[0] != aligned:
            word = self.image.fetch_word(aligned)
            if word is None:
                raise _Fault(ExceptionKind.MEMORY_FAULT)
            event = FetchEvent(self._fetches, aligned, word)
            self._fetches += 1
            self.trace.append(event)
            self._buffer = (aligned, self.hooks.fetch(event) & MASK32)
        word = self._buffer[1]
        return word >> 16 if address & 2 else word & 0xFFFF

    def _read_word(self, address: int) -> int:
        if address % 4:
            raise _Fault(ExceptionKind.UNALIGNED_ACCESS)
        raw = self.image.read_bytes(address, 4)
        if raw is not None:
            value = int.from_bytes(raw, "little")
        elif RAM_BASE <= address <= RAM_BASE + RAM_SIZE - 4:
            memory = self.state.memory
            value = int.from_bytes(bytes(memory.get(address + i, 0) for i in range(4)), "little")
        else:
            raise _Fault(ExceptionKind.MEMORY_FAULT)
        event = LoadEvent(self._loads, address, value)
        self._loads += 1
        self.trace.append(event)
        return self.hooks.load(event) & MASK32

    def _write_word(self, address: int, value: int):
        if address % 4:
            raise _Fault(ExceptionKind.UNALIGNED_ACCESS)
        if not RAM_BASE <= address <= RAM_BASE + RAM_SIZE - 4:
            raise _Fault(ExceptionKind.MEMORY_FAULT)
        for i, byte in enumerate(value.to_bytes(4, "little")):
            self.state.memory[address + i] = byte

    # -- execution -------------------------------------------------------

    def step(self):
        state = self.state
        if not state.running:
            return
        address = state.pc
        if self.image.error_address is not None and address == self.image.error_address:
            self.detected = True
            state.stop(Status.HALTED)
            return
        try:
            halfwords = (self._halfword(address),)
            if is_wide_prefix(halfwords[0]):
                halfwords += (self._halfword(address + 2),)
            event = InstructionEvent(len(self.executed), address, halfwords)
            self.executed.append(event)
            halfwords = tuple(self.hooks.instruction(event))
            decoded = decode_halfwords(*halfwords)
            if not isinstance(decoded, Instruction):
                kind = (ExceptionKind.UNSUPPORTED_INSTRUCTION
                        if isinstance(decoded, UnsupportedInstruction)
                        else ExceptionKind.UNDEFINED_INSTRUCTION)
                raise _Fault(kind)
            self._execute(decoded, address)
        except _Fault as fault:
            state.stop(Status.EXCEPTION, fault.kind, address)
        self.steps += 1

    def _is_halt(self, address: int) -> bool:
        """Only halts laid out in the image stop the run; a branch-to-self
        produced by corruption just branches (and re-fetches)."""
        original = self.image.instructions.get(address)
        return original is not None and original.is_halt

    def _execute(self, instr: Instruction, address: int):
        state = self.state
        regs, flags = state.regs, state.flags
        m, ops = instr.mnemonic, instr.operands
        next_pc = address + instr.size

        def value(op):
            if isinstance(op, Imm):
                return op.value & MASK32
            return (address + 4) if op.index == PC else regs[op.index]

        def set_nz(result):
            flags["N"] = bool(result >> 31)
            flags["Z"] = result == 0

        def branch(target):
            state.pc = target
            self._buffer = None

        if m == "nop":
            pass
        elif m in ("mov", "movs"):
            result = value(ops[1])
            regs[ops[0].index] = result
            if m == "movs":
                set_nz(result)
        elif m in ("add", "adds", "sub", "subs", "cmp"):
            if m == "cmp":
                a, b = value(ops[0]), value(ops[1])
            else:
                a, b = value(ops[1]), value(ops[2])
            if m.startswith("add"):
                result, carry, overflow = _add(a, b)
            else:
                result, carry, overflow = _add(a, ~b & MASK32, 1)
            if m != "cmp":
                regs[ops[0].index] = result
            if m in ("adds", "subs", "cmp"):
                set_nz(result)
                flags["C"], flags["V"] = carry, overflow
        elif m == "adr":
            regs[ops[0].index] = (((address + 4) & ~3) + ops[1].value) & MASK32
        elif m == "ldr_literal":
            target = (((address + 4) & ~3) + ops[1].value) & MASK32
            regs[ops[0].index] = self._read_word(target)
        elif m == "ldr_imm":
            regs[ops[0].index] = self._read_word((value(ops[1]) + ops[2].value) & MASK32)
        elif m == "str_imm":
            self._write_word((value(ops[1]) + ops[2].value) & MASK32, value(ops[0]))
        elif m in ("b", "b_cond", "bl"):
            offset = ops[0].value
            target = (address + 4 + offset) & MASK32
            if m == "b_cond":
                taken = flags["Z"] if instr.condition is Condition.EQ else not flags["Z"]
                if not taken:
                    state.pc = next_pc
                    return
            if m == "b" and target == address and self._is_halt(address):
                state.stop(Status.HALTED)
                return
            if m == "bl":
                regs[LR] = next_pc | 1
            branch(target)
            return
        elif m == "bx":
            target = value(ops[0])
            if target & 0xFFFFFFF0 == 0xFFFFFFF0:
                state.stop(Status.HALTED)  # exception-return / top-level return sentinel
                return
            if not target & 1:
                raise _Fault(ExceptionKind.UNSUPPORTED_INSTRUCTION)  # ARM state
            branch(target & ~1)
            return
        elif m == "msr":
            state.specials[ops[0].reg] = value(ops[1])
        state.pc = next_pc


def run(image: ProgramImage, initial: MachineState | None = None,
        max_steps: int = DEFAULT_MAX_STEPS, hooks: Hooks | None = None) -> RunResult:
    """Execute until halt, exception or ``max_steps`` instructions."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    state = initial.copy() if initial is not None else initial_state(image.entry)
    core = Core(image, state, hooks)
    while state.running:
        if core.steps >= max_steps:
            state.stop(Status.TIMEOUT)
            break
        core.step()
    return RunResult(state, core.trace, core.steps, core.executed, core.detected)


def step(image: ProgramImage, state: MachineState, hooks: Hooks | None = None) -> MachineState:
    """Execute one instruction from a cold fetch buffer; returns a new state.

    A state that is no longer running is returned unchanged.
    """
    if not state.running:
        return state
    core = Core(image, state.copy(), hooks)
    core.step()
    return core.state
