"""Instruction subset, register names and machine-state model.

Everything here is plain data. The encoder/decoder lives in
:mod:`thumbfi.encoding`, the executor in :mod:`thumbfi.simulator`.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from typing import Union

MASK32 = 0xFFFFFFFF

SP, LR, PC = 13, 14, 15

REGISTER_NAMES = {i: f"r{i}" for i in range(13)}
REGISTER_NAMES.update({SP: "sp", LR: "lr", PC: "pc"})

_REGISTER_ALIASES = {name: idx for idx, name in REGISTER_NAMES.items()}
_REGISTER_ALIASES.update({"r13": SP, "r14": LR, "r15": PC, "ip": 12})

# Initial register file values
RESET_SP = 0x20000F00
RESET_LR = 0xFFFFFFF9

RAM_BASE = 0x20000000
RAM_SIZE = 0x2000


class IsaError(ValueError):
    """An instruction violates the subset's operand rules."""


class Width(enum.Enum):
    NARROW = 16
    WIDE = 32

    @property
    def size(self) -> int:
        return self.value // 8


class SpecialRegister(enum.Enum):
    CONTROL = "control"
    PSP = "psp"
    BASEPRI = "basepri"


# SYSm field values used by the msr encoding.
SYSM = {SpecialRegister.PSP: 9, SpecialRegister.BASEPRI: 17, SpecialRegister.CONTROL: 20}


class ExceptionKind(enum.Enum):
    UNDEFINED_INSTRUCTION = "UndefinedInstruction"
    UNSUPPORTED_INSTRUCTION = "UnsupportedInstruction"
    UNALIGNED_ACCESS = "UnalignedAccess"
    MEMORY_FAULT = "MemoryFault"


class Condition(enum.Enum):
    EQ = 0
    NE = 1


@dataclass(frozen=True)
class Reg:
    index: int

    def __post_init__(self):
        if not 0 <= self.index <= 15:
            raise IsaError(f"register index out of range: {self.index}")

    @property
    def low(self) -> bool:
        return self.index < 8

    def __str__(self):
        return REGISTER_NAMES[self.index]


@dataclass(frozen=True)
class Special:
    reg: SpecialRegister

    def __str__(self):
        return self.reg.value


@dataclass(frozen=True)
class Imm:
    value: int

    def __str__(self):
        return f"#{self.value}"


@dataclass(frozen=True)
class Label:
    """Symbolic code/data reference; ``"."`` means the instruction itself."""

    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Literal:
    """``=value`` pool literal. ``value`` is an int or a label name."""

    value: Union[int, str]

    def __str__(self):
        if isinstance(self.value, int):
            return f"=0x{self.value:08X}"
        return f"={self.value}"


@dataclass(frozen=True)
class Offset:
    """Resolved PC-relative byte offset."""

    value: int

    def __str__(self):
        return f"#{self.value}"


Operand = Union[Reg, Special, Imm, Label, Literal, Offset]


def parse_register(text: str) -> Reg:
    try:
        return Reg(_REGISTER_ALIASES[text.strip().lower()])
    except KeyError:
        raise IsaError(f"not a register: {text!r}") from None


MNEMONICS = (
    "mov", "movs", "add", "adds", "sub", "subs", "adr", "ldr_literal",
    "ldr_imm", "str_imm", "cmp", "b_cond", "b", "bl", "bx", "msr", "nop",
)

# Operand kind signatures; several mnemonics have a register and an
# immediate form.
_TARGET = (Label, Offset)
SIGNATURES = {
    "mov": [(Reg, Reg), (Reg, Imm)],
    "movs": [(Reg, Reg), (Reg, Imm)],
    "add": [(Reg, Reg, Reg), (Reg, Reg, Imm)],
    "adds": [(Reg, Reg, Reg), (Reg, Reg, Imm)],
    "sub": [(Reg, Reg, Reg), (Reg, Reg, Imm)],
    "subs": [(Reg, Reg, Reg), (Reg, Reg, Imm)],
    "adr": [(Reg, _TARGET)],
    "ldr_literal": [(Reg, (Label, Literal, Offset))],
    "ldr_imm": [(Reg, Reg, Imm)],
    "str_imm": [(Reg, Reg, Imm)],
    "cmp": [(Reg, Reg), (Reg, Imm)],
    "b_cond": [(_TARGET,)],
    "b": [(_TARGET,)],
    "bl": [(_TARGET,)],
    "bx": [(Reg,)],
    "msr": [(Special, Reg)],
    "nop": [()],
}

# Mnemonics whose first operand is a destination register.
WRITES_REGISTER = {
    "mov", "movs", "add", "adds", "sub", "subs", "adr", "ldr_literal", "ldr_imm",
}
BRANCHES = {"b_cond", "b", "bl", "bx"}
SETS_FLAGS = {"movs", "adds", "subs", "cmp"}


def _matches(operands, signature) -> bool:
    if len(operands) != len(signature):
        return False
    return all(isinstance(op, kind) for op, kind in zip(operands, signature))


@dataclass(frozen=True)
class Instruction:
    """One subset instruction with its encoding width.

    Source-level instructions may reference labels; laid-out instructions
    carry resolved :class:`Offset` operands instead.
    """

    mnemonic: str
    operands: tuple = ()
    width: Width = Width.NARROW
    condition: Condition | None = None

    def __post_init__(self):
        if self.mnemonic not in SIGNATURES:
            raise IsaError(f"unknown mnemonic: {self.mnemonic}")
        if not any(_matches(self.operands, sig) for sig in SIGNATURES[self.mnemonic]):
            kinds = ", ".join(type(op).__name__ for op in self.operands)
            raise IsaError(f"bad operands for {self.mnemonic}: ({kinds})")
        if (self.mnemonic == "b_cond") != (self.condition is not None):
            raise IsaError("condition is required for b_cond and only for b_cond")
        if self.mnemonic in WRITES_REGISTER and self.operands[0].index == PC:
            raise IsaError(f"{self.mnemonic} may not write pc")
        if self.mnemonic == "msr" and self.operands[1].index in (SP, PC):
            raise IsaError("msr source may not be sp or pc")

    @property
    def size(self) -> int:
        return self.width.size

    @property
    def is_halt(self) -> bool:
        """``b .``: a branch to itself is the halt sentinel."""
        if self.mnemonic != "b":
            return False
        target = self.operands[0]
        if isinstance(target, Label):
            return target.name == "."
        return target.value == -4

    def with_width(self, width: Width) -> "Instruction":
        return Instruction(self.mnemonic, self.operands, width, self.condition)

    def with_operands(self, *operands) -> "Instruction":
        return Instruction(self.mnemonic, tuple(operands), self.width, self.condition)

    def __str__(self):
        from .encoding import format_instruction

        return format_instruction(self)


class Status(enum.Enum):
    RUNNING = "Running"
    HALTED = "Halted"
    EXCEPTION = "Exception"
    TIMEOUT = "Timeout"


@dataclass
class MachineState:
    regs: list = field(default_factory=lambda: [0] * 16)
    specials: dict = field(default_factory=lambda: {s: 0 for s in SpecialRegister})
    flags: dict = field(default_factory=lambda: dict(N=False, Z=False, C=False, V=False))
    memory: dict = field(default_factory=dict)  # RAM writes only, address -> byte
    status: Status = Status.RUNNING
    exception: ExceptionKind | None = None
    faulting_address: int | None = None

    @property
    def pc(self) -> int:
        return self.regs[PC]

    @pc.setter
    def pc(self, value: int):
        self.regs[PC] = value & MASK32

    @property
    def running(self) -> bool:
        return self.status is Status.RUNNING

    def copy(self) -> "MachineState":
        return copy.deepcopy(self)

    def stop(self, status: Status, kind: ExceptionKind | None = None, address: int | None = None):
        if not self.running:
            return
        self.status = status
        self.exception = kind
        self.faulting_address = address

    def read(self, name: str) -> int:
        """Read a register, special register or ``mem:ADDR`` word by name."""
        name = name.strip().lower()
        if name.startswith("mem:"):
            address = int(name[4:], 0)
            return int.from_bytes(bytes(self.memory.get(address + i, 0) for i in range(4)), "little")
        for special in SpecialRegister:
            if special.value == name:
                return self.specials[special]
        return self.regs[parse_register(name).index]

    def observable(self) -> dict:
        """Register-file values compared when looking for faulty outputs."""
        values = {REGISTER_NAMES[i]: self.regs[i] for i in range(15)}
        values.update({s.value: v for s, v in self.specials.items()})
        return values


def initial_state(entry: int) -> MachineState:
    state = MachineState()
    state.regs[SP] = RESET_SP
    state.regs[LR] = RESET_LR
    state.pc = entry
    return state


def hamming_weight(value: int) -> int:
    return bin(value & MASK32).count("1")
