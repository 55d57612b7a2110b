import itertools

import pytest

from thumbfi.assembler import parse
from thumbfi.benchmarks import load_benchmark
from thumbfi.isa import Condition, Imm, Instruction, IsaError, Offset, Reg, Special, SpecialRegister, Width

REGS = [Reg(i) for i in range(16)]
IMMS = [0, 1, 2, 3, 4, 7, 8, 12, 31, 32, 60, 124, 128, 200, 255, 256, 1020, 1024, 4092, 4095,
        0xFF00, 0x00FF00FF, 0xAB00AB00, 0xABABABAB, 0x3FC00, 0x80000000, 0xFF000000]
OFFSETS = [-4096, -1024, -256, -8, -4, -2, 0, 2, 4, 12, 40, 254, 256, 1020, 1024, 2046, 2048,
           4092, 4094, 1 << 19, -(1 << 20), (1 << 20) - 2, 1 << 22, -(1 << 24), (1 << 24) - 2]


def _candidates(mnemonic):
    if mnemonic == "nop":
        yield ()
    elif mnemonic in ("mov", "movs", "cmp"):
        for a, b in itertools.product(REGS, REGS):
            yield (a, b)
        for a in REGS:
            for v in IMMS:
                yield (a, Imm(v))
    elif mnemonic in ("add", "adds", "sub", "subs"):
        for a, b, c in itertools.product(REGS, REGS, REGS):
            yield (a, b, c)
        for a, b in itertools.product(REGS, REGS):
            for v in IMMS:
                yield (a, b, Imm(v))
    elif mnemonic in ("ldr_imm", "str_imm"):
        for a, b in itertools.product(REGS, REGS):
            for v in IMMS:
                yield (a, b, Imm(v))
    elif mnemonic in ("adr", "ldr_literal"):
        for a in REGS:
            for v in OFFSETS:
                yield (a, Offset(v))
    elif mnemonic in ("b", "b_cond", "bl"):
        for v in OFFSETS:
            yield (Offset(v),)
    elif mnemonic == "bx":
        for a in REGS:
            yield (a,)
    elif mnemonic == "msr":
        for s in SpecialRegister:
            for a in REGS:
                yield (Special(s), a)


def operand_grid(mnemonic):
    """Every well-formed instruction of the generated grid, at both widths."""
    conditions = [Condition.EQ, Condition.NE] if mnemonic == "b_cond" else [None]
    out = []
    for ops in _candidates(mnemonic):
        for cond in conditions:
            for width in Width:
                try:
                    out.append(Instruction(mnemonic, ops, width, cond))
                except IsaError:
                    pass
    return out


@pytest.fixture
def bench():
    return load_benchmark


@pytest.fixture
def program():
    return lambda name: parse(load_benchmark(name).source)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
