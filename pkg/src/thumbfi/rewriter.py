"""Assembly-level countermeasures: fault-tolerant replacement sequences and
duplicate-and-compare fault detection.

Both rewrites work on a :class:`~thumbfi.assembler.SourceProgram` and return
a new one. The scratch register is reserved program-wide; there is no
liveness analysis, so a program that already uses it is rejected.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace

from .assembler import Line, Mark, SourceProgram, Word, _placeholder, layout
from .encoding import EncodingError, encode, natural_width, source_mnemonic
from .isa import (
    LR, PC, Condition, Imm, Instruction, Label, Literal, Offset, Reg, Width,
    WRITES_REGISTER, parse_register,
)

log = logging.getLogger(__name__)


class RewriteError(Exception):
    pass


class Scheme(enum.Enum):
    FAULT_TOLERANCE = "ft"
    FAULT_DETECTION = "fd"


FD_COVERED = WRITES_REGISTER


@dataclass(frozen=True)
class RewritePlan:
    scheme: Scheme
    mnemonics: frozenset | None = None   # None: every instruction the scheme supports
    force_wide: bool = False
    scratch: Reg = Reg(1)

    def __post_init__(self):
        if isinstance(self.scratch, str):
            object.__setattr__(self, "scratch", parse_register(self.scratch))
        if self.mnemonics is not None:
            object.__setattr__(self, "mnemonics", frozenset(m.lower() for m in self.mnemonics))
        if self.scratch.index in (13, 14, 15):
            raise RewriteError(f"{self.scratch} cannot be a scratch register")

    def in_scope(self, instr: Instruction) -> bool:
        if self.mnemonics is None:
            return True
        names = {instr.mnemonic, source_mnemonic(instr)}
        if instr.is_halt:
            names = {"halt"}
        return bool(names & self.mnemonics)

    def describe(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "scope": "all" if self.mnemonics is None else sorted(self.mnemonics),
            "force_wide": self.force_wide,
            "scratch": str(self.scratch),
        }


def _registers(instr) -> set:
    return {op.index for op in instr.operands if isinstance(op, Reg)}


def widen(instr: Instruction) -> Instruction:
    """The 32-bit form of ``instr`` if one exists, else ``instr`` unchanged."""
    wide = instr.with_width(Width.WIDE)
    if instr.is_halt:
        return wide
    try:
        encode(_placeholder(wide))
    except EncodingError:
        return instr
    return wide


def _fit(instr: Instruction, like: Width) -> Instruction:
    """``instr`` at width ``like`` when encodable, else at its natural width."""
    natural = natural_width(instr)
    target = Width.WIDE if Width.WIDE in (like, natural) else Width.NARROW
    return widen(instr) if target is Width.WIDE else instr.with_width(Width.NARROW)


class _Rewriter:
    def __init__(self, program: SourceProgram, plan: RewritePlan):
        self.program = program
        self.plan = plan
        self.labels = set(program.labels)
        self.used = set()
        for line in program.lines:
            if isinstance(line.item, Instruction):
                self.used |= _registers(line.item)
        self.words: list[Line] = []       # shared literals appended after the code
        self.raw_pairs: list[tuple] = []  # (original, duplicate) indices into out
        self.out: list[Line] = []
        self.pending_label: str | None = None

    def fresh(self, stem: str) -> str:
        n = 0
        while f"{stem}{n}" in self.labels:
            n += 1
        name = f"{stem}{n}"
        self.labels.add(name)
        return name

    def scratch(self, instr: Instruction) -> Reg:
        reg = self.plan.scratch
        if reg.index in self.used:
            raise RewriteError(
                f"scratch register {reg} is used by the program "
                f"(needed for {source_mnemonic(instr)}); choose another scratch register")
        return reg

    def share_literal(self, instr: Instruction) -> Instruction:
        """Point a ``=value`` load at a labelled word both copies can read."""
        literal = instr.operands[1]
        if not isinstance(literal, Literal):
            return instr
        name = self.fresh("__lit")
        self.words.append(Line(Word(literal.value), (name,)))
        return instr.with_operands(instr.operands[0], Label(name))

    def emit(self, instrs, labels=(), lineno=None, comment=""):
        first = True
        for instr in instrs:
            if isinstance(instr, Mark):
                self.out.append(Line(instr, (self.pending_label,)))
                continue
            if self.plan.force_wide:
                instr = widen(instr)
            self.out.append(Line(instr, tuple(labels) if first else (), lineno,
                                 comment if first else ""))
            first = False
        if first and labels:
            self.out.append(Line(Mark(), tuple(labels), lineno))

    def passthrough(self, line: Line, widen_it: bool):
        item = line.item
        if widen_it and isinstance(item, Instruction):
            item = widen(item)
        self.out.append(replace(line, item=item))

    def finish(self) -> SourceProgram:
        program = SourceProgram(self.out + self.words, self.program.entry, self.program.error)
        if self.raw_pairs:
            program = self._rederive_offsets(program)
        return program

    def _rederive_offsets(self, program: SourceProgram) -> SourceProgram:
        image = layout(program)
        lines = list(program.lines)
        for i, j in self.raw_pairs:
            a1, a2 = image.line_addresses[i], image.line_addresses[j]
            target = ((a1 + 4) & ~3) + lines[i].item.operands[1].value
            dup_line = lines[j]
            dup = dup_line.item
            dup = dup.with_operands(dup.operands[0], Offset(target - ((a2 + 4) & ~3)))
            try:
                encode(dup)
            except EncodingError as exc:
                raise RewriteError(f"duplicated pc-relative load cannot reach {target:#x}: {exc}") from None
            lines[j] = replace(dup_line, item=dup)
        return SourceProgram(lines, program.entry, program.error)


# ---------------------------------------------------------------------------
# fault tolerance

def _ft_sequence(rw: _Rewriter, instr: Instruction) -> list:
    m, ops = instr.mnemonic, instr.operands
    if m == "bl":
        scratch = rw.scratch(instr)
        ret = rw.fresh("__ft_ret")
        rw.pending_label = ret
        return [
            _fit(Instruction("adr", (scratch, Label(ret))), Width.NARROW),
            _fit(Instruction("adr", (scratch, Label(ret))), Width.NARROW),
            # Thumb state needs bit 0 of the return address set
            _fit(Instruction("add", (Reg(LR), scratch, Imm(1))), Width.WIDE),
            _fit(Instruction("add", (Reg(LR), scratch, Imm(1))), Width.WIDE),
            Instruction("b", ops),
            Instruction("b", ops),
            Mark(),
        ]
    if m == "bx":
        if rw.plan.force_wide:
            # no 32-bit bx: keep the two copies in different fetch words
            return [instr, Instruction("nop"), instr]
        return [instr, instr]
    if m == "ldr_literal":
        if isinstance(ops[1], Offset):
            return [instr, instr]  # second offset re-derived after layout
        shared = rw.share_literal(instr)
        return [shared, shared]
    if m in ("add", "adds", "sub", "subs") and ops[0] in ops[1:]:
        scratch = rw.scratch(instr)
        compute = _fit(instr.with_operands(scratch, *ops[1:]), instr.width)
        move = _fit(Instruction("movs" if m.endswith("s") else "mov", (ops[0], scratch)),
                    instr.width)
        return [compute, compute, move, move]
    if m == "ldr_imm" and ops[0] == ops[1]:
        scratch = rw.scratch(instr)
        load = _fit(instr.with_operands(scratch, ops[1], ops[2]), instr.width)
        move = _fit(Instruction("mov", (ops[0], scratch)), instr.width)
        return [load, load, move, move]
    # mov/movs (idempotent even when rd == rm), adr, ldr/str, cmp, msr, branches, nop
    return [instr, instr]


def apply_fault_tolerance(program: SourceProgram, plan: RewritePlan) -> SourceProgram:
    """Replace each in-scope instruction with its single-skip tolerant sequence."""
    if plan.scheme is not Scheme.FAULT_TOLERANCE:
        plan = replace(plan, scheme=Scheme.FAULT_TOLERANCE)
    rw = _Rewriter(program, plan)
    for line in program.lines:
        instr = line.item
        if not isinstance(instr, Instruction) or not plan.in_scope(instr):
            rw.passthrough(line, widen_it=plan.force_wide)
            continue
        seq = _ft_sequence(rw, instr)
        rw.emit(seq, line.labels, line.lineno, line.comment)
        if instr.mnemonic == "ldr_literal" and isinstance(instr.operands[1], Offset):
            rw.raw_pairs.append((len(rw.out) - 2, len(rw.out) - 1))
    return rw.finish()


# ---------------------------------------------------------------------------
# fault detection

def apply_fault_detection(program: SourceProgram, plan: RewritePlan) -> SourceProgram:
    """Duplicate each covered instruction into the scratch register and
    branch to the error handler when the two results differ.

    Flags are clobbered by the inserted compare.
    """
    if plan.scheme is not Scheme.FAULT_DETECTION:
        plan = replace(plan, scheme=Scheme.FAULT_DETECTION)
    if not program.error:
        raise RewriteError("fault detection needs an error-handler label (.error)")
    rw = _Rewriter(program, plan)
    explicit = plan.mnemonics is not None
    start = program.labels[program.error]
    handler = {start}
    for index in range(start + 1, len(program.lines)):
        if program.lines[index].labels:
            break
        handler.add(index)
    for index, line in enumerate(program.lines):
        instr = line.item
        if not isinstance(instr, Instruction) or not plan.in_scope(instr):
            rw.passthrough(line, widen_it=plan.force_wide)
            continue
        if index in handler:
            rw.passthrough(line, widen_it=plan.force_wide)  # the handler is not protected
            continue
        if instr.mnemonic not in FD_COVERED:
            if explicit:
                raise RewriteError(
                    f"uncoverable mnemonic {source_mnemonic(instr)!r} (line {line.lineno}): "
                    "branches and flag users cannot be duplicated and compared")
            if not instr.is_halt:
                log.warning("fault detection leaves %s unprotected (line %s)",
                            source_mnemonic(instr), line.lineno)
            rw.passthrough(line, widen_it=plan.force_wide)
            continue
        scratch = rw.scratch(instr)
        dst = instr.operands[0]
        raw = instr.mnemonic == "ldr_literal" and isinstance(instr.operands[1], Offset)
        if instr.mnemonic == "ldr_literal":
            instr = rw.share_literal(instr)
        dup = _fit(instr.with_operands(scratch, *instr.operands[1:]), instr.width)
        check = [
            _fit(Instruction("cmp", (dst, scratch)), Width.NARROW),
            Instruction("b_cond", (Label(program.error),), condition=Condition.NE),
        ]
        reads_dst = dst in instr.operands[1:]
        pair = [dup, instr] if reads_dst else [instr, dup]
        rw.emit(pair + check, line.labels, line.lineno, line.comment)
        if raw:
            first, second = len(rw.out) - 4, len(rw.out) - 3
            rw.raw_pairs.append((second, first) if reads_dst else (first, second))
    return rw.finish()


def rewrite(program: SourceProgram, plan: RewritePlan) -> SourceProgram:
    if plan.scheme is Scheme.FAULT_TOLERANCE:
        return apply_fault_tolerance(program, plan)
    return apply_fault_detection(program, plan)


# ---------------------------------------------------------------------------
# fault-free equivalence

def _symbolic(value: int, image) -> str | None:
    for name, address in image.symbols.items():
        if value in (address, address | 1):
            return name
    return None


def state_differences(image_a, result_a, image_b, result_b, ignore=()) -> dict:
    """Observable registers and RAM words that differ between two runs.

    Code addresses are compared by the label they point at, so relocation
    caused by a rewrite is not reported. ``ignore`` lists register names.
    """
    if result_a.status is not result_b.status:
        return {"status": (result_a.status, result_b.status)}
    a, b = result_a.state.observable(), result_b.state.observable()
    for word in sorted({addr & ~3 for addr in result_a.state.memory}
                       | {addr & ~3 for addr in result_b.state.memory}):
        key = f"mem:0x{word:08x}"
        a[key], b[key] = result_a.state.read(key), result_b.state.read(key)

    def same_symbol(x, y):
        sym = _symbolic(x, image_a)
        return sym is not None and sym == _symbolic(y, image_b) and not sym.startswith("__")

    return {name: (a[name], b[name]) for name in a
            if name not in ignore and a[name] != b[name] and not same_symbol(a[name], b[name])}
