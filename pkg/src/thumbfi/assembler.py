"""Parser, layout and program-image model for the assembly subset.

Syntax, one statement per line::

    label:                      ; a bare identifier on its own line works too
        ldr   r0, =0xCAFECAFE   ; pool literal
        adr.w r1, return_label  ; .w forces the 32-bit encoding
        halt                    ; assembles to "b ." (branch to self)
        .word 0x12345678        ; 4-aligned data word (value or label)
        .align                  ; pad to a 4-byte boundary with nop
    .entry main                 ; entry label (default: first statement)
    .error error                ; error-handler label (default: a label "error")
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Union

from . import encoding
from .encoding import EncodingError, decode_halfwords, encode, format_instruction, natural_width
from .isa import (
    PC, Condition, Imm, Instruction, IsaError, Label, Literal, Offset, Reg, Special,
    SpecialRegister, Width, parse_register,
)


class AsmError(Exception):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message, self.line, self.column = message, line, column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class AsmSyntaxError(AsmError):
    pass


class LayoutError(AsmError):
    pass


@dataclass(frozen=True)
class Word:
    value: Union[int, str]


@dataclass(frozen=True)
class Align:
    pass


@dataclass(frozen=True)
class Mark:
    """Zero-size anchor for labels that end the program."""


Item = Union[Instruction, Word, Align, Mark]


@dataclass(frozen=True)
class Line:
    item: Item
    labels: tuple = ()
    lineno: int | None = None
    comment: str = ""


@dataclass
class SourceProgram:
    lines: list = field(default_factory=list)
    entry: str | None = None
    error: str | None = None

    @property
    def labels(self) -> dict:
        return {name: i for i, line in enumerate(self.lines) for name in line.labels}

    def instructions(self):
        return [line.item for line in self.lines if isinstance(line.item, Instruction)]

    def to_text(self) -> str:
        return emit(self)


# ---------------------------------------------------------------------------
# parsing

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_SPECIALS = {s.value: s for s in SpecialRegister}
_CONDITIONS = {"beq": Condition.EQ, "bne": Condition.NE}
_KNOWN = {
    "mov", "movs", "add", "adds", "sub", "subs", "adr", "ldr", "str", "cmp",
    "b", "bl", "bx", "msr", "nop", "halt", "beq", "bne",
}


def _int(text: str) -> int:
    return int(text.replace("_", ""), 0)


def _split_operands(text: str) -> list[str]:
    parts, depth, current = [], 0, ""
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(current.strip())
            current = ""
        else:
            current += ch
    if current.strip():
        parts.append(current.strip())
    return parts


def _operand(text: str):
    low = text.lower()
    if low.startswith("#"):
        return Imm(_int(low[1:]))
    if low.startswith("="):
        body = text[1:].strip()
        try:
            return Literal(_int(body) & 0xFFFFFFFF)
        except ValueError:
            if not _IDENT.match(body):
                raise IsaError(f"bad literal: {text!r}") from None
            return Literal(body)
    if low.startswith("["):
        if not low.endswith("]"):
            raise IsaError(f"unterminated memory operand: {text!r}")
        inner = _split_operands(text[1:-1])
        if len(inner) == 1:
            inner.append("#0")
        if len(inner) != 2 or not inner[1].startswith("#"):
            raise IsaError(f"bad memory operand: {text!r}")
        return (parse_register(inner[0]), Imm(_int(inner[1][1:])))
    if low in _SPECIALS:
        return Special(_SPECIALS[low])
    try:
        return parse_register(low)
    except IsaError:
        pass
    if text == "." or _IDENT.match(text):
        return Label(text)
    raise IsaError(f"bad operand: {text!r}")


def _build(name: str, ops: list) -> Instruction:
    if name == "halt":
        if ops:
            raise IsaError("halt takes no operands")
        return Instruction("b", (Label("."),))
    if name == "ldr":
        if len(ops) == 2 and isinstance(ops[1], tuple):
            base, imm = ops[1]
            if base.index == PC:
                return Instruction("ldr_literal", (ops[0], Offset(imm.value)))
            return Instruction("ldr_imm", (ops[0], base, imm))
        return Instruction("ldr_literal", tuple(ops))
    if name == "str":
        if len(ops) == 2 and isinstance(ops[1], tuple):
            return Instruction("str_imm", (ops[0], *ops[1]))
        raise IsaError("str needs a [rn, #imm] operand")
    if name in _CONDITIONS:
        ops = [Offset(op.value) if isinstance(op, Imm) else op for op in ops]
        return Instruction("b_cond", tuple(ops), condition=_CONDITIONS[name])
    if name in ("b", "bl", "adr"):
        ops = [Offset(op.value) if isinstance(op, Imm) else op for op in ops]
    if name in ("add", "adds", "sub", "subs") and len(ops) == 2:
        ops = [ops[0], ops[0], ops[1]]
    if any(isinstance(op, tuple) for op in ops):
        raise IsaError(f"{name} takes no memory operand")
    return Instruction(name, tuple(ops))


def _placeholder(instr: Instruction) -> Instruction:
    ops = tuple(Offset(0) if isinstance(op, (Label, Literal)) and str(op) != "." else op
                for op in instr.operands)
    return instr.with_operands(*ops)


def parse_instruction(text: str) -> Instruction:
    """Parse one instruction statement (no label, no comment)."""
    text = text.strip()
    head, _, rest = text.partition(" ")
    head = head.lower()
    forced = None
    if head.endswith((".w", ".n")):
        forced = Width.WIDE if head.endswith(".w") else Width.NARROW
        head = head[:-2]
    if head not in _KNOWN:
        raise IsaError(f"unknown mnemonic: {head}")
    instr = _build(head, [_operand(op) for op in _split_operands(rest)])
    natural = natural_width(instr)
    width = forced or natural
    if width is Width.NARROW and natural is Width.WIDE:
        raise EncodingError(f"{text}: no 16-bit encoding for these operands")
    instr = instr.with_width(width)
    if instr.is_halt:
        return instr
    try:
        encode(_placeholder(instr))
    except EncodingError as exc:
        raise EncodingError(f"{text}: {exc}") from None
    return instr


def parse(source: str) -> SourceProgram:
    program = SourceProgram()
    pending: list[str] = []
    seen: dict[str, int] = {}

    def add_label(name, lineno, col):
        if not _IDENT.match(name):
            raise AsmSyntaxError(f"bad label name {name!r}", lineno, col)
        if name in seen:
            raise AsmSyntaxError(f"duplicate label {name!r} (first defined on line {seen[name]})",
                                 lineno, col)
        seen[name] = lineno
        pending.append(name)

    for lineno, raw in enumerate(source.splitlines(), 1):
        body, _, comment = raw.partition(";")
        stripped = body.strip()
        if not stripped:
            continue
        col = len(body) - len(body.lstrip()) + 1
        match = re.match(r"([A-Za-z_][A-Za-z0-9_]*)\s*:", stripped)
        if match:
            add_label(match.group(1), lineno, col)
            stripped = stripped[match.end():].strip()
            if not stripped:
                continue
        head = stripped.split()[0].lower()
        if head.startswith("."):
            args = stripped.split(None, 1)[1].strip() if " " in stripped else ""
            if head in (".entry", ".error"):
                if not _IDENT.match(args):
                    raise AsmSyntaxError(f"{head} needs a label", lineno, col)
                setattr(program, head[1:], args)
            elif head == ".word":
                try:
                    value = _int(args) & 0xFFFFFFFF
                except ValueError:
                    if not _IDENT.match(args):
                        raise AsmSyntaxError(f"bad .word value {args!r}", lineno, col) from None
                    value = args
                program.lines.append(Line(Word(value), tuple(pending), lineno, comment.strip()))
                pending = []
            elif head == ".align":
                program.lines.append(Line(Align(), tuple(pending), lineno, comment.strip()))
                pending = []
            else:
                raise AsmSyntaxError(f"unknown directive {head}", lineno, col)
            continue
        if _IDENT.match(stripped) and stripped.lower() not in _KNOWN:
            add_label(stripped, lineno, col)  # bare label line
            continue
        try:
            instr = parse_instruction(stripped)
        except IsaError as exc:
            raise AsmSyntaxError(str(exc), lineno, col) from None
        program.lines.append(Line(instr, tuple(pending), lineno, comment.strip()))
        pending = []
    if pending:
        # trailing labels mark the end of the program
        program.lines.append(Line(Mark(), tuple(pending), None))

    if program.error is None and "error" in seen:
        program.error = "error"
    check_labels(program)
    return program


def referenced_labels(item) -> list[str]:
    if isinstance(item, Word):
        return [item.value] if isinstance(item.value, str) else []
    if not isinstance(item, Instruction):
        return []
    names = []
    for op in item.operands:
        if isinstance(op, Label) and op.name != ".":
            names.append(op.name)
        elif isinstance(op, Literal) and isinstance(op.value, str):
            names.append(op.value)
    return names


def check_labels(program: SourceProgram):
    defined = program.labels
    for line in program.lines:
        for name in referenced_labels(line.item):
            if name not in defined:
                raise AsmSyntaxError(f"undefined label {name!r}", line.lineno)
    for attr in ("entry", "error"):
        name = getattr(program, attr)
        if name is not None and name not in defined:
            raise AsmSyntaxError(f"undefined label {name!r} for .{attr}")


# ---------------------------------------------------------------------------
# layout

@dataclass
class ProgramImage:
    base: int
    code: bytes
    pool: list            # [(address, value)]
    symbols: dict         # label -> address
    instructions: dict    # address -> laid-out Instruction
    entry: int
    error_address: int | None = None
    data: dict = field(default_factory=dict)  # address -> kind ("word"/"pad"/"pool")
    lines: dict = field(default_factory=dict)  # address -> source line number
    line_addresses: list = field(default_factory=list)  # per SourceProgram line

    @property
    def end(self) -> int:
        return self.base + len(self.code)

    @property
    def digest(self) -> str:
        """SHA-256 of the image bytes."""
        return hashlib.sha256(self.code).hexdigest()

    def contains(self, address: int) -> bool:
        return self.base <= address < self.end

    def read_bytes(self, address: int, count: int) -> bytes | None:
        """Image bytes; ``None`` when the range leaves the image."""
        if not (self.contains(address) and address + count <= self.end):
            return None
        off = address - self.base
        return self.code[off:off + count]

    def fetch_word(self, aligned: int) -> int | None:
        """The 32-bit fetch word at an aligned address; erased flash reads 0xFF."""
        if not self.contains(aligned):
            return None
        off = aligned - self.base
        chunk = self.code[off:off + 4].ljust(4, b"\xff")
        return int.from_bytes(chunk, "little")

    def symbol_at(self, address: int) -> str | None:
        for name, addr in sorted(self.symbols.items()):
            if addr == address:
                return name
        return None

    def dump(self) -> str:
        return dump_image(self)


def _resolve(instr: Instruction, address: int, symbols: dict, literal_address: int | None):
    ops = []
    for op in instr.operands:
        if isinstance(op, Literal):
            op = Label("\0literal")
        if isinstance(op, Label):
            if op.name == ".":
                target = address
            elif op.name == "\0literal":
                target = literal_address
            else:
                target = symbols[op.name]
            if instr.mnemonic in ("adr", "ldr_literal"):
                if instr.mnemonic == "ldr_literal" and target % 4:
                    raise EncodingError(f"misaligned literal at {target:#x}")
                op = Offset(target - ((address + 4) & ~3))
            else:
                op = Offset(target - (address + 4))
        ops.append(op)
    return instr.with_operands(*ops)


def layout(program: SourceProgram, base: int = 0) -> ProgramImage:
    """Assign addresses, place the literal pool and encode every instruction.

    The declared width is never changed: an offset that does not fit is an
    error, not a reason to widen.
    """
    if base % 2:
        raise LayoutError(f"base address {base:#x} is not halfword aligned")
    symbols: dict[str, int] = {}
    placed = []
    line_addresses = []
    addr = base
    for line in program.lines:
        item = line.item
        if isinstance(item, (Word, Align)) and addr % 4:
            placed.append((addr, "pad", line))
            addr += 2
        line_addresses.append(addr)
        for name in line.labels:
            symbols[name] = addr
        if isinstance(item, Instruction):
            placed.append((addr, item, line))
            addr += item.size
        elif isinstance(item, Word):
            placed.append((addr, item, line))
            addr += 4

    literals = [(a, item, line) for a, item, line in placed
                if isinstance(item, Instruction) and any(isinstance(op, Literal) for op in item.operands)]
    pool_start = addr
    if literals and pool_start % 4:
        placed.append((pool_start, "pad", None))
        pool_start += 2
    pool_addresses = {}
    for i, (a, item, line) in enumerate(literals):
        pool_addresses[a] = pool_start + 4 * i

    def value_of(v, line):
        if isinstance(v, int):
            return v
        return symbols[v]

    code = bytearray()
    instructions, data, lines = {}, {}, {}
    pool = []
    for a, item, line in placed:
        assert a == base + len(code)
        lineno = line.lineno if line is not None else None
        if item == "pad":
            code += encoding.NOP16.to_bytes(2, "little")
            data[a] = "pad"
            continue
        if isinstance(item, Word):
            code += value_of(item.value, line).to_bytes(4, "little")
            data[a] = "word"
            lines[a] = lineno
            continue
        try:
            resolved = _resolve(item, a, symbols, pool_addresses.get(a))
            code += encode(resolved)
        except (EncodingError, KeyError) as exc:
            raise LayoutError(f"{format_instruction(item)}: {exc}", lineno) from None
        instructions[a] = resolved
        lines[a] = lineno
    for a, item, line in literals:
        literal = next(op for op in item.operands if isinstance(op, Literal))
        value = value_of(literal.value, line)
        pool.append((pool_addresses[a], value))
        data[pool_addresses[a]] = "pool"
        code += value.to_bytes(4, "little")

    entry = symbols[program.entry] if program.entry else base
    error = symbols[program.error] if program.error else None
    return ProgramImage(base, bytes(code), pool, symbols, instructions, entry, error,
                        data, lines, line_addresses)


def assemble(source: str, base: int = 0) -> ProgramImage:
    return layout(parse(source), base)


# ---------------------------------------------------------------------------
# text output

def emit(program: SourceProgram) -> str:
    """Assembly text for a program; ``parse(emit(p))`` reproduces ``p``."""
    out = []
    if program.entry:
        out.append(f".entry {program.entry}")
    if program.error:
        out.append(f".error {program.error}")
    for line in program.lines:
        for name in line.labels:
            out.append(f"{name}:")
        item = line.item
        if isinstance(item, Instruction):
            text = "    " + format_instruction(item)
        elif isinstance(item, Word):
            value = item.value if isinstance(item.value, str) else f"0x{item.value:08X}"
            text = f"    .word {value}"
        elif isinstance(item, Mark):
            continue
        else:
            text = "    .align"
        if line.comment:
            text = f"{text:<32}; {line.comment}"
        out.append(text)
    return "\n".join(out) + "\n"


def dump_image(image: ProgramImage) -> str:
    error = f"0x{image.error_address:08x}" if image.error_address is not None else "-"
    out = [f"; image base=0x{image.base:08x} entry=0x{image.entry:08x} error={error}"]
    addr = image.base
    while addr < image.end:
        kind = image.data.get(addr)
        if kind in ("word", "pool"):
            raw = image.code[addr - image.base:addr - image.base + 4]
            out.append(f"{addr:08x}: {raw.hex():<8}  ; .word 0x{int.from_bytes(raw, 'little'):08x}")
            addr += 4
            continue
        instr = image.instructions.get(addr)
        size = instr.size if instr is not None else 2
        raw = image.code[addr - image.base:addr - image.base + size]
        text = format_instruction(instr, addr) if instr is not None else "nop  ; padding"
        out.append(f"{addr:08x}: {raw.hex():<8}  ; {text}")
        addr += size
    out.append("[symbols]")
    for name, addr in sorted(image.symbols.items(), key=lambda kv: (kv[1], kv[0])):
        out.append(f"{addr:08x} {name}")
    return "\n".join(out) + "\n"


def load_image(text: str) -> ProgramImage:
    """Rebuild a :class:`ProgramImage` from :func:`dump_image` output."""
    lines = text.splitlines()
    header = re.match(r"; image base=(\S+) entry=(\S+) error=(\S+)", lines[0] if lines else "")
    if not header:
        raise AsmSyntaxError("not an image dump", 1)
    base, entry = int(header.group(1), 16), int(header.group(2), 16)
    error = None if header.group(3) == "-" else int(header.group(3), 16)
    code = bytearray()
    instructions, data, symbols, pool = {}, {}, {}, []
    in_symbols = False
    for lineno, line in enumerate(lines[1:], 2):
        if line.strip() == "[symbols]":
            in_symbols = True
            continue
        if in_symbols:
            addr, name = line.split()
            symbols[name] = int(addr, 16)
            continue
        match = re.match(r"([0-9a-f]{8}): ([0-9a-f]+)\s*; (.*)$", line)
        if not match:
            raise AsmSyntaxError(f"bad image line {line!r}", lineno)
        addr, raw, text = int(match.group(1), 16), bytes.fromhex(match.group(2)), match.group(3)
        if addr != base + len(code):
            raise AsmSyntaxError("non-contiguous image", lineno)
        code += raw
        if text.startswith(".word"):
            data[addr] = "word"
            continue
        if text.endswith("padding"):
            data[addr] = "pad"
            continue
        halfwords = [int.from_bytes(raw[i:i + 2], "little") for i in range(0, len(raw), 2)]
        instructions[addr] = decode_halfwords(*halfwords)
    return ProgramImage(base, bytes(code), pool, symbols, instructions, entry, error, data)


def read_program(text: str):
    """Accept either assembly source or an image dump."""
    if text.lstrip().startswith("; image base="):
        return load_image(text.lstrip())
    return assemble(text)
