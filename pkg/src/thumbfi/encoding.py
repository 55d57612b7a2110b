"""Thumb-2 encoder/decoder for the instruction subset.

Encodings follow the ARMv7-M reference tables. Where the architecture
offers several encodings for one instruction the canonical choice is:

* ``adds/subs rd, rn, #imm`` narrow: T2 (imm8) when ``rd == rn``, else T1 (imm3).
* ``cmp rn, rm`` narrow: T1 when both registers are low, else T2.
* ``add/sub/cmp/mov`` wide immediates: the modified-immediate (T3/T2) forms.
* ``adr.w``: T3 (forward) for offsets >= 0, T2 (backward) otherwise.
* ``ldr``/``str`` wide: T3 (positive imm12); ``ldr.w`` literal: T2.
* narrow ``nop`` is ``0xBF00``, wide is ``0xF3AF 0x8000``.

Anything that is not a subset encoding is classified with a coarse validity
predicate built from the top-level decode tables (major opcode fields only),
so a handful of encodings that a full decoder would reject as
UNPREDICTABLE are counted as valid-but-unsupported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .isa import (
    LR, MASK32, PC, SP, SYSM, Condition, Imm, Instruction, IsaError, Label, Literal,
    Offset, Reg, Special, SpecialRegister, Width,
)


class EncodingError(IsaError):
    """The instruction has no encoding at its declared width."""


NOP16 = 0xBF00
NOP32 = (0xF3AF, 0x8000)
WIDE_PREFIXES = (0b11101, 0b11110, 0b11111)


@dataclass(frozen=True)
class UnsupportedInstruction:
    """Valid in the architecture's decode tables but outside the subset."""

    halfwords: tuple

    @property
    def size(self):
        return 2 * len(self.halfwords)


@dataclass(frozen=True)
class UndefinedInstruction:
    halfwords: tuple

    @property
    def size(self):
        return 2 * len(self.halfwords)


@dataclass(frozen=True)
class Straddle:
    """A wide prefix in the upper halfword; its tail lives in the next word."""

    halfword: int

    @property
    def size(self):
        return 2


def is_wide_prefix(halfword: int) -> bool:
    return (halfword >> 11) in WIDE_PREFIXES


def _sext(value: int, bits: int) -> int:
    sign = 1 << (bits - 1)
    return (value & (sign - 1)) - (value & sign)


# ---------------------------------------------------------------------------
# modified immediates (ThumbExpandImm)

def expand_imm(imm12: int) -> int | None:
    """Decode a 12-bit modified immediate; ``None`` for UNPREDICTABLE forms."""
    imm8 = imm12 & 0xFF
    if imm12 >> 10 == 0:
        pattern = (imm12 >> 8) & 3
        if pattern != 0 and imm8 == 0:
            return None
        return [imm8, imm8 * 0x00010001, imm8 * 0x01000100, imm8 * 0x01010101][pattern]
    unrotated = 0x80 | (imm12 & 0x7F)
    rot = imm12 >> 7
    return ((unrotated >> rot) | (unrotated << (32 - rot))) & MASK32


def encode_modified_imm(value: int) -> int | None:
    value &= MASK32
    if value < 0x100:
        return value
    low = value & 0xFF
    if value == low * 0x00010001:
        return 0x100 | low
    if value == (value >> 8 & 0xFF) * 0x01000100:
        return 0x200 | (value >> 8 & 0xFF)
    if value == low * 0x01010101:
        return 0x300 | low
    for rot in range(8, 32):
        unrotated = ((value << rot) | (value >> (32 - rot))) & MASK32
        if unrotated <= 0xFF and unrotated & 0x80:
            return (rot << 7) | (unrotated & 0x7F)
    return None


def _split_imm12(imm12: int) -> tuple[int, int]:
    """Place i:imm3:imm8 into (hw1 bits, hw2 bits)."""
    return (imm12 >> 11) << 10, ((imm12 >> 8) & 7) << 12 | (imm12 & 0xFF)


def _join_imm12(hw1: int, hw2: int) -> int:
    return ((hw1 >> 10) & 1) << 11 | ((hw2 >> 12) & 7) << 8 | (hw2 & 0xFF)


# ---------------------------------------------------------------------------
# encoding

def _halfwords_to_bytes(*halfwords: int) -> bytes:
    return b"".join(hw.to_bytes(2, "little") for hw in halfwords)


def natural_width(instr: Instruction) -> Width:
    """Width the operands allow by default: narrow unless impossible."""
    try:
        _encode_narrow(instr.with_width(Width.NARROW), check_ranges=False)
        return Width.NARROW
    except EncodingError:
        return Width.WIDE


def encode(instr: Instruction) -> bytes:
    """Encode a laid-out instruction into 2 or 4 little-endian bytes."""
    if instr.width is Width.NARROW:
        return _halfwords_to_bytes(_encode_narrow(instr))
    return _halfwords_to_bytes(*_encode_wide(instr))


def encode_halfwords(instr: Instruction) -> tuple:
    data = encode(instr)
    return tuple(int.from_bytes(data[i:i + 2], "little") for i in range(0, len(data), 2))


def _offset(instr: Instruction, op) -> int:
    if isinstance(op, Offset):
        return op.value
    if isinstance(op, Label) and op.name == ".":
        return -4
    raise EncodingError(f"unresolved operand {op} in {instr.mnemonic}")


def _fail(instr, why):
    raise EncodingError(f"{instr.mnemonic} {', '.join(map(str, instr.operands))}: {why}")


def _encode_narrow(instr: Instruction, check_ranges: bool = True) -> int:
    m, ops = instr.mnemonic, instr.operands
    low = all(op.low for op in ops if isinstance(op, Reg))

    def ranged(value, lo, hi, step=1):
        if check_ranges and not (lo <= value <= hi and value % step == 0):
            _fail(instr, f"offset {value} out of narrow range")
        return value

    if m == "nop":
        return NOP16
    if m == "movs":
        rd, src = ops
        if not low:
            _fail(instr, "narrow movs needs low registers")
        if isinstance(src, Imm):
            if not 0 <= src.value <= 0xFF:
                _fail(instr, "immediate does not fit 8 bits")
            return 0x2000 | rd.index << 8 | src.value
        return src.index << 3 | rd.index
    if m == "mov":
        rd, src = ops
        if isinstance(src, Imm):
            _fail(instr, "mov immediate has no narrow encoding")
        return 0x4600 | (rd.index >> 3) << 7 | src.index << 3 | (rd.index & 7)
    if m in ("adds", "subs"):
        rd, rn, src = ops
        if not low:
            _fail(instr, "narrow flag-setting arithmetic needs low registers")
        if isinstance(src, Reg):
            base = 0x1800 if m == "adds" else 0x1A00
            return base | src.index << 6 | rn.index << 3 | rd.index
        if rd == rn and 0 <= src.value <= 0xFF:
            base = 0x3000 if m == "adds" else 0x3800
            return base | rd.index << 8 | src.value
        if 0 <= src.value <= 7:
            base = 0x1C00 if m == "adds" else 0x1E00
            return base | src.value << 6 | rn.index << 3 | rd.index
        _fail(instr, "immediate out of narrow range")
    if m == "add":
        rd, rn, src = ops
        if isinstance(src, Imm) or rd != rn:
            _fail(instr, "narrow add requires add rdn, rm")
        if rd.index == PC or (src.index == PC and rd.index == PC):
            _fail(instr, "pc destination")
        return 0x4400 | (rd.index >> 3) << 7 | src.index << 3 | (rd.index & 7)
    if m == "sub":
        _fail(instr, "sub without flags has no narrow encoding")
    if m == "adr":
        rd, target = ops
        if not low:
            _fail(instr, "narrow adr needs a low register")
        offset = ranged(_offset(instr, target) if check_ranges else 0, 0, 1020, 4)
        return 0xA000 | rd.index << 8 | offset >> 2
    if m == "ldr_literal":
        rt, target = ops
        if not low:
            _fail(instr, "narrow ldr needs a low register")
        offset = ranged(_offset(instr, target) if check_ranges else 0, 0, 1020, 4)
        return 0x4800 | rt.index << 8 | offset >> 2
    if m in ("ldr_imm", "str_imm"):
        rt, rn, imm = ops
        load = m == "ldr_imm"
        if rt.low and rn.low and 0 <= imm.value <= 124 and imm.value % 4 == 0:
            return (0x6800 if load else 0x6000) | imm.value >> 2 << 6 | rn.index << 3 | rt.index
        if rt.low and rn.index == SP and 0 <= imm.value <= 1020 and imm.value % 4 == 0:
            return (0x9800 if load else 0x9000) | rt.index << 8 | imm.value >> 2
        _fail(instr, "operands need a wide encoding")
    if m == "cmp":
        rn, src = ops
        if isinstance(src, Imm):
            if rn.low and 0 <= src.value <= 0xFF:
                return 0x2800 | rn.index << 8 | src.value
            _fail(instr, "immediate compare needs a wide encoding")
        if rn.low and src.low:
            return 0x4280 | src.index << 3 | rn.index
        if rn.index == PC or src.index == PC:
            _fail(instr, "pc operand")
        return 0x4500 | (rn.index >> 3) << 7 | src.index << 3 | (rn.index & 7)
    if m == "b_cond":
        offset = ranged(_offset(instr, ops[0]) if check_ranges else 0, -256, 254, 2)
        return 0xD000 | instr.condition.value << 8 | (offset >> 1) & 0xFF
    if m == "b":
        offset = ranged(_offset(instr, ops[0]) if check_ranges else 0, -2048, 2046, 2)
        return 0xE000 | (offset >> 1) & 0x7FF
    if m == "bx":
        return 0x4700 | ops[0].index << 3
    # bl, msr
    _fail(instr, "no 16-bit encoding")


def _encode_wide(instr: Instruction) -> tuple[int, int]:
    m, ops = instr.mnemonic, instr.operands

    def modimm(value):
        imm12 = encode_modified_imm(value)
        if imm12 is None:
            _fail(instr, f"{value:#x} is not a modified immediate")
        return _split_imm12(imm12)

    if m == "nop":
        return NOP32
    if m in ("mov", "movs"):
        rd, src = ops
        if rd.index == SP:
            _fail(instr, "mov.w to sp is unpredictable")
        s = 1 << 4 if m == "movs" else 0
        if isinstance(src, Imm):
            lo, hi = modimm(src.value)
            return 0xF04F | s | lo, rd.index << 8 | hi
        if src.index in (SP, PC):
            _fail(instr, "mov.w from sp/pc is unpredictable")
        return 0xEA4F | s, rd.index << 8 | src.index
    if m in ("add", "adds", "sub", "subs"):
        rd, rn, src = ops
        s = 1 << 4 if m.endswith("s") else 0
        op = 0x8 if m.startswith("add") else 0xD
        if rn.index == PC or rd.index == SP and rn.index != SP:
            _fail(instr, "unsupported register combination")
        if isinstance(src, Imm):
            lo, hi = modimm(src.value)
            return 0xF000 | op << 5 | s | lo | rn.index, rd.index << 8 | hi
        if src.index in (SP, PC):
            _fail(instr, "sp/pc as second operand")
        return 0xEA00 | op << 5 | s | rn.index, rd.index << 8 | src.index
    if m == "cmp":
        rn, src = ops
        if rn.index == PC:
            _fail(instr, "pc operand")
        if isinstance(src, Imm):
            lo, hi = modimm(src.value)
            return 0xF1B0 | lo | rn.index, 0x0F00 | hi
        if src.index in (SP, PC):
            _fail(instr, "sp/pc as second operand")
        return 0xEBB0 | rn.index, 0x0F00 | src.index
    if m == "adr":
        rd, target = ops
        offset = _offset(instr, target)
        if not -4095 <= offset <= 4095:
            _fail(instr, f"offset {offset} out of wide range")
        if rd.index == SP:
            _fail(instr, "adr to sp is unpredictable")
        lo, hi = _split_imm12(abs(offset))
        base = 0xF20F if offset >= 0 else 0xF2AF
        return base | lo, rd.index << 8 | hi
    if m == "ldr_literal":
        rt, target = ops
        offset = _offset(instr, target)
        if not -4095 <= offset <= 4095:
            _fail(instr, f"offset {offset} out of wide range")
        return 0xF85F | (offset >= 0) << 7, rt.index << 12 | abs(offset)
    if m in ("ldr_imm", "str_imm"):
        rt, rn, imm = ops
        if rn.index == PC or not 0 <= imm.value <= 0xFFF:
            _fail(instr, "operands out of wide range")
        if rt.index == PC:
            _fail(instr, "str of pc is unpredictable")
        return (0xF8D0 if m == "ldr_imm" else 0xF8C0) | rn.index, rt.index << 12 | imm.value
    if m in ("b", "bl"):
        offset = _offset(instr, ops[0])
        if not -(1 << 24) <= offset < (1 << 24) or offset % 2:
            _fail(instr, f"offset {offset} out of wide range")
        value = offset & 0x1FFFFFF
        s, i1, i2 = value >> 24, (value >> 23) & 1, (value >> 22) & 1
        j1, j2 = (1 - (i1 ^ s)), (1 - (i2 ^ s))
        link = 0x4000 if m == "bl" else 0
        return (0xF000 | s << 10 | (value >> 12) & 0x3FF,
                0x9000 | link | j1 << 13 | j2 << 11 | (value >> 1) & 0x7FF)
    if m == "b_cond":
        offset = _offset(instr, ops[0])
        if not -(1 << 20) <= offset < (1 << 20) or offset % 2:
            _fail(instr, f"offset {offset} out of wide range")
        value = offset & 0x1FFFFF
        s, j2, j1 = value >> 20, (value >> 19) & 1, (value >> 18) & 1
        return (0xF000 | s << 10 | instr.condition.value << 6 | (value >> 12) & 0x3F,
                0x8000 | j1 << 13 | j2 << 11 | (value >> 1) & 0x7FF)
    if m == "msr":
        special, rn = ops
        return 0xF380 | rn.index, 0x8800 | SYSM[special.reg]
    _fail(instr, "no 32-bit encoding")


# ---------------------------------------------------------------------------
# coarse validity predicate

_DP_OPS = {0, 1, 2, 3, 4, 8, 10, 11, 13, 14}
_PLAIN_IMM_OPS = {0, 4, 10, 12, 16, 20, 22, 24, 28}


def _misc16_valid(hw: int) -> bool:
    o = (hw >> 5) & 0x7F
    if o < 48:
        return True  # add/sub sp, cbz, extends, push
    if o == 0b0110011:
        return True  # cps
    if o >= 72 and o not in (84, 85):
        return True  # cbnz, rev*, pop, bkpt, it/hints
    return False


def valid16(hw: int) -> bool:
    """Coarse validity of a halfword as a 16-bit instruction."""
    if is_wide_prefix(hw):
        return False
    top = hw >> 12
    if top == 0b1011:
        return _misc16_valid(hw)
    if top == 0b1101:
        return (hw >> 8) & 0xF != 0b1110  # udf
    return True


def valid32(hw1: int, hw2: int) -> bool:
    """Coarse validity of a halfword pair as a 32-bit instruction."""
    if not is_wide_prefix(hw1):
        return False
    op1, op2, op = (hw1 >> 11) & 3, (hw1 >> 4) & 0x7F, hw2 >> 15
    if op1 == 1:
        if op2 & 0b1100100 == 0:
            return (hw1 >> 7) & 3 in (1, 2)
        if op2 & 0b1100100 == 0b0000100:
            return True
        if op2 & 0b1100000 == 0b0100000:
            return (hw1 >> 5) & 0xF in _DP_OPS
        return False  # coprocessor: none on this core
    if op1 == 2:
        if op == 0:
            if op2 & 0b0100000 == 0:
                return (hw1 >> 5) & 0xF in _DP_OPS
            return (hw1 >> 4) & 0x1F in _PLAIN_IMM_OPS
        ctl = (hw2 >> 12) & 7
        if ctl == 0b010 and op2 == 0b1111111:
            return False  # udf.w
        if ctl & 0b101 == 0:
            if op2 & 0b0111000 != 0b0111000:
                return True
            return op2 >> 1 in (0b011100, 0b011111) or op2 in (0b0111010, 0b0111011)
        return ctl & 0b001 == 1  # b.w / bl; blx immediate is undefined on M
    if op2 & 0b1110001 == 0:
        return (hw1 >> 5) & 7 not in (3, 7)
    if op2 & 0b1100001 == 0b0000001:
        return op2 & 0b110 != 0b110
    if op2 & 0b1110000 == 0b0100000:
        return hw2 >> 12 == 0xF
    if op2 & 0b1110000 == 0b0110000:
        return True
    return False


# ---------------------------------------------------------------------------
# decoding

def _decode_narrow(hw: int):
    def reg(i):
        return Reg(i)

    if hw == NOP16:
        return Instruction("nop")
    top5 = hw >> 11
    rd8 = (hw >> 8) & 7
    imm8 = hw & 0xFF
    r0, r3, r6 = hw & 7, (hw >> 3) & 7, (hw >> 6) & 7
    if top5 == 0b00100:
        return Instruction("movs", (reg(rd8), Imm(imm8)))
    if hw & 0xFFC0 == 0:
        return Instruction("movs", (reg(r0), reg(r3)))
    if hw >> 9 in (0b0001110, 0b0001111):
        m = "adds" if hw >> 9 == 0b0001110 else "subs"
        return Instruction(m, (reg(r0), reg(r3), Imm(r6)))
    if hw >> 9 in (0b0001100, 0b0001101):
        m = "adds" if hw >> 9 == 0b0001100 else "subs"
        return Instruction(m, (reg(r0), reg(r3), reg(r6)))
    if top5 in (0b00110, 0b00111):
        m = "adds" if top5 == 0b00110 else "subs"
        return Instruction(m, (reg(rd8), reg(rd8), Imm(imm8)))
    if top5 == 0b00101:
        return Instruction("cmp", (reg(rd8), Imm(imm8)))
    if hw & 0xFFC0 == 0x4280:
        return Instruction("cmp", (reg(r0), reg(r3)))
    if hw >> 8 in (0x44, 0x45, 0x46):
        d = (hw >> 4) & 8 | r0
        m = (hw >> 3) & 0xF
        kind = hw >> 8
        if kind == 0x44 and d != PC and not (d == PC and m == PC):
            return Instruction("add", (reg(d), reg(d), reg(m)))
        if kind == 0x45 and not (d < 8 and m < 8) and PC not in (d, m):
            return Instruction("cmp", (reg(d), reg(m)))
        if kind == 0x46 and d != PC:
            return Instruction("mov", (reg(d), reg(m)))
        return None
    if hw & 0xFF87 == 0x4700:
        return Instruction("bx", (reg((hw >> 3) & 0xF),))
    if top5 == 0b01001:
        return Instruction("ldr_literal", (reg(rd8), Offset(imm8 * 4)))
    if top5 in (0b01101, 0b01100):
        m = "ldr_imm" if top5 == 0b01101 else "str_imm"
        return Instruction(m, (reg(r0), reg(r3), Imm(((hw >> 6) & 0x1F) * 4)))
    if top5 in (0b10011, 0b10010):
        m = "ldr_imm" if top5 == 0b10011 else "str_imm"
        return Instruction(m, (reg(rd8), Reg(SP), Imm(imm8 * 4)))
    if top5 == 0b10100:
        return Instruction("adr", (reg(rd8), Offset(imm8 * 4)))
    if hw >> 12 == 0b1101:
        cond = (hw >> 8) & 0xF
        if cond in (0, 1):
            return Instruction("b_cond", (Offset(_sext(imm8, 8) * 2),), condition=Condition(cond))
        return None
    if top5 == 0b11100:
        return Instruction("b", (Offset(_sext(hw & 0x7FF, 11) * 2),))
    return None


def _decode_wide(hw1: int, hw2: int):
    W = Width.WIDE
    if (hw1, hw2) == NOP32:
        return Instruction("nop", (), W)
    if hw1 >> 11 == 0b11110 and hw2 & 0x8000:
        ctl = hw2 & 0xD000
        s = (hw1 >> 10) & 1
        j1, j2 = (hw2 >> 13) & 1, (hw2 >> 11) & 1
        if ctl in (0x9000, 0xD000):
            i1, i2 = 1 - (j1 ^ s), 1 - (j2 ^ s)
            raw = s << 24 | i1 << 23 | i2 << 22 | (hw1 & 0x3FF) << 12 | (hw2 & 0x7FF) << 1
            m = "bl" if ctl == 0xD000 else "b"
            return Instruction(m, (Offset(_sext(raw, 25)),), W)
        if ctl == 0x8000:
            cond = (hw1 >> 6) & 0xF
            if cond in (0, 1):
                raw = s << 20 | j2 << 19 | j1 << 18 | (hw1 & 0x3F) << 12 | (hw2 & 0x7FF) << 1
                return Instruction("b_cond", (Offset(_sext(raw, 21)),), W, Condition(cond))
            if hw1 & 0xFFF0 == 0xF380 and hw2 & 0xFF00 == 0x8800:
                for special, sysm in SYSM.items():
                    if hw2 & 0xFF == sysm and hw1 & 0xF not in (SP, PC):
                        return Instruction("msr", (Special(special), Reg(hw1 & 0xF)), W)
        return None
    if hw2 & 0x8000:
        # remaining subset encodings all have bit 15 of the second halfword clear
        if hw1 & 0xFF00 != 0xF800:
            return None
    rd = (hw2 >> 8) & 0xF
    if hw1 & 0xFA00 == 0xF000:
        op, s, rn = (hw1 >> 5) & 0xF, (hw1 >> 4) & 1, hw1 & 0xF
        value = expand_imm(_join_imm12(hw1, hw2))
        if value is None:
            return None
        if op == 0b0010 and rn == PC and rd not in (SP, PC):
            return Instruction("movs" if s else "mov", (Reg(rd), Imm(value)), W)
        if op == 0b1101 and s and rd == PC and rn != PC:
            return Instruction("cmp", (Reg(rn), Imm(value)), W)
        if op in (0b1000, 0b1101) and rd != PC and rn != PC and not (rd == SP and rn != SP):
            m = ("add" if op == 0b1000 else "sub") + ("s" if s else "")
            return Instruction(m, (Reg(rd), Reg(rn), Imm(value)), W)
        return None
    if hw1 & 0xFE00 == 0xEA00:
        if hw2 & 0x70F0:
            return None  # shifted operand
        op, s, rn, rm = (hw1 >> 5) & 0xF, (hw1 >> 4) & 1, hw1 & 0xF, hw2 & 0xF
        if rm in (SP, PC):
            return None
        if op == 0b0010 and rn == PC and rd not in (SP, PC):
            return Instruction("movs" if s else "mov", (Reg(rd), Reg(rm)), W)
        if op == 0b1101 and s and rd == PC and rn != PC:
            return Instruction("cmp", (Reg(rn), Reg(rm)), W)
        if op in (0b1000, 0b1101) and rd != PC and rn != PC and not (rd == SP and rn != SP):
            m = ("add" if op == 0b1000 else "sub") + ("s" if s else "")
            return Instruction(m, (Reg(rd), Reg(rn), Reg(rm)), W)
        return None
    if hw1 & 0xFBFF in (0xF20F, 0xF2AF):
        if rd in (SP, PC):
            return None
        imm = _join_imm12(hw1, hw2)
        return Instruction("adr", (Reg(rd), Offset(imm if hw1 & 0xF0 == 0 else -imm)), W)
    rt, imm12 = hw2 >> 12, hw2 & 0xFFF
    if hw1 & 0xFF7F == 0xF85F:
        if rt == PC:
            return None
        return Instruction("ldr_literal", (Reg(rt), Offset(imm12 if hw1 & 0x80 else -imm12)), W)
    if hw1 & 0xFFE0 == 0xF8C0 and hw1 & 0xF != PC and rt != PC:
        m = "ldr_imm" if hw1 & 0x10 else "str_imm"
        return Instruction(m, (Reg(rt), Reg(hw1 & 0xF), Imm(imm12)), W)
    return None


def decode_halfwords(hw1: int, hw2: int | None = None):
    """Classify one instruction starting with ``hw1``.

    ``hw2`` is consulted only when ``hw1`` is a 32-bit prefix; passing
    ``None`` in that case yields a :class:`Straddle`.
    """
    if is_wide_prefix(hw1):
        if hw2 is None:
            return Straddle(hw1)
        instr = _decode_wide(hw1, hw2)
        if instr is not None:
            return instr
        cls = UnsupportedInstruction if valid32(hw1, hw2) else UndefinedInstruction
        return cls((hw1, hw2))
    instr = _decode_narrow(hw1)
    if instr is not None:
        return instr
    return UnsupportedInstruction((hw1,)) if valid16(hw1) else UndefinedInstruction((hw1,))


def decode(word: int, at: int = 0, next_halfword: int | None = None) -> list:
    """Decode one 32-bit fetch word into the instructions it covers.

    The word holds the halfword at ``at`` in its low 16 bits. A wide
    instruction starting in the upper halfword needs ``next_halfword``;
    without it the entry is a :class:`Straddle`.
    """
    lo, hi = word & 0xFFFF, word >> 16
    if is_wide_prefix(lo):
        return [decode_halfwords(lo, hi)]
    return [decode_halfwords(lo), decode_halfwords(hi, next_halfword)]


def is_valid(result) -> bool:
    return isinstance(result, (Instruction, UnsupportedInstruction))


# ---------------------------------------------------------------------------
# text form

def source_mnemonic(instr: Instruction) -> str:
    if instr.mnemonic == "b_cond":
        return "b" + instr.condition.name.lower()
    if instr.mnemonic in ("ldr_literal", "ldr_imm"):
        return "ldr"
    if instr.mnemonic == "str_imm":
        return "str"
    return instr.mnemonic


def format_instruction(instr: Instruction, address: int | None = None) -> str:
    """Assembly text accepted by the parser (or, with ``address``, a disassembly)."""
    suffix = ""
    if instr.width is Width.WIDE and natural_width(instr) is Width.NARROW:
        suffix = ".w"
    if instr.is_halt:
        return "halt" + suffix
    m, ops = instr.mnemonic, instr.operands

    def target(op):
        if isinstance(op, Offset) and address is not None:
            if m in ("adr", "ldr_literal"):
                return f"0x{((address + 4) & ~3) + op.value:08x}"
            return f"0x{address + 4 + op.value:08x}"
        return str(op)

    name = source_mnemonic(instr) + suffix
    if m == "nop":
        return name
    if m in ("ldr_imm", "str_imm"):
        return f"{name} {ops[0]}, [{ops[1]}, {ops[2]}]"
    if m == "ldr_literal" and isinstance(ops[1], Offset):
        text = f"{name} {ops[0]}, [pc, #{ops[1].value}]"
        if address is not None:
            text += f"  ; {target(ops[1])}"
        return text
    return f"{name} " + ", ".join(
        target(op) if isinstance(op, Offset) else str(op) for op in ops
    )


def describe(result, address: int | None = None) -> str:
    if isinstance(result, Instruction):
        return format_instruction(result, address)
    words = " ".join(f"{hw:04x}" for hw in getattr(result, "halfwords", (result.halfword,)))
    return f"<{type(result).__name__} {words}>"


# ---------------------------------------------------------------------------
# encoding-space density

def validity_density(width: Width, sample_budget: int = 1_000_000, seed: int = 0) -> float:
    """Fraction of the encoding space the coarse predicate accepts.

    16-bit: every halfword, exhaustively (``sample_budget`` and ``seed`` are
    unused). 32-bit: ``sample_budget`` uniformly drawn words, first
    halfword in the low half as in a little-endian fetch word.
    """
    if sample_budget < 1:
        raise ValueError("sample_budget must be >= 1")
    if width is Width.NARROW:
        return sum(map(valid16, range(1 << 16))) / (1 << 16)
    words = np.random.default_rng(seed).integers(0, 1 << 32, size=sample_budget, dtype=np.uint64)
    hits = sum(valid32(int(w) & 0xFFFF, int(w) >> 16) for w in words)
    return hits / sample_budget
