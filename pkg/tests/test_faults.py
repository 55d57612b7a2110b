from math import comb

import pytest

from thumbfi.assembler import assemble
from thumbfi.encoding import NOP16
from thumbfi.faults import (
    NOP_WORD, CatalogDescriptor, FaultCatalog, FaultKind, FaultSpec, Injector, SkipGranularity,
    apply, generate_catalog, only,
)
from thumbfi.isa import Status
from thumbfi.simulator import FetchEvent, InstructionEvent, LoadEvent, run

CAFE = assemble("ldr r0, =0xCAFECAFE\nhalt\n")


def test_apply_examples():
    fetch = FetchEvent(0, 0, 0xBF00BF00)
    assert apply(FaultSpec(FaultKind.FETCH_CORRUPT, 0, 0x1), fetch) == 0xBF00BF01
    assert apply(FaultSpec(FaultKind.FETCH_CORRUPT, 1, 0x1), fetch) == 0xBF00BF00
    load = LoadEvent(0, 4, 0xCAFECAFE)
    assert apply(FaultSpec(FaultKind.LOAD_CORRUPT, 0, 0xFF), load) == 0xCAFECA01
    assert apply(FaultSpec(FaultKind.FETCH_CORRUPT, 0, 0xFF), load) == 0xCAFECAFE
    word_skip = FaultSpec(FaultKind.SKIP, 0, granularity=SkipGranularity.WHOLE_FETCH_WORD)
    assert apply(word_skip, FetchEvent(0, 0, 0x12345678)) == NOP_WORD
    one = FaultSpec(FaultKind.SKIP, 3, granularity=SkipGranularity.ONE_INSTRUCTION)
    assert apply(one, InstructionEvent(3, 6, (0x480A,))) == (NOP16,)
    assert apply(one, InstructionEvent(3, 6, (0xF000, 0xF801))) == (0xF3AF, 0x8000)
    assert apply(one, InstructionEvent(2, 6, (0x480A,))) == (0x480A,)


def test_spec_validation():
    with pytest.raises(ValueError):
        FaultSpec(FaultKind.FETCH_CORRUPT, 0, 0)
    with pytest.raises(ValueError):
        FaultSpec(FaultKind.LOAD_CORRUPT, -1, 1)
    with pytest.raises(ValueError):
        FaultSpec(FaultKind.SKIP, 0, 1)
    with pytest.raises(ValueError):
        FaultSpec(FaultKind.SKIP, 0)


def test_spec_text_round_trip():
    for spec in (FaultSpec(FaultKind.FETCH_CORRUPT, 3, 0x10),
                 FaultSpec(FaultKind.SKIP, 4, granularity=SkipGranularity.ONE_INSTRUCTION)):
        assert FaultSpec.from_string(str(spec)) == spec
    assert str(FaultSpec(FaultKind.LOAD_CORRUPT, 0, 1)) == "load 0 0x00000001"


def test_load_corruption_reaches_register():
    for mask in (1, 0x80000000, 0xFFFFFFFF, 0x35014C01):
        result = run(CAFE, hooks=Injector(FaultSpec(FaultKind.LOAD_CORRUPT, 0, mask)))
        assert result.state.regs[0] == 0xCAFECAFE ^ mask


def test_whole_word_skip_removes_adr_pair():
    image = assemble("adr r1, ret\nadr r1, ret\nmovs r2, #1\nmovs r3, #1\nret: halt\n")
    spec = FaultSpec(FaultKind.SKIP, 0, granularity=SkipGranularity.WHOLE_FETCH_WORD)
    result = run(image, hooks=Injector(spec))
    assert result.state.regs[1] == 0
    assert result.state.regs[2] == 1


def test_single_fault_guarantee():
    image = assemble("movs r0, #1\nmovs r1, #1\nmovs r2, #1\nmovs r3, #1\nldr r4, =5\nhalt\n")
    golden = run(image)
    catalog = generate_catalog(CatalogDescriptor("exhaustive1"), golden)
    for spec in catalog.specs[::7]:
        injector = Injector(spec)
        run(image, hooks=injector)
        assert injector.fired <= 1


def test_catalog_counts():
    one_fetch = run(CAFE)
    assert len(one_fetch.fetches) == 1 and len(one_fetch.loads) == 1
    fetch_only = CatalogDescriptor("exhaustive1", ("fetch",))
    assert len(generate_catalog(fetch_only, one_fetch)) == 32
    image = assemble("movs r0, #1\nmovs r0, #1\nmovs r0, #1\nldr r1, =7\nhalt\n")
    golden = run(image)
    assert (len(golden.fetches), len(golden.loads)) == (3, 1)
    assert len(generate_catalog(CatalogDescriptor("exhaustive1"), golden)) == 128
    assert len(generate_catalog(CatalogDescriptor("exhaustive2"), golden)) == 4 * comb(32, 2)


def test_sampled_catalog_is_seeded():
    golden = run(CAFE)
    descriptor = CatalogDescriptor.parse("sampled:4:1000:7")
    a, b = generate_catalog(descriptor, golden), generate_catalog(descriptor, golden)
    assert a == b and len(a) == 1000
    assert all(bin(s.mask).count("1") == 4 for s in a)
    other = generate_catalog(CatalogDescriptor.parse("sampled:4:1000:8"), golden)
    assert other != a
    with pytest.raises(ValueError):
        CatalogDescriptor("sampled", flips=4, count=10)


def test_skip_catalog_and_filter():
    golden = run(CAFE)
    catalog = generate_catalog(CatalogDescriptor("skips"), golden)
    assert len(catalog) == len(golden.executed) + len(golden.fetches)
    ones = only(catalog, SkipGranularity.ONE_INSTRUCTION)
    assert len(ones) == len(golden.executed)


def test_empty_trace_is_an_error():
    empty = run(CAFE)
    empty.trace = []
    with pytest.raises(ValueError):
        generate_catalog(CatalogDescriptor("exhaustive1"), empty)


def test_catalog_serialization():
    catalog = generate_catalog(CatalogDescriptor.parse("sampled:2:20:3[load]"), run(CAFE))
    text = catalog.dump()
    assert text.startswith("# catalog sampled:2:20:3[load]\n")
    assert FaultCatalog.load(text) == catalog


@pytest.mark.parametrize("index", range(4))
def test_skip_equivalent_to_nop_replacement(index):
    image = assemble("movs r0, #1\nmovs r1, #2\nmovs r2, #3\nmovs r3, #4\nhalt\n")
    golden = run(image)
    event = golden.executed[index]
    skip = FaultSpec(FaultKind.SKIP, index, granularity=SkipGranularity.ONE_INSTRUCTION)
    shift = 16 if event.address & 2 else 0
    fetch_index = next(f.index for f in golden.fetches if f.address == event.address & ~3)
    mask = ((event.halfwords[0] ^ NOP16) << shift)
    corrupt = FaultSpec(FaultKind.FETCH_CORRUPT, fetch_index, mask)
    a, b = run(image, hooks=Injector(skip)), run(image, hooks=Injector(corrupt))
    assert a.state == b.state and a.trace == b.trace
    assert a.status is Status.HALTED
