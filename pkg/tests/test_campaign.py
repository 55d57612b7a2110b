import csv
import io
import json
import random

import pytest

from thumbfi.assembler import assemble, layout
from thumbfi.benchmarks import load_benchmark
from thumbfi.campaign import (
    CampaignError, Classification, compare_reports, run_campaign,
)
from thumbfi.faults import (
    CatalogDescriptor, FaultCatalog, FaultKind, FaultSpec, SkipGranularity, generate_catalog, only,
)
from thumbfi.isa import hamming_weight
from thumbfi.rewriter import RewritePlan, Scheme, rewrite
from thumbfi.simulator import run

CAFE = assemble("ldr r0, =0xCAFECAFE\nhalt\n")


def campaign(image, descriptor, target="r0", granularity=None, **kw):
    golden = run(image)
    catalog = generate_catalog(CatalogDescriptor.parse(descriptor), golden)
    if granularity is not None:
        catalog = only(catalog, granularity)
    return run_campaign(image, golden, catalog, target, **kw)


def test_empty_catalog():
    golden = run(CAFE)
    report = run_campaign(CAFE, golden, FaultCatalog((), CatalogDescriptor("exhaustive1")), "r0")
    assert set(report.counts.values()) == {0}
    assert report.hamming_histogram().sum() == 0


def test_load_sweep_on_literal_load():
    report = campaign(CAFE, "exhaustive1[load]")
    assert report.counts[Classification.FAULT_TARGET.value] == 32
    # XOR oracle: one flipped bit moves the weight by exactly one
    assert hamming_weight(0xCAFECAFE) == 22
    for outcome in report.outcomes:
        assert outcome.target_value == 0xCAFECAFE ^ outcome.spec.mask
        assert outcome.hamming_weight in (21, 23)
    hist = report.hamming_histogram()
    assert len(hist) == 33 and hist[21] == 22 and hist[23] == 10


def test_counts_sum_to_catalog_size():
    report = campaign(CAFE, "exhaustive1")
    assert sum(report.counts.values()) == len(report.outcomes) == 64
    assert report.crashes == report.counts["Exception"] + report.counts["Timeout"]


def test_golden_must_halt():
    image = assemble("movs r0, #1\n")  # runs off the end of the image
    golden = run(image)
    with pytest.raises(CampaignError, match="golden run not Halted"):
        run_campaign(image, golden, FaultCatalog((), CatalogDescriptor("skips")), "r0")


def test_pass_through_catalog_is_all_correct():
    golden = run(CAFE)
    # indices past the end of the trace never match an event
    specs = tuple(FaultSpec(FaultKind.FETCH_CORRUPT, 100 + i, 1 << i) for i in range(8))
    report = run_campaign(CAFE, golden, FaultCatalog(specs, CatalogDescriptor("exhaustive1")), "r0")
    assert report.counts["Correct"] == 8


def test_detection_takes_precedence():
    image = layout(rewrite(load_benchmark("ldr_detect").program(),
                           RewritePlan(Scheme.FAULT_DETECTION, force_wide=True)))
    report = campaign(image, "exhaustive1[load]")
    assert report.counts["Detected"] == len(report.outcomes) == 64


def test_timeout_is_separate_from_exception():
    image = assemble("ldr r0, =3\nloop: subs r0, r0, #1\nbne loop\nhalt\n")
    golden = run(image)
    # a huge loop counter never finishes within the step budget
    spec = FaultSpec(FaultKind.LOAD_CORRUPT, 0, 0x80000000)
    report = run_campaign(image, golden, FaultCatalog((spec,), CatalogDescriptor("exhaustive1")),
                          "r0", max_steps=50)
    assert report.outcomes[0].classification is Classification.TIMEOUT
    assert report.crashes == 1 and report.counts["Exception"] == 0


def test_unknown_error_label():
    golden = run(CAFE)
    with pytest.raises(CampaignError):
        run_campaign(CAFE, golden, FaultCatalog((), CatalogDescriptor("skips")), "r0", "nope")


def test_error_label_override_counts_detection():
    image = assemble("ldr r0, =0xCAFECAFE\ncmp r0, #0\nbeq bad\nhalt\nbad: halt\n")
    report = campaign(image, "skips", error_label="bad")
    assert report.counts["Detected"] >= 1


def test_report_files():
    report = campaign(CAFE, "exhaustive1[load]")
    rows = list(csv.reader(io.StringIO(report.to_csv())))
    assert rows[0] == ["kind", "index", "mask", "classification", "target_value", "target_hw"]
    assert rows[1] == ["load", "0", "0x00000001", "FaultTargetReg", "0xcafecaff", "23"]
    summary = json.loads(report.summary_json())
    assert summary["counts"]["FaultTargetReg"] == 32
    assert len(summary["hamming_histogram"]) == 33
    assert set(summary["provenance"]) >= {"program_hash", "catalog", "seed"}


def test_compare_identical_and_protected():
    plain = campaign(CAFE, "exhaustive1[load]")
    same = compare_reports(plain, plain)
    assert set(same.deltas.values()) == {0} and same.ratio == 1.0
    image = layout(rewrite(load_benchmark("ldr_detect").program(),
                           RewritePlan(Scheme.FAULT_DETECTION)))
    protected = campaign(image, "exhaustive1[load]")
    cmp = compare_reports(plain, protected)
    assert cmp.vulnerable_b == 0 and cmp.ratio == 0.0
    assert cmp.detected_b == len(protected.outcomes)


def test_compare_rejects_incompatible_reports():
    a = campaign(CAFE, "exhaustive1[load]")
    with pytest.raises(CampaignError):
        compare_reports(a, campaign(CAFE, "skips"))
    with pytest.raises(CampaignError):
        compare_reports(a, campaign(CAFE, "exhaustive1[load]", target="r1"))


def test_wide_ft_beats_narrow_ft_under_word_skips():
    program = load_benchmark("bl_call").program()
    reports = []
    for wide in (False, True):
        image = layout(rewrite(program, RewritePlan(Scheme.FAULT_TOLERANCE, force_wide=wide)))
        reports.append(campaign(image, "skips", granularity=SkipGranularity.WHOLE_FETCH_WORD))
    cmp = compare_reports(*reports)
    assert cmp.vulnerable_b < cmp.vulnerable_a


def test_restart_isolation_under_permutation():
    golden = run(CAFE)
    catalog = generate_catalog(CatalogDescriptor("exhaustive1"), golden)
    shuffled = list(catalog.specs)
    random.Random(3).shuffle(shuffled)
    a = run_campaign(CAFE, golden, catalog, "r0")
    b = run_campaign(CAFE, golden, FaultCatalog(tuple(shuffled), catalog.descriptor), "r0")
    assert a.counts == b.counts
    assert sorted(a.outcomes, key=str) == sorted(b.outcomes, key=str)


def test_parallel_matches_sequential():
    image = layout(load_benchmark("task_create_args").program())
    golden = run(image)
    catalog = generate_catalog(CatalogDescriptor.parse("exhaustive1[load]"), golden)
    a = run_campaign(image, golden, catalog, "mem:0x20000f00")
    b = run_campaign(image, golden, catalog, "mem:0x20000f00", workers=2)
    assert a.to_csv() == b.to_csv()
