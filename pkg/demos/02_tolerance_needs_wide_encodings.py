# The call-site countermeasure survives any single instruction skip,
# but only if no fetch word carries two of its instructions.

from thumbfi import (
    CatalogDescriptor, RewritePlan, Scheme, SkipGranularity, compare_reports, generate_catalog,
    layout, load_benchmark, rewrite, run, run_campaign,
)
from thumbfi.assembler import dump_image
from thumbfi.faults import only

program = load_benchmark("bl_call").program()

reports = {}
for wide in (False, True):
    hardened = layout(rewrite(program, RewritePlan(Scheme.FAULT_TOLERANCE, force_wide=wide)))
    print(dump_image(hardened))
    golden = run(hardened)
    skips = generate_catalog(CatalogDescriptor("skips"), golden)
    for granularity in SkipGranularity:
        report = run_campaign(hardened, golden, only(skips, granularity), "r0")
        reports[wide, granularity] = report
        print("wide" if wide else "narrow", granularity.value, report.counts)

# a whole-word skip on the narrow layout removes both adr (or both b) at once
word = SkipGranularity.WHOLE_FETCH_WORD
for o in reports[False, word].outcomes:
    if o.classification.value == "FaultTargetReg":
        print("narrow layout defeated by", o.spec, "-> r0 = 0x%08x" % o.target_value)

print(compare_reports(reports[False, word], reports[True, word]).to_text())
