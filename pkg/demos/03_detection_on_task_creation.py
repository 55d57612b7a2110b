# Duplicate-and-compare on the arguments of a task creation call.
# Protecting only the loads already removes most priority corruptions;
# the stored word itself stays exposed because stores cannot be compared.

from thumbfi import (
    CatalogDescriptor, RewritePlan, Scheme, generate_catalog, layout, load_benchmark, rewrite, run,
    run_campaign,
)

bench = load_benchmark("task_create_args")
print(bench.source)

variants = {
    "none": bench.program(),
    "fd on ldr": rewrite(bench.program(), RewritePlan(Scheme.FAULT_DETECTION, frozenset({"ldr"}), True, bench.scratch)),
    "fd on all": rewrite(bench.program(), RewritePlan(Scheme.FAULT_DETECTION, None, True, bench.scratch)),
}

for name, program in variants.items():
    image = layout(program)
    golden = run(image)
    catalog = generate_catalog(CatalogDescriptor("exhaustive1"), golden)
    report = run_campaign(image, golden, catalog, bench.target)
    c = report.counts
    print(f"{name:10s} size {len(catalog):5d}  faulty priority {c['FaultTargetReg']:3d}  "
          f"detected {c['Detected']:4d}  crashes {report.crashes:4d}")
    values = sorted({o.target_value for o in report.outcomes if o.classification.value == "FaultTargetReg"})
    print("           faulty stacked values:", [hex(v) for v in values[:8]], "..." if len(values) > 8 else "")

# skipping the msr that drops privileges leaves CONTROL at its reset value
ctx = load_benchmark("restore_context")
image = ctx.image()
golden = run(image)
report = run_campaign(image, golden, generate_catalog(CatalogDescriptor("skips"), golden), "control")
for o in report.outcomes:
    if o.classification.value == "FaultTargetReg":
        print("restore_context:", o.spec, "-> control = %#x" % o.target_value)
