# Where a glitch lands decides what it does.
# A literal load is hit either while its instruction word is fetched or
# while the loaded data word comes back; the two give very different outcomes.

import numpy as np

from thumbfi import CatalogDescriptor, generate_catalog, load_benchmark, run, run_campaign
from thumbfi.assembler import dump_image

bench = load_benchmark("load_cafecafe")
image = bench.image()
print(dump_image(image))

golden = run(image)
print("golden r0 = 0x%08x, hamming weight %d" % (golden.state.regs[0], bin(golden.state.regs[0]).count("1")))
print(golden.dump_trace())

# one bit flip on every event of the fault-free run
for events in ("fetch", "load"):
    catalog = generate_catalog(CatalogDescriptor.parse(f"exhaustive1[{events}]"), golden)
    report = run_campaign(image, golden, catalog, "r0")
    print(events, report.counts)

# data corruption gives every value one bit away from the constant
report = run_campaign(image, golden, generate_catalog(CatalogDescriptor.parse("exhaustive1[load]"), golden), "r0")
hist = report.hamming_histogram()
print("hamming weights of faulty r0:", {w: int(n) for w, n in enumerate(hist) if n})

# two flips spread further; the histogram is the plot data
golden_w = bin(golden.state.regs[0]).count("1")
report = run_campaign(image, golden, generate_catalog(CatalogDescriptor.parse("sampled:2:500:1[load]"), golden), "r0")
hist = report.hamming_histogram()
weights = np.repeat(np.arange(33), hist)
print("two-bit flips: mean weight %.2f (golden %d), range %d..%d" % (weights.mean(), golden_w, weights.min(), weights.max()))
