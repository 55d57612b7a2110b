"""Command-line entry point.

Every input path may be ``-`` for stdin; outputs default to stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys

from .assembler import AsmError, dump_image, emit, parse, read_program
from .benchmarks import NAMES, load_benchmark
from .campaign import CampaignError, compare_summaries, load_summary, run_campaign
from .encoding import validity_density
from .faults import CatalogDescriptor, generate_catalog
from .isa import REGISTER_NAMES, IsaError, Status, Width, initial_state
from .rewriter import RewriteError, RewritePlan, Scheme, rewrite
from .simulator import DEFAULT_MAX_STEPS, run

log = logging.getLogger("thumbfi")

PLAN_HEADER = "; rewrite plan: "


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as f:
        return f.read()


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as f:
            f.write(text)


def _plan_of(text: str) -> dict | None:
    """The rewrite plan recorded in a rewritten program's first line, if any."""
    for line in text.splitlines():
        if line.startswith(PLAN_HEADER):
            return json.loads(line[len(PLAN_HEADER):])
        if line.startswith("; image base="):
            continue
        break
    return None


# -- subcommands -----------------------------------------------------------

def cmd_assemble(args):
    image = read_program(_read(args.input))
    _write(args.output, dump_image(image))


def cmd_rewrite(args):
    mnemonics = None
    if args.only:
        mnemonics = frozenset(m.strip() for m in args.only.split(",") if m.strip())
    scratch = args.scratch or ("r1" if args.scheme == "ft" else "r12")
    plan = RewritePlan(Scheme(args.scheme), mnemonics, args.force_wide, scratch)
    out = rewrite(parse(_read(args.input)), plan)
    header = PLAN_HEADER + json.dumps(plan.describe(), sort_keys=True) + "\n"
    _write(args.output, header + emit(out))


def cmd_run(args):
    image = read_program(_read(args.input))
    result = run(image, initial_state(image.entry), max_steps=args.max_steps)
    state = result.state
    lines = [f"status: {state.status.value}", f"steps: {result.steps}"]
    if state.exception is not None:
        lines.append(f"exception: {state.exception.value} at 0x{state.faulting_address:08x}")
    if result.detected:
        lines.append("error handler reached")
    for i, name in REGISTER_NAMES.items():
        lines.append(f"{name} = 0x{state.regs[i]:08x}")
    for reg, value in state.specials.items():
        lines.append(f"{reg.value} = 0x{value:08x}")
    print("\n".join(lines))
    if args.trace:
        _write(args.trace, result.dump_trace())


def cmd_campaign(args):
    text = _read(args.input)
    image = read_program(text)
    golden = run(image, initial_state(image.entry))
    if golden.status is not Status.HALTED or golden.detected:
        raise CampaignError("golden run not Halted")
    catalog = generate_catalog(CatalogDescriptor.parse(args.catalog), golden)
    plan = _plan_of(text)
    report = run_campaign(image, golden, catalog, args.target, args.error_label,
                          max_steps=args.max_steps, workers=args.jobs,
                          provenance={"rewrite_plan": plan or "none"})
    if args.output:
        _write(args.output, report.to_csv())
    if args.summary:
        _write(args.summary, report.summary_json())
    if not args.output and not args.summary:
        sys.stdout.write(report.summary_json())


def cmd_compare(args):
    a, b = load_summary(_read(args.a)), load_summary(_read(args.b))
    sys.stdout.write(compare_summaries(a, b).to_text())


def cmd_density(args):
    width = {16: Width.NARROW, 32: Width.WIDE}[args.width]
    if width is Width.WIDE and args.seed is None:
        raise UsageError("--seed is required for --width 32")
    print(f"{validity_density(width, args.samples, args.seed or 0):.6f}")


def cmd_bench(args):
    sys.stdout.write(load_benchmark(args.name).source)


def _target(text: str) -> str:
    if not re.fullmatch(r"r\d+|sp|lr|control|psp|basepri|mem:0x[0-9a-fA-F]+", text):
        raise argparse.ArgumentTypeError(f"bad target {text!r}")
    return text


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thumbfi", description="Thumb-2 fault-injection workbench")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("assemble", help="assemble source into an image dump")
    p.add_argument("input", nargs="?", default="-")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("rewrite", help="apply a countermeasure")
    p.add_argument("input", nargs="?", default="-")
    p.add_argument("--scheme", choices=("ft", "fd"), required=True)
    p.add_argument("--force-wide", action="store_true")
    p.add_argument("--only", help="comma-separated mnemonics to rewrite")
    p.add_argument("--scratch", help="scratch register (default r1 for ft, r12 for fd)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("run", help="simulate without faults")
    p.add_argument("input", nargs="?", default="-")
    p.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    p.add_argument("--trace", help="write the fetch/load trace to this file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("campaign", help="run a fault campaign")
    p.add_argument("input", nargs="?", default="-")
    p.add_argument("--catalog", required=True,
                   help="exhaustive1|exhaustive2|sampled:K:N:SEED|skips, optionally [fetch,load]")
    p.add_argument("--target", type=_target, required=True)
    p.add_argument("--error-label")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output", help="per-spec report (CSV)")
    p.add_argument("--summary", help="aggregate summary (JSON)")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("compare", help="compare two campaign summaries")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("density", help="encoding-space validity density")
    p.add_argument("--width", type=int, choices=(16, 32), required=True)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("bench", help="print a bundled benchmark")
    p.add_argument("name", choices=NAMES)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"thumbfi: usage error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="thumbfi: %(levelname)s: %(message)s")
    try:
        args.func(args)
    except AsmError as exc:
        print(f"thumbfi: {exc}", file=sys.stderr)
        return 1
    except (IsaError, RewriteError, CampaignError, UsageError, ValueError, KeyError,
            OSError) as exc:
        print(f"thumbfi: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
