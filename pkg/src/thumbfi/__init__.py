"""Thumb-2 fault-injection workbench: assembler, event-stream simulator,
fault catalogs, countermeasure rewriters and campaign reporting."""

from .assembler import ProgramImage, SourceProgram, assemble, dump_image, emit, layout, parse
from .benchmarks import Benchmark, load_benchmark
from .campaign import (
    CampaignError, CampaignReport, Classification, Outcome, compare_reports, run_campaign,
)
from .encoding import decode, encode, validity_density
from .faults import (
    CatalogDescriptor, FaultCatalog, FaultKind, FaultSpec, SkipGranularity, generate_catalog,
)
from .isa import Instruction, MachineState, Status, Width, initial_state
from .rewriter import RewriteError, RewritePlan, Scheme, rewrite
from .simulator import RunResult, run, step

__all__ = [
    "Benchmark", "CampaignError", "CampaignReport", "CatalogDescriptor", "Classification",
    "FaultCatalog", "FaultKind", "FaultSpec", "Instruction", "MachineState", "Outcome",
    "ProgramImage", "RewriteError", "RewritePlan", "RunResult", "Scheme", "SkipGranularity",
    "SourceProgram", "Status", "Width", "assemble", "compare_reports", "decode", "dump_image",
    "emit", "encode", "generate_catalog", "initial_state", "layout", "load_benchmark", "parse",
    "rewrite", "run", "run_campaign", "step", "validity_density",
]
