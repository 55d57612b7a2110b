"""Fault campaigns: one restarted simulation per fault spec, outcome
classification against the golden run, and the aggregate metrics."""

from __future__ import annotations

import csv
import enum
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .assembler import ProgramImage
from .faults import CatalogDescriptor, FaultCatalog, FaultKind, FaultSpec, Injector
from .isa import MachineState, Status, hamming_weight, initial_state
from .simulator import RunResult, run


class CampaignError(Exception):
    pass


class Classification(enum.Enum):
    CORRECT = "Correct"
    FAULT_TARGET = "FaultTargetReg"
    FAULT_OTHER = "FaultOtherReg"
    DETECTED = "Detected"
    EXCEPTION = "Exception"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class Outcome:
    spec: FaultSpec
    classification: Classification
    target_value: int

    @property
    def hamming_weight(self) -> int:
        return hamming_weight(self.target_value)


def classify(golden: RunResult, result: RunResult, target: str) -> Classification:
    if result.detected:
        return Classification.DETECTED
    if result.status is Status.EXCEPTION:
        return Classification.EXCEPTION
    if result.status is Status.TIMEOUT:
        return Classification.TIMEOUT
    if result.state.read(target) != golden.state.read(target):
        return Classification.FAULT_TARGET
    if result.state.observable() != golden.state.observable():
        return Classification.FAULT_OTHER
    return Classification.CORRECT


@dataclass
class CampaignReport:
    outcomes: tuple
    descriptor: CatalogDescriptor
    target: str
    provenance: dict = field(default_factory=dict)

    @property
    def counts(self) -> dict:
        counts = {c.value: 0 for c in Classification}
        for outcome in self.outcomes:
            counts[outcome.classification.value] += 1
        return counts

    @property
    def vulnerable_points(self) -> int:
        return self.counts[Classification.FAULT_TARGET.value]

    @property
    def faults_on_any_register(self) -> int:
        counts = self.counts
        return counts[Classification.FAULT_TARGET.value] + counts[Classification.FAULT_OTHER.value]

    @property
    def crashes(self) -> int:
        counts = self.counts
        return counts[Classification.EXCEPTION.value] + counts[Classification.TIMEOUT.value]

    def hamming_histogram(self) -> np.ndarray:
        weights = [o.hamming_weight for o in self.outcomes
                   if o.classification is Classification.FAULT_TARGET]
        return np.bincount(np.asarray(weights, dtype=int), minlength=33)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["kind", "index", "mask", "classification", "target_value", "target_hw"])
        for o in self.outcomes:
            spec = o.spec
            mask = spec.granularity.value if spec.kind is FaultKind.SKIP else f"0x{spec.mask:08x}"
            writer.writerow([spec.kind.value, spec.index, mask, o.classification.value,
                             f"0x{o.target_value:08x}", o.hamming_weight])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "catalog": str(self.descriptor),
            "size": len(self.outcomes),
            "target": self.target,
            "counts": self.counts,
            "crash": self.crashes,
            "faults_on_any_register": self.faults_on_any_register,
            "hamming_histogram": [int(n) for n in self.hamming_histogram()],
            "provenance": self.provenance,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def _one(args) -> Outcome:
    image, initial, spec, max_steps, golden, target = args
    result = run(image, initial, max_steps=max_steps, hooks=Injector(spec))
    return Outcome(spec, classify(golden, result, target), result.state.read(target))


def run_campaign(image: ProgramImage, golden: RunResult, catalog: FaultCatalog, target: str,
                 error_label: str | None = None, *, initial: MachineState | None = None,
                 max_steps: int | None = None, workers: int = 1,
                 provenance: dict | None = None) -> CampaignReport:
    """Simulate every spec of ``catalog`` from a fresh reset state.

    Runs exceeding ``max_steps`` (default: ten times the golden length plus
    100) are classified as timeouts.
    """
    if golden.status is not Status.HALTED or golden.detected:
        raise CampaignError("golden run not Halted")
    golden.state.read(target)  # validates the target name
    if error_label is not None:
        if error_label not in image.symbols:
            raise CampaignError(f"unknown error label {error_label!r}")
        image = replace(image, error_address=image.symbols[error_label])
    initial = initial if initial is not None else initial_state(image.entry)
    max_steps = max_steps or 10 * golden.steps + 100
    jobs = [(image, initial, spec, max_steps, golden, target) for spec in catalog]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_one, jobs, chunksize=64))
    else:
        outcomes = [_one(job) for job in jobs]
    info = {"catalog": str(catalog.descriptor), "seed": catalog.descriptor.seed,
            "program_hash": image.digest}
    info.update(provenance or {})
    return CampaignReport(tuple(outcomes), catalog.descriptor, target, info)


@dataclass(frozen=True)
class Comparison:
    deltas: dict                 # classification -> count(b) - count(a)
    vulnerable_a: int
    vulnerable_b: int
    detected_a: int
    detected_b: int

    @property
    def ratio(self) -> float | None:
        """Vulnerable points after / before; ``None`` when the baseline has none."""
        if self.vulnerable_a == 0:
            return None
        return self.vulnerable_b / self.vulnerable_a

    def to_text(self) -> str:
        lines = [f"{name:15s} {delta:+d}" for name, delta in self.deltas.items()]
        ratio = "n/a" if self.ratio is None else f"{self.ratio:.4f}"
        lines.append(f"vulnerable points: {self.vulnerable_a} -> {self.vulnerable_b} (ratio {ratio})")
        return "\n".join(lines) + "\n"


def compare_reports(a: CampaignReport, b: CampaignReport) -> Comparison:
    """Absolute count differences from ``a`` to ``b``."""
    return compare_summaries(a.summary(), b.summary())


def compare_summaries(a: dict, b: dict) -> Comparison:
    kind_a = CatalogDescriptor.parse(a["catalog"]).kind
    kind_b = CatalogDescriptor.parse(b["catalog"]).kind
    if kind_a != kind_b:
        raise CampaignError(f"incompatible catalogs: {a['catalog']} vs {b['catalog']}")
    if a["target"] != b["target"]:
        raise CampaignError(f"different targets: {a['target']} vs {b['target']}")
    ca, cb = a["counts"], b["counts"]
    deltas = {c.value: cb[c.value] - ca[c.value] for c in Classification}
    vulnerable, detected = Classification.FAULT_TARGET.value, Classification.DETECTED.value
    return Comparison(deltas, ca[vulnerable], cb[vulnerable], ca[detected], cb[detected])


def load_summary(text: str) -> dict:
    return json.loads(text)
