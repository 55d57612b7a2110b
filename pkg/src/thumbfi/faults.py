"""Single-fault specifications, catalogs, and the hooks that inject them."""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass

import numpy as np

from .encoding import NOP16, NOP32
from .simulator import FetchEvent, InstructionEvent, LoadEvent, RunResult


class FaultKind(enum.Enum):
    FETCH_CORRUPT = "fetch"
    LOAD_CORRUPT = "load"
    SKIP = "skip"


class SkipGranularity(enum.Enum):
    ONE_INSTRUCTION = "instruction"
    WHOLE_FETCH_WORD = "word"


NOP_WORD = NOP16 << 16 | NOP16


@dataclass(frozen=True)
class FaultSpec:
    """One fault.

    ``index`` counts fetch events, load events or executed instructions
    (for instruction skips) of the fault-free run.
    """

    kind: FaultKind
    index: int
    mask: int | None = None
    granularity: SkipGranularity | None = None

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("event index must be >= 0")
        if self.kind is FaultKind.SKIP:
            if self.granularity is None or self.mask is not None:
                raise ValueError("a skip takes a granularity and no mask")
        else:
            if not self.mask or not 0 < self.mask <= 0xFFFFFFFF:
                raise ValueError("corruption masks must be non-zero 32-bit values")
            if self.granularity is not None:
                raise ValueError("only skips take a granularity")

    def __str__(self):
        if self.kind is FaultKind.SKIP:
            return f"skip {self.index} {self.granularity.value}"
        return f"{self.kind.value} {self.index} 0x{self.mask:08x}"

    @classmethod
    def from_string(cls, text: str) -> "FaultSpec":
        kind, index, last = text.split()
        kind = FaultKind(kind)
        if kind is FaultKind.SKIP:
            return cls(kind, int(index), granularity=SkipGranularity(last))
        return cls(kind, int(index), int(last, 16))


def apply(spec: FaultSpec, event):
    """The raw value an event delivers under ``spec``.

    Fetch and load events carry a 32-bit word; instruction events carry
    the instruction's halfwords. Events the spec does not target pass
    through unchanged.
    """
    kind, gran = spec.kind, spec.granularity
    if isinstance(event, FetchEvent):
        if event.index == spec.index:
            if kind is FaultKind.FETCH_CORRUPT:
                return event.word ^ spec.mask
            if kind is FaultKind.SKIP and gran is SkipGranularity.WHOLE_FETCH_WORD:
                return NOP_WORD
        return event.word
    if isinstance(event, LoadEvent):
        if kind is FaultKind.LOAD_CORRUPT and event.index == spec.index:
            return event.value ^ spec.mask
        return event.value
    if isinstance(event, InstructionEvent):
        if (kind is FaultKind.SKIP and gran is SkipGranularity.ONE_INSTRUCTION
                and event.index == spec.index):
            return (NOP16,) if len(event.halfwords) == 1 else NOP32
        return event.halfwords
    raise TypeError(f"not an event: {event!r}")


class Injector:
    """Simulator hooks applying one spec; counts how often it fired."""

    def __init__(self, spec: FaultSpec | None):
        self.spec = spec
        self.fired = 0

    def _apply(self, event, raw):
        if self.spec is None:
            return raw
        out = apply(self.spec, event)
        if out != raw:
            self.fired += 1
        return out

    def fetch(self, event):
        return self._apply(event, event.word)

    def load(self, event):
        return self._apply(event, event.value)

    def instruction(self, event):
        return self._apply(event, event.halfwords)


# ---------------------------------------------------------------------------
# catalogs

CATALOG_KINDS = ("exhaustive1", "exhaustive2", "sampled", "skips")
ALL_TARGETS = ("fetch", "load")


@dataclass(frozen=True)
class CatalogDescriptor:
    kind: str
    targets: tuple = ALL_TARGETS
    flips: int = 0
    count: int = 0
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in CATALOG_KINDS:
            raise ValueError(f"unknown catalog kind {self.kind!r}")
        if not set(self.targets) <= set(ALL_TARGETS) or not self.targets:
            raise ValueError(f"bad targets {self.targets!r}")
        if self.kind == "sampled":
            if self.seed is None:
                raise ValueError("sampled catalogs need an explicit seed")
            if not 1 <= self.flips <= 32 or self.count < 1:
                raise ValueError("sampled catalogs need 1..32 flips and count >= 1")

    def __str__(self):
        if self.kind == "sampled":
            head = f"sampled:{self.flips}:{self.count}:{self.seed}"
        else:
            head = self.kind
        if self.kind == "skips":
            return head
        return f"{head}[{','.join(self.targets)}]"

    @classmethod
    def parse(cls, text: str, targets=None) -> "CatalogDescriptor":
        """``exhaustive1``, ``exhaustive2``, ``sampled:K:N:SEED`` or ``skips``,
        optionally followed by ``[fetch,load]``."""
        match = re.fullmatch(r"([a-z0-9:]+)(?:\[([a-z,]+)\])?", text.strip())
        if not match:
            raise ValueError(f"bad catalog descriptor {text!r}")
        head, bracket = match.groups()
        if bracket:
            targets = tuple(t for t in ALL_TARGETS if t in bracket.split(","))
        targets = tuple(targets) if targets else ALL_TARGETS
        if head.startswith("sampled:"):
            try:
                _, k, n, seed = head.split(":")
                return cls("sampled", targets, int(k), int(n), int(seed))
            except ValueError:
                raise ValueError(f"expected sampled:K:N:SEED, got {head!r}") from None
        return cls(head, targets)

    @property
    def family(self) -> str:
        return self.kind


@dataclass(frozen=True)
class FaultCatalog:
    specs: tuple
    descriptor: CatalogDescriptor

    def __len__(self):
        return len(self.specs)

    def __iter__(self):
        return iter(self.specs)

    def dump(self) -> str:
        lines = [f"# catalog {self.descriptor}"]
        lines += [str(spec) for spec in self.specs]
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "FaultCatalog":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("# catalog "):
            raise ValueError("missing catalog header")
        descriptor = CatalogDescriptor.parse(lines[0][len("# catalog "):])
        return cls(tuple(FaultSpec.from_string(ln) for ln in lines[1:]), descriptor)


def _corruption_kind(event) -> FaultKind:
    return FaultKind.FETCH_CORRUPT if isinstance(event, FetchEvent) else FaultKind.LOAD_CORRUPT


def generate_catalog(descriptor: CatalogDescriptor, golden: RunResult) -> FaultCatalog:
    """Enumerate or sample fault specs over the events of a fault-free run."""
    if not golden.trace:
        raise ValueError("golden run has an empty trace")
    events = [e for e in golden.trace
              if ("fetch" if isinstance(e, FetchEvent) else "load") in descriptor.targets]
    specs = []
    if descriptor.kind == "exhaustive1":
        for event in events:
            specs += [FaultSpec(_corruption_kind(event), event.index, 1 << bit) for bit in range(32)]
    elif descriptor.kind == "exhaustive2":
        for event in events:
            specs += [FaultSpec(_corruption_kind(event), event.index, (1 << a) | (1 << b))
                      for a, b in itertools.combinations(range(32), 2)]
    elif descriptor.kind == "sampled":
        if not events:
            raise ValueError("no events of the requested kinds in the golden trace")
        rng = np.random.default_rng(descriptor.seed)
        for _ in range(descriptor.count):
            event = events[int(rng.integers(len(events)))]
            bits = rng.choice(32, size=descriptor.flips, replace=False)
            mask = int(sum(1 << int(b) for b in bits))
            specs.append(FaultSpec(_corruption_kind(event), event.index, mask))
    else:
        specs += [FaultSpec(FaultKind.SKIP, e.index, granularity=SkipGranularity.ONE_INSTRUCTION)
                  for e in golden.executed]
        specs += [FaultSpec(FaultKind.SKIP, e.index, granularity=SkipGranularity.WHOLE_FETCH_WORD)
                  for e in golden.fetches]
    return FaultCatalog(tuple(specs), descriptor)


def only(catalog: FaultCatalog, granularity: SkipGranularity) -> FaultCatalog:
    """The skip specs of one granularity."""
    return FaultCatalog(tuple(s for s in catalog if s.granularity is granularity), catalog.descriptor)
