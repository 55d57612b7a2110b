"""Bundled test programs with their golden expectations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

NAMES = ("load_cafecafe", "bl_call", "ldr_detect", "restore_context", "task_create_args")


@dataclass(frozen=True)
class Benchmark:
    name: str
    source: str
    target: str
    expected: int
    error_handler: bool
    notes: str = ""
    scratch: str | None = None     # suggested scratch register for rewriting
    extra: dict = field(default_factory=dict)  # further golden values by location

    def program(self):
        from ..assembler import parse

        return parse(self.source)

    def image(self):
        from ..assembler import assemble

        return assemble(self.source)


def _manifest() -> dict:
    return json.loads(resources.files(__name__).joinpath("manifest.json").read_text())


def load_benchmark(name: str) -> Benchmark:
    manifest = _manifest()
    if name not in manifest:
        raise KeyError(f"unknown benchmark {name!r} (known: {', '.join(NAMES)})")
    entry = manifest[name]
    source = resources.files(__name__).joinpath(entry["file"]).read_text()
    return Benchmark(
        name=name,
        source=source,
        target=entry["target"],
        expected=int(entry["expected"], 16),
        error_handler=entry["error_handler"],
        notes=entry.get("notes", ""),
        scratch=entry.get("scratch"),
        extra={k: int(v, 16) for k, v in entry.get("extra", {}).items()},
    )


def all_benchmarks() -> list[Benchmark]:
    return [load_benchmark(name) for name in NAMES]
