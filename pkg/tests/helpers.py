"""Shared corpus access and small runners for the test suite."""

from pathlib import Path

from gustl.codegen import compile_source
from gustl.fabric import Fabric, RunConfig

CORPUS = Path(__file__).parent / "corpus"


def positive_programs():
    return sorted((CORPUS / "positive").glob("*.gs")) + sorted((CORPUS / "run").glob("*.gs"))


def negative_programs():
    return sorted((CORPUS / "negative").glob("*.gs"))


def expected_code(path):
    first = path.read_text().splitlines()[0]
    return first.split("expect:")[1].strip(" }")


def run_store():
    return {p.stem: compile_source(p.read_bytes()) for p in sorted((CORPUS / "run").glob("*.gs"))}


def run_source(source, dimension=0, inputs=(), extra=None, **settings):
    """Compile ``source`` as program ``main`` and run it; returns the fabric report."""
    store = dict(extra or {})
    store["main"] = compile_source(source)
    fabric = Fabric(store, RunConfig(**settings))
    return fabric.run("main", dimension, inputs)


def signed(words):
    return [w - (1 << 32) if w & 0x80000000 else w for w in words]
