"""Regenerate docs/opcodes.md from the instruction table."""

import argparse
from pathlib import Path

from gustl.bytecode import GUARD_NAMES, opcode_markdown

ROOT = Path(__file__).resolve().parents[1]


def render():
    guards = "\n".join(f"| {k} | {name} |" for k, name in enumerate(GUARD_NAMES))
    return (opcode_markdown()
            + "\nImmediates follow the opcode word.  Stack effects list operands deepest first.\n"
            + "\n## Guard table\n\nA `guardwait` operand points at `count` followed by "
            + "`count` triples `(kind, port, target)`.\n\n| kind | meaning |\n|---:|---|\n"
            + guards + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-o", "--output", default=ROOT / "docs" / "opcodes.md", type=Path)
    args = ap.parse_args()
    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_text(render())
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
