"""Command line entry point: ``gustl compile|check|run|disasm|opcodes``.

Exit codes
    0  success (run: every process halted)
    1  compile diagnostics, or an undecodable image for disasm
    2  I/O failure, or the root program is missing from the store
    3  run ended without progress (deadlock or stuck)
    4  run ended with at least one trapped process
    5  run hit the step limit
"""

import argparse
import json
import sys
from pathlib import Path

from .bytecode import FormatError, decode_image, disassemble, encode_image, opcode_markdown, opcode_table
from .codegen import compile_program
from .diagnostics import CompileError, Diagnostic
from .fabric import Fabric, RunConfig, load_store
from .sema import analyze
from .syntax import dump, parse


class Sources:
    """Concatenation of input files, remembering where each one starts."""

    def __init__(self, names):
        self.parts = []  # (name, first line)
        chunks = []
        line = 1
        if not names:
            data = sys.stdin.buffer.read()
            self.parts.append(("<stdin>", 1))
            chunks.append(data)
        for name in names:
            data = Path(name).read_bytes()
            self.parts.append((name, line))
            chunks.append(data)
            line += data.count(b"\n")
        self.data = b"".join(chunks)

    def locate(self, d: Diagnostic):
        name, first = self.parts[0]
        for n, start in self.parts:
            if start <= d.line:
                name, first = n, start
        return name, d.line - first + 1


def _report(diags, sources, fmt):
    for d in diags:
        name, line = sources.locate(d)
        if fmt == "json-lines":
            rec = json.loads(d.to_json())
            rec.update(file=name, line=line)
            print(json.dumps(rec, sort_keys=True), file=sys.stderr)
        else:
            print(f"{name}:{line}:{d.column}: error {d.code}: {d.message}", file=sys.stderr)


def _front(args, codegen):
    try:
        sources = Sources(args.files)
    except OSError as exc:
        print(f"gustl: {exc}", file=sys.stderr)
        return 2, None
    try:
        tree = parse(sources.data)
        if getattr(args, "dump_ast", False):
            print(dump(tree), file=sys.stderr)
        checked = analyze(tree)
    except CompileError as exc:
        _report(exc.diagnostics, sources, args.diag)
        return 1, None
    return 0, compile_program(checked) if codegen else None


def cmd_compile(args):
    code, image = _front(args, codegen=True)
    if code:
        return code
    blob = encode_image(image)
    try:
        if args.output:
            Path(args.output).write_bytes(blob)
        else:
            sys.stdout.buffer.write(blob)
            sys.stdout.buffer.flush()
    except OSError as exc:
        print(f"gustl: {exc}", file=sys.stderr)
        return 2
    return 0


def cmd_check(args):
    code, _ = _front(args, codegen=False)
    return code


def cmd_disasm(args):
    try:
        blob = Path(args.image).read_bytes()
    except OSError as exc:
        print(f"gustl: {exc}", file=sys.stderr)
        return 2
    try:
        image = decode_image(blob)
    except FormatError as exc:
        print(f"gustl: {args.image}: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(disassemble(image))
    return 0


def cmd_run(args):
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    for key in ("units", "capacity", "seed", "max_steps"):
        value = getattr(args, key)
        if value is not None:
            setattr(config, key, value)
    if args.trace:
        config.trace = True
    root, store_dir = args.root, Path(args.store)
    if root.endswith(".gsx"):
        store_dir, root = Path(root).parent, Path(root).stem
    try:
        store = load_store(store_dir)
    except (OSError, FormatError) as exc:
        print(f"gustl: {exc}", file=sys.stderr)
        return 2
    if root not in store:
        print(f"gustl: no program {root!r} in {store_dir}", file=sys.stderr)
        return 2
    sink = print if config.trace else None
    fabric = Fabric(store, config, sink=sink)
    report = fabric.run(root, args.dimension, args.input)
    print(report.summary())
    return report.exit_code


def cmd_opcodes(args):
    if args.format == "json":
        print(json.dumps(opcode_table(), indent=1))
    else:
        sys.stdout.write(opcode_markdown())
    return 0


def _word(text):
    return int(text, 0) & 0xFFFFFFFF


def build_parser():
    ap = argparse.ArgumentParser(prog="gustl", description="Guarded States Language toolchain")
    sub = ap.add_subparsers(dest="command", required=True)

    def front(p):
        p.add_argument("files", nargs="*", help="source files, concatenated in order "
                                                "(standard input if none)")
        p.add_argument("--diag", choices=("text", "json-lines"), default="text",
                       help="diagnostic format on standard error")
        p.add_argument("--dump-ast", action="store_true", help="print the syntax tree")

    p = sub.add_parser("compile", help="compile sources to an image")
    front(p)
    p.add_argument("-o", "--output", help="image file (default: standard output)")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("check", help="lex, parse and analyze only")
    front(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="simulate a program on the fabric")
    p.add_argument("root", help="program name in the store, or a .gsx path")
    p.add_argument("--store", default=".", help="directory of .gsx images")
    p.add_argument("--dimension", type=_word, default=0)
    p.add_argument("--seed", type=int)
    p.add_argument("--units", type=int)
    p.add_argument("--capacity", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--trace", action="store_true", help="stream scheduler events")
    p.add_argument("--config", help="key=value run configuration file")
    p.add_argument("--input", type=_word, action="append", default=[],
                   help="word sent to the root's control port before start")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("disasm", help="disassemble an image")
    p.add_argument("image")
    p.set_defaults(func=cmd_disasm)

    p = sub.add_parser("opcodes", help="print the opcode table")
    p.add_argument("--format", choices=("markdown", "json"), default="markdown")
    p.set_defaults(func=cmd_opcodes)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
