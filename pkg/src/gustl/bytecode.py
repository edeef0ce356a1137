"""Instruction set, binary image format and disassembler.

An image is a six-word header followed by the code and constants words::

    magic  0x85cf80cf
    flags  0
    d1     data size = d1 * dimension + d0
    d0
    code   number of code and constant words
    entry  word offset of the first instruction

All words are 32 bits, least significant byte first.

Each instruction is one opcode word followed by its immediate words.  Stack
effects below read left to right, deepest first, top of stack last.
"""

import struct
from dataclasses import dataclass
from enum import IntEnum

MAGIC = 0x85CF80CF
HEADER_WORDS = 6
CODE_SPACE = 0x80000000  # tag bit on array references into the code segment
LOCAL_SPACE = 0x40000000  # tag bit on references into subroutine frame memory


class FormatError(Exception):
    pass


class Op(IntEnum):
    PUSH = 1
    PUSHAFF = 2
    POP = 3
    DUP = 4
    SWAP = 5
    LOAD = 6
    STORE = 7
    LOADL = 8
    STOREL = 9
    LOADI = 10
    STOREI = 11
    SUBREF = 12
    FITREF = 13
    ADD = 14
    SUB = 15
    MUL = 16
    DIVU = 17
    DIVE = 18
    MODU = 19
    MODE = 20
    AND = 21
    OR = 22
    XOR = 23
    NOT = 24
    NEG = 25
    SHL = 26
    SHRU = 27
    SHRA = 28
    EQ = 29
    NE = 30
    LTU = 31
    LTS = 32
    LEU = 33
    LES = 34
    GTU = 35
    GTS = 36
    GEU = 37
    GES = 38
    JMP = 39
    JZ = 40
    CALL = 41
    RET = 42
    HALT = 43
    TRAP = 44
    PORTS = 45
    PORTSET = 46
    PORTREAD = 47
    SEND = 48
    SENDEND = 49
    SENDPAUSE = 50
    RECV = 51
    RECVEND = 52
    NOW = 53
    NEWPROC = 54
    SETSTATE = 55
    ARMTIMER = 56
    GUARDWAIT = 57
    FRAMEALLOC = 58


# opcode -> (immediate count, stack effect, description)
OPCODES = {
    Op.PUSH: (1, "-- k", "push immediate k"),
    Op.PUSHAFF: (2, "-- a*dim+b", "push a times the process dimension plus b"),
    Op.POP: (0, "x --", "discard top"),
    Op.DUP: (0, "x -- x x", "duplicate top"),
    Op.SWAP: (0, "x y -- y x", "exchange top two"),
    Op.LOAD: (1, "-- v", "push data word at absolute address"),
    Op.STORE: (1, "v --", "store to data word at absolute address"),
    Op.LOADL: (1, "-- v", "push frame slot"),
    Op.STOREL: (1, "v --", "store to frame slot"),
    Op.LOADI: (0, "ref len i -- v", "bounds-checked indexed load"),
    Op.STOREI: (0, "v ref len i --", "bounds-checked indexed store"),
    Op.SUBREF: (0, "ref len off -- ref' len'", "sub-array starting at off"),
    Op.FITREF: (0, "ref len n -- ref n", "require len >= n, narrow to n"),
    Op.ADD: (0, "a b -- a+b", "add"),
    Op.SUB: (0, "a b -- a-b", "subtract"),
    Op.MUL: (0, "a b -- a*b", "multiply"),
    Op.DIVU: (0, "a b -- a/b", "unsigned divide"),
    Op.DIVE: (0, "a b -- q", "signed Euclidean quotient"),
    Op.MODU: (0, "a b -- a%b", "unsigned remainder"),
    Op.MODE: (0, "a b -- r", "signed Euclidean remainder, 0 <= r < |b|"),
    Op.AND: (0, "a b -- a&b", "bitwise and"),
    Op.OR: (0, "a b -- a|b", "bitwise or"),
    Op.XOR: (0, "a b -- a^b", "bitwise exclusive or"),
    Op.NOT: (0, "a -- ~a", "bitwise complement"),
    Op.NEG: (0, "a -- -a", "two's complement negation"),
    Op.SHL: (0, "a n -- a<<n", "shift left, 0 if n >= 32"),
    Op.SHRU: (0, "a n -- a>>n", "logical shift right, 0 if n >= 32"),
    Op.SHRA: (0, "a n -- a>>$n", "arithmetic shift right"),
    Op.EQ: (0, "a b -- f", "equal"),
    Op.NE: (0, "a b -- f", "not equal"),
    Op.LTU: (0, "a b -- f", "unsigned less"),
    Op.LTS: (0, "a b -- f", "signed less"),
    Op.LEU: (0, "a b -- f", "unsigned less or equal"),
    Op.LES: (0, "a b -- f", "signed less or equal"),
    Op.GTU: (0, "a b -- f", "unsigned greater"),
    Op.GTS: (0, "a b -- f", "signed greater"),
    Op.GEU: (0, "a b -- f", "unsigned greater or equal"),
    Op.GES: (0, "a b -- f", "signed greater or equal"),
    Op.JMP: (1, "--", "jump to code offset"),
    Op.JZ: (1, "f --", "jump if zero"),
    Op.CALL: (3, "args --", "call addr with nargs argument slots and nlocals zeroed locals"),
    Op.RET: (0, "--", "return from subroutine"),
    Op.HALT: (0, "--", "terminate the process"),
    Op.TRAP: (1, "--", "abort the process with a code"),
    Op.PORTS: (1, "--", "declares the number of ports (first instruction)"),
    Op.PORTSET: (0, "v port --", "set port destination"),
    Op.PORTREAD: (0, "port -- dest", "read port destination"),
    Op.SEND: (0, "v port --", "send data word, blocks while channel is full"),
    Op.SENDEND: (0, "port --", "send end token"),
    Op.SENDPAUSE: (0, "port --", "send pause token"),
    Op.RECV: (0, "port -- v 1 | 0", "non-blocking data receive"),
    Op.RECVEND: (0, "port -- f", "non-blocking end-token receive"),
    Op.NOW: (0, "-- t", "push simulated clock"),
    Op.NEWPROC: (0, "ref len dim extra -- id", "start a process, push its control port id or 0"),
    Op.SETSTATE: (1, "--", "enter state s, clear data stack and timer"),
    Op.ARMTIMER: (0, "delay --", "deadline = now + delay"),
    Op.GUARDWAIT: (1, "--", "select a ready guard from table, or stall"),
    Op.FRAMEALLOC: (0, "n -- ref", "n zeroed words of frame memory, released by ret"),
}

# guard table kinds (table layout: count, then count x (kind, port, target))
GUARD_BARE, GUARD_SEND, GUARD_RECV, GUARD_END, GUARD_AFTER = range(5)
GUARD_NAMES = ["always", "send-ready", "receive", "receive-end", "after"]


def immediates(opcode):
    entry = OPCODES.get(opcode)
    return None if entry is None else entry[0]


def opcode_table():
    """Machine-readable opcode list."""
    return [
        {"name": op.name.lower(), "number": int(op), "immediates": imm,
         "stack": stack, "description": desc}
        for op, (imm, stack, desc) in sorted(OPCODES.items())
    ]


def opcode_markdown():
    lines = [
        "# Opcode table",
        "",
        "| number | mnemonic | immediates | stack | description |",
        "|---:|---|---:|---|---|",
    ]
    for row in opcode_table():
        lines.append(f"| {row['number']} | `{row['name']}` | {row['immediates']} "
                     f"| `{row['stack']}` | {row['description']} |")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Image:
    d1: int
    d0: int
    entry: int
    body: tuple
    flags: int = 0
    magic: int = MAGIC

    @property
    def code_size(self):
        return len(self.body)

    def header(self):
        return (self.magic, self.flags, self.d1, self.d0, self.code_size, self.entry)

    def data_size(self, dimension):
        return self.d1 * dimension + self.d0


def encode_image(image: Image) -> bytes:
    words = image.header() + tuple(image.body)
    return struct.pack(f"<{len(words)}I", *words)


def decode_image(data: bytes) -> Image:
    data = bytes(data)
    if len(data) < HEADER_WORDS * 4:
        raise FormatError(f"truncated header: {len(data)} bytes")
    magic, flags, d1, d0, code, entry = struct.unpack_from("<6I", data)
    if magic != MAGIC:
        raise FormatError(f"bad magic 0x{magic:08x}")
    if flags != 0:
        raise FormatError(f"unsupported flags 0x{flags:08x}")
    expected = (HEADER_WORDS + code) * 4
    if len(data) != expected:
        raise FormatError(f"length {len(data)} does not match header ({expected} bytes)")
    if entry >= code and not (code == 0 and entry == 0):
        raise FormatError(f"entry {entry} outside code of {code} words")
    body = struct.unpack_from(f"<{code}I", data, HEADER_WORDS * 4)
    return Image(d1, d0, entry, tuple(body), flags, magic)


# -------------------------------------------------------------- disassembly

def _reachable(image):
    """Walk control flow from the entry; returns (code offsets, guard tables)."""
    body = image.body
    n = len(body)
    code, tables = set(), {}
    work = [image.entry] if n else []
    while work:
        pc = work.pop()
        while 0 <= pc < n and pc not in code:
            op = body[pc]
            imm = immediates(op)
            if imm is None or pc + imm >= n:
                code.add(pc)
                break
            code.add(pc)
            nxt = pc + 1 + imm
            if op in (Op.JMP, Op.JZ, Op.CALL):
                work.append(body[pc + 1])
            if op == Op.GUARDWAIT:
                t = body[pc + 1]
                if t < n and t + 1 + 3 * body[t] <= n:
                    count = body[t]
                    tables[t] = count
                    for k in range(count):
                        work.append(body[t + 1 + 3 * k + 2])
            if op in (Op.JMP, Op.RET, Op.HALT, Op.TRAP):
                break
            pc = nxt
    return code, tables


def _operand(op, k, value):
    if k == 0 and op in (Op.JMP, Op.JZ, Op.CALL, Op.GUARDWAIT):
        return f"{value:04x}"
    if value & (CODE_SPACE | LOCAL_SPACE):
        return f"0x{value:08x}"
    return str(value)


def disassemble(image: Image) -> str:
    """Render an image as text, one instruction per line."""
    out = [
        f"; magic  0x{image.magic:08x}",
        f"; flags  {image.flags}",
        f"; d1     {image.d1}",
        f"; d0     {image.d0}",
        f"; code   {image.code_size}",
        f"; entry  {image.entry}",
    ]
    body = image.body
    code, tables = _reachable(image)
    pc, n = 0, len(body)
    while pc < n:
        if pc == image.entry:
            out.append("entry:")
        if pc in tables:
            count = tables[pc]
            out.append(f"{pc:04x}: .guards {count}")
            for k in range(count):
                kind, port, target = body[pc + 1 + 3 * k: pc + 4 + 3 * k]
                name = GUARD_NAMES[kind] if kind < len(GUARD_NAMES) else f"kind{kind}"
                out.append(f"{pc + 1 + 3 * k:04x}:   {name} port={port} -> {target:04x}")
            pc += 1 + 3 * count
            continue
        op = body[pc]
        imm = immediates(op)
        if pc in code and imm is not None and pc + imm < n:
            args = body[pc + 1: pc + 1 + imm]
            text = Op(op).name.lower()
            if args:
                text += " " + " ".join(_operand(op, k, a) for k, a in enumerate(args))
            out.append(f"{pc:04x}: {text}")
            pc += 1 + imm
        else:
            out.append(f"{pc:04x}: .word 0x{op:08x}")
            pc += 1
    return "\n".join(out) + "\n"
