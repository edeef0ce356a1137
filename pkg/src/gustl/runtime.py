"""Execution of a single process image on one processing unit.

A :class:`Unit` is driven one instruction at a time by :func:`step`.  All
interaction with other units goes through the fabric object passed in,
which owns the token queues, the clock and the random source.  The fabric
must provide::

    clock                          current simulated time
    incoming(unit, port)           deque of tokens waiting at a local port
    consumed(unit, port, token)    bookkeeping after a token is taken
    can_transmit(unit, port)       non-blocking readiness probe
    transmit(unit, port, token)    True if sent, False if the channel is full
    spawn(name, dim, extra, unit)  control port id of a new process, or 0
    choose(n)                      uniform random index in range(n)
    note(unit, event, detail)      trace hook
"""

from dataclasses import dataclass, field
from typing import Optional

from . import arith
from .bytecode import (
    CODE_SPACE, LOCAL_SPACE, GUARD_AFTER, GUARD_BARE, GUARD_END, GUARD_NAMES, GUARD_RECV,
    GUARD_SEND, Image, Op,
)

RUNNING, STALLED, HALTED, TRAPPED = "running", "stalled", "halted", "trapped"

DATA, END, PAUSE = "data", "end", "pause"


@dataclass(frozen=True)
class Token:
    kind: str
    value: int = 0

    def __str__(self):
        return str(self.value) if self.kind == DATA else self.kind


def data(value):
    return Token(DATA, value & arith.MASK)


END_TOKEN = Token(END)
PAUSE_TOKEN = Token(PAUSE)


class Trap(Exception):
    """Aborts the current process."""


def receive(queue, want_end=False):
    """Non-blocking reception from a token queue.

    Returns ``(result, token)`` where ``token`` is whatever was consumed
    (or None).  For a data reception (``want_end`` false) a data token is
    consumed and returned with result 1; an end token is consumed with
    result 0.  For an end reception only an end token is consumed, giving
    1; data stays queued.
    """
    if not queue:
        return 0, None
    head = queue[0]
    if want_end:
        if head.kind == END:
            return 1, queue.popleft()
        return 0, None
    if head.kind == DATA:
        return 1, queue.popleft()
    if head.kind == END:
        return 0, queue.popleft()
    return 0, None


@dataclass
class Port:
    gid: int
    dest: int = 0


@dataclass(eq=False)
class Unit:
    image: Image
    dimension: int
    name: str = ""
    index: int = 0
    pid: int = 0
    memory: list = field(default_factory=list)
    stack: list = field(default_factory=list)
    frames: list = field(default_factory=list)  # (return pc, slots, frame memory mark)
    scratch: list = field(default_factory=list)  # frame memory for local arrays
    ports: list = field(default_factory=list)
    pc: int = 0
    state: Optional[int] = None
    deadline: Optional[int] = None
    status: str = RUNNING
    trap: Optional[str] = None
    max_depth: int = 1024
    max_stack: int = 1 << 16
    max_scratch: int = 1 << 22

    def __post_init__(self):
        if not self.memory:
            self.memory = [0] * self.image.data_size(self.dimension)
        self.pc = self.image.entry


def port_count(image):
    """Number of ports declared by the PORTS instruction at the entry."""
    body = image.body
    if len(body) > image.entry + 1 and body[image.entry] == Op.PORTS:
        return max(1, body[image.entry + 1])
    return 1


# ------------------------------------------------------------- interpreter

def _binary(fn):
    def op(u, f):
        b = u.stack.pop()
        a = u.stack.pop()
        u.stack.append(fn(a, b))
    return op


def _unary(fn):
    def op(u, f):
        u.stack.append(fn(u.stack.pop()))
    return op


def _port(u, port):
    if port >= len(u.ports):
        raise Trap(f"no port {port}")
    return u.ports[port]


def _imm(u, k=1):
    body = u.image.body
    if u.pc + k >= len(body):
        raise Trap("truncated instruction")
    return body[u.pc + k]


def _op_push(u, f):
    u.stack.append(_imm(u))
    u.pc += 1


def _op_pushaff(u, f):
    a, b = _imm(u), _imm(u, 2)
    u.stack.append((a * u.dimension + b) & arith.MASK)
    u.pc += 2


def _op_pop(u, f):
    u.stack.pop()


def _op_dup(u, f):
    u.stack.append(u.stack[-1])


def _op_swap(u, f):
    s = u.stack
    s[-1], s[-2] = s[-2], s[-1]


def _address(u, addr):
    if addr >= len(u.memory):
        raise Trap(f"data address {addr} out of range")
    return addr


def _op_load(u, f):
    u.stack.append(u.memory[_address(u, _imm(u))])
    u.pc += 1


def _op_store(u, f):
    u.memory[_address(u, _imm(u))] = u.stack.pop()
    u.pc += 1


def _slots(u):
    if not u.frames:
        raise Trap("no subroutine frame")
    return u.frames[-1][1]


def _op_loadl(u, f):
    slots = _slots(u)
    k = _imm(u)
    if k >= len(slots):
        raise Trap(f"frame slot {k} out of range")
    u.stack.append(slots[k])
    u.pc += 1


def _op_storel(u, f):
    slots = _slots(u)
    k = _imm(u)
    if k >= len(slots):
        raise Trap(f"frame slot {k} out of range")
    slots[k] = u.stack.pop()
    u.pc += 1


def _element(u, ref, length, i):
    """Resolve element ``i`` of an array reference to (words, address)."""
    if i >= length:
        raise Trap(f"index {i} out of bounds for length {length}")
    if ref & CODE_SPACE:
        words, addr = u.image.body, (ref & ~CODE_SPACE) + i
    elif ref & LOCAL_SPACE:
        words, addr = u.scratch, (ref & ~LOCAL_SPACE) + i
    else:
        words, addr = u.memory, ref + i
    if addr >= len(words):
        raise Trap(f"address {addr} out of range")
    return words, addr


def _op_loadi(u, f):
    i = u.stack.pop()
    length = u.stack.pop()
    ref = u.stack.pop()
    words, addr = _element(u, ref, length, i)
    u.stack.append(words[addr])


def _op_storei(u, f):
    i = u.stack.pop()
    length = u.stack.pop()
    ref = u.stack.pop()
    v = u.stack.pop()
    words, addr = _element(u, ref, length, i)
    if words is u.image.body:
        raise Trap("write to constant array")
    words[addr] = v


def _op_subref(u, f):
    off = u.stack.pop()
    length = u.stack.pop()
    ref = u.stack.pop()
    if off > length:
        raise Trap(f"offset {off} out of bounds for length {length}")
    u.stack.append(ref + off)
    u.stack.append(length - off)


def _op_fitref(u, f):
    need = u.stack.pop()
    length = u.stack.pop()
    if length < need:
        raise Trap(f"array of length {length} passed where {need} are required")
    u.stack.append(need)


def _trapping(fn):
    def op(u, f):
        b = u.stack.pop()
        a = u.stack.pop()
        try:
            u.stack.append(fn(a, b))
        except arith.ArithmeticTrap as exc:
            raise Trap(str(exc))
    return op


def _op_jmp(u, f):
    u.pc = _imm(u) - 1


def _op_jz(u, f):
    target = _imm(u)
    if u.stack.pop() == 0:
        u.pc = target - 1
    else:
        u.pc += 1


def _op_call(u, f):
    target, nargs, nlocals = _imm(u), _imm(u, 2), _imm(u, 3)
    if len(u.frames) >= u.max_depth:
        raise Trap("call stack overflow")
    if nargs > len(u.stack):
        raise Trap("stack underflow")
    args = u.stack[len(u.stack) - nargs:]
    del u.stack[len(u.stack) - nargs:]
    u.frames.append((u.pc + 4, args + [0] * nlocals, len(u.scratch)))
    u.pc = target - 1


def _op_ret(u, f):
    if not u.frames:
        raise Trap("return without call")
    ret, _, mark = u.frames.pop()
    del u.scratch[mark:]
    u.pc = ret - 1


def _op_framealloc(u, f):
    n = u.stack.pop()
    if not u.frames:
        raise Trap("no subroutine frame")
    if len(u.scratch) + n > u.max_scratch:
        raise Trap("frame memory exhausted")
    u.stack.append(LOCAL_SPACE | len(u.scratch))
    u.scratch.extend([0] * n)


def _op_halt(u, f):
    u.status = HALTED
    u.pc -= 1


def _op_trap(u, f):
    raise Trap(f"trap instruction {_imm(u)}")


def _op_ports(u, f):
    u.pc += 1


def _op_portset(u, f):
    port = u.stack.pop()
    _port(u, port).dest = u.stack.pop()


def _op_portread(u, f):
    u.stack.append(_port(u, u.stack.pop()).dest)


def _transmit(u, f, token, nargs):
    port = u.stack[-1]
    _port(u, port)
    if not f.transmit(u, port, token):
        u.status = STALLED
        u.pc -= 1  # retry the instruction on the next turn
        return
    del u.stack[len(u.stack) - nargs:]


def _op_send(u, f):
    if len(u.stack) < 2:
        raise Trap("stack underflow")
    _transmit(u, f, data(u.stack[-2]), 2)


def _op_sendend(u, f):
    _transmit(u, f, END_TOKEN, 1)


def _op_sendpause(u, f):
    _transmit(u, f, PAUSE_TOKEN, 1)


def _op_recv(u, f):
    port = u.stack.pop()
    _port(u, port)
    result, token = receive(f.incoming(u, port))
    if token is not None:
        f.consumed(u, port, token)
    if result:
        u.stack.append(token.value)
    u.stack.append(result)


def _op_recvend(u, f):
    port = u.stack.pop()
    _port(u, port)
    result, token = receive(f.incoming(u, port), want_end=True)
    if token is not None:
        f.consumed(u, port, token)
    u.stack.append(result)


def _op_now(u, f):
    u.stack.append(f.clock & arith.MASK)


def _op_newproc(u, f):
    extra = u.stack.pop()
    dim = u.stack.pop()
    length = u.stack.pop()
    ref = u.stack.pop()
    name = []
    for i in range(length):
        words, addr = _element(u, ref, length, i)
        name.append(words[addr])
    u.stack.append(f.spawn(name, dim, extra, u))


def _op_setstate(u, f):
    u.state = _imm(u)
    u.deadline = None
    u.stack.clear()
    u.pc += 1


def _op_armtimer(u, f):
    u.deadline = f.clock + u.stack.pop()


def _guard_ready(u, f, kind, port):
    if kind == GUARD_BARE:
        return True
    if kind == GUARD_AFTER:
        return u.deadline is not None and f.clock >= u.deadline
    if kind == GUARD_SEND:
        return f.can_transmit(u, port)
    q = f.incoming(u, port)
    if not q:
        return False
    return q[0].kind == (DATA if kind == GUARD_RECV else END)


def _op_guardwait(u, f):
    body = u.image.body
    table = _imm(u)
    if table >= len(body) or table + 1 + 3 * body[table] > len(body):
        raise Trap("malformed guard table")
    count = body[table]
    if count == 0:
        u.status = HALTED
        u.pc -= 1
        return
    ready = []
    for k in range(count):
        kind, port, target = body[table + 1 + 3 * k: table + 4 + 3 * k]
        if kind > GUARD_AFTER:
            raise Trap(f"bad guard kind {kind}")
        if kind in (GUARD_SEND, GUARD_RECV, GUARD_END):
            _port(u, port)
        if _guard_ready(u, f, kind, port):
            ready.append((k, kind, port, target))
    if not ready:
        u.status = STALLED
        u.pc -= 1
        return
    k, kind, port, target = ready[f.choose(len(ready))] if len(ready) > 1 else ready[0]
    if kind in (GUARD_RECV, GUARD_END):
        token = f.incoming(u, port).popleft()
        f.consumed(u, port, token)
        if kind == GUARD_RECV:
            u.stack.append(token.value)
    u.deadline = None
    f.note(u, "guard", f"state={u.state} arm={k} {GUARD_NAMES[kind]}")
    u.pc = target - 1


HANDLERS = [None] * (max(Op) + 1)
for _op, _fn in {
    Op.PUSH: _op_push, Op.PUSHAFF: _op_pushaff, Op.POP: _op_pop,
    Op.DUP: _op_dup, Op.SWAP: _op_swap, Op.LOAD: _op_load, Op.STORE: _op_store,
    Op.LOADL: _op_loadl, Op.STOREL: _op_storel, Op.LOADI: _op_loadi,
    Op.STOREI: _op_storei, Op.SUBREF: _op_subref, Op.FITREF: _op_fitref,
    Op.ADD: _binary(arith.add), Op.SUB: _binary(arith.sub),
    Op.MUL: _binary(arith.mul),
    Op.DIVU: _trapping(arith.div_u), Op.DIVE: _trapping(arith.div_e),
    Op.MODU: _trapping(arith.mod_u), Op.MODE: _trapping(arith.mod_e),
    Op.AND: _binary(lambda a, b: a & b), Op.OR: _binary(lambda a, b: a | b),
    Op.XOR: _binary(lambda a, b: a ^ b),
    Op.NOT: _unary(arith.bit_not), Op.NEG: _unary(arith.neg),
    Op.SHL: _binary(arith.shl), Op.SHRU: _binary(arith.shr_u),
    Op.SHRA: _binary(arith.shr_a),
    Op.EQ: _binary(arith.eq), Op.NE: _binary(arith.ne),
    Op.LTU: _binary(arith.lt_u), Op.LTS: _binary(arith.lt_s),
    Op.LEU: _binary(arith.le_u), Op.LES: _binary(arith.le_s),
    Op.GTU: _binary(arith.gt_u), Op.GTS: _binary(arith.gt_s),
    Op.GEU: _binary(arith.ge_u), Op.GES: _binary(arith.ge_s),
    Op.JMP: _op_jmp, Op.JZ: _op_jz, Op.CALL: _op_call, Op.RET: _op_ret,
    Op.HALT: _op_halt, Op.TRAP: _op_trap, Op.PORTS: _op_ports,
    Op.PORTSET: _op_portset, Op.PORTREAD: _op_portread,
    Op.SEND: _op_send, Op.SENDEND: _op_sendend, Op.SENDPAUSE: _op_sendpause,
    Op.RECV: _op_recv, Op.RECVEND: _op_recvend, Op.NOW: _op_now,
    Op.NEWPROC: _op_newproc, Op.SETSTATE: _op_setstate,
    Op.ARMTIMER: _op_armtimer, Op.GUARDWAIT: _op_guardwait, Op.FRAMEALLOC: _op_framealloc,
}.items():
    HANDLERS[_op] = _fn


def step(u: Unit, f) -> str:
    """Execute one instruction of ``u``; returns the unit's new status.

    A stalled unit retries the instruction it stalled on.  Any fault ends
    the process with status ``trapped`` and the reason in ``u.trap``.
    """
    body = u.image.body
    pc = u.pc
    if pc >= len(body):
        return _fault(u, f, f"pc {pc} outside code")
    op = body[pc]
    handler = HANDLERS[op] if op < len(HANDLERS) else None
    if handler is None:
        return _fault(u, f, f"unknown opcode {op} at {pc}")
    u.status = RUNNING
    try:
        handler(u, f)
    except Trap as exc:
        return _fault(u, f, str(exc))
    except IndexError:
        return _fault(u, f, "stack underflow")
    u.pc += 1
    if len(u.stack) > u.max_stack:
        return _fault(u, f, "data stack overflow")
    return u.status


def _fault(u, f, reason):
    u.status = TRAPPED
    u.trap = reason
    f.note(u, "trap", reason)
    return TRAPPED
