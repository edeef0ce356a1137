"""Translate a checked program into an :class:`~gustl.bytecode.Image`.

Layout of the code segment::

    entry: PORTS n, initialisation statements
           per state: [after-expression ARMTIMER] GUARDWAIT table
           guarded statement bodies
           subroutines
           constant pool (constant arrays, guard tables)

Operands are evaluated left to right.  A transition lowers to ``SETSTATE s``
followed by a jump to the state's wait stub, or ``HALT`` when no guarded
statement mentions the state.
"""

from . import arith
from .bytecode import (
    CODE_SPACE, GUARD_AFTER, GUARD_BARE, GUARD_END, GUARD_RECV, GUARD_SEND,
    Image, Op,
)
from .sema import (
    ARRAY, CONST, CONSTARRAY, FORMAL_ARRAY, FORMAL_CONSTARRAY, FORMAL_PORT,
    FORMAL_WORD, PORT, WORD, CheckedProgram,
)
from .syntax import (
    After, Asm, Assign, Binary, Call, CallStmt, If, Index, Name, Next, Now,
    Num, Paren, Receive, ReceiveGuard, Repeat, Send, SizeOf, TransmitReady,
    Unary,
)

BINARY_OPS = {
    ("+", False): Op.ADD, ("-", False): Op.SUB, ("*", False): Op.MUL,
    ("/", False): Op.DIVU, ("/", True): Op.DIVE,
    ("%", False): Op.MODU, ("%", True): Op.MODE,
    ("&", False): Op.AND, ("and", False): Op.AND,
    ("|", False): Op.OR, ("or", False): Op.OR, ("^", False): Op.XOR,
    ("<<", False): Op.SHL, (">>", False): Op.SHRU, (">>", True): Op.SHRA,
    ("=", False): Op.EQ, ("<>", False): Op.NE,
    ("<", False): Op.LTU, ("<", True): Op.LTS,
    ("<=", False): Op.LEU, ("<=", True): Op.LES,
    (">", False): Op.GTU, (">", True): Op.GTS,
    (">=", False): Op.GEU, (">=", True): Op.GES,
}
UNARY_OPS = {"-": Op.NEG, "~": Op.NOT, "not": Op.NOT}

MAX_CODE = 1 << 31  # tagged references need the top bit


class Label:
    __slots__ = ("addr", "pool")

    def __init__(self, pool=False):
        self.addr = None
        self.pool = pool


class Codegen:
    def __init__(self, checked: CheckedProgram):
        self.p = checked
        self.code = []
        self.pool = []
        self.fixups = []  # (in_pool, index, label, tagged)
        self.sub_labels = {}
        self.const_labels = {}
        self.wait_labels = {}

    # --------------------------------------------------------------- emit
    def emit(self, op, *imm):
        self.code.append(int(op))
        for w in imm:
            if isinstance(w, Label):
                self.ref(w)
            else:
                self.code.append(w & arith.MASK)

    def ref(self, label, tagged=False, in_pool=False):
        target = self.pool if in_pool else self.code
        self.fixups.append((in_pool, len(target), label, tagged))
        target.append(0)

    def place(self, label):
        label.addr = len(self.code)

    def push_affine(self, v):
        if v.is_const:
            self.emit(Op.PUSH, v.b)
        else:
            self.emit(Op.PUSHAFF, v.a, v.b)

    def sym(self, node):
        return self.p.symbols[id(node)]

    # ------------------------------------------------------ entry points
    def compile(self) -> Image:
        tree = self.p.tree
        for state in self.p.states:
            if self.p.state_guards[state.state]:
                self.wait_labels[state.state] = Label()
        for sub in self.p.subroutines:
            self.sub_labels[id(sub)] = Label()

        self.emit(Op.PORTS, len(self.p.ports))
        self.statements(tree.init)
        if not self.p.states:
            self.emit(Op.HALT)

        bodies = {id(g): Label() for g in tree.guarded}
        for state in self.p.states:
            guards = self.p.state_guards[state.state]
            if not guards:
                continue
            self.place(self.wait_labels[state.state])
            table = Label(pool=True)
            for g in guards:
                if isinstance(g.guard, After):
                    self.expr(g.guard.expr)
                    self.emit(Op.ARMTIMER)
            self.emit(Op.GUARDWAIT, table)
            table.addr = len(self.pool)
            self.pool.append(len(guards))
            for g in guards:
                kind, port = self.guard_entry(g.guard)
                self.pool.extend((kind, port))
                self.ref(bodies[id(g)], in_pool=True)

        for g in tree.guarded:
            self.place(bodies[id(g)])
            if isinstance(g.guard, ReceiveGuard) and g.guard.target is not None:
                self.store(g.guard.target)
            self.statements(g.body)

        for sub in self.p.subroutines:
            self.place(self.sub_labels[id(sub)])
            for arr in sub.arrays:
                self.push_affine(arr.size)
                self.emit(Op.FRAMEALLOC)
                self.emit(Op.STOREL, arr.slot)
                self.push_affine(arr.size)
                self.emit(Op.STOREL, arr.slot + 1)
            self.statements(sub.decl.body)
            if sub.kind == "function":
                self.expr(sub.decl.result)
            self.emit(Op.RET)

        return self.link()

    def guard_entry(self, guard):
        if guard is None:
            return GUARD_BARE, 0
        if isinstance(guard, After):
            return GUARD_AFTER, 0
        port = self.sym(guard).port
        if isinstance(guard, TransmitReady):
            return GUARD_SEND, port
        return (GUARD_RECV if guard.target is not None else GUARD_END), port

    def const_array(self, sym):
        label = self.const_labels.get(id(sym))
        if label is None:
            label = Label(pool=True)
            label.addr = len(self.pool)
            self.pool.extend(sym.values)
            self.const_labels[id(sym)] = label
        return label

    def link(self) -> Image:
        base = len(self.code)
        body = self.code + self.pool
        if len(body) >= MAX_CODE:
            raise OverflowError("code segment exceeds the addressable size")
        for in_pool, index, label, tagged in self.fixups:
            addr = label.addr + (base if label.pool else 0)
            if tagged:
                addr |= CODE_SPACE
            body[index + (base if in_pool else 0)] = addr
        return Image(d1=self.p.d1, d0=self.p.d0, entry=0, body=tuple(body))

    # -------------------------------------------------------- statements
    def statements(self, body):
        for s in body:
            self.statement(s)

    def statement(self, s):
        if isinstance(s, If):
            end = Label()
            for cond, body in s.arms:
                skip = Label()
                self.expr(cond)
                self.emit(Op.JZ, skip)
                self.statements(body)
                self.emit(Op.JMP, end)
                self.place(skip)
            if s.else_body is not None:
                self.statements(s.else_body)
            self.place(end)
        elif isinstance(s, Repeat):
            top, exit_ = Label(), Label()
            self.expr(s.count)
            self.place(top)
            self.emit(Op.DUP)
            self.emit(Op.JZ, exit_)
            if s.while_ is not None:
                self.expr(s.while_)
                self.emit(Op.JZ, exit_)
            self.statements(s.body)
            self.emit(Op.PUSH, 1)
            self.emit(Op.SUB)
            if s.until is not None:
                self.expr(s.until)
                self.emit(Op.JZ, top)
            else:
                self.emit(Op.JMP, top)
            self.place(exit_)
            self.emit(Op.POP)
        elif isinstance(s, Next):
            state = self.sym(s).state
            self.emit(Op.SETSTATE, state)
            if state in self.wait_labels:
                self.emit(Op.JMP, self.wait_labels[state])
            else:
                self.emit(Op.HALT)
        elif isinstance(s, Assign):
            if isinstance(s.value, Asm):
                self.inline_asm(s.value)
            else:
                self.expr(s.value)
            self.store(s.target)
        elif isinstance(s, Send):
            if s.kind == "data":
                self.expr(s.value)
                self.port_ref(self.sym(s))
                self.emit(Op.SEND)
            else:
                self.port_ref(self.sym(s))
                self.emit(Op.SENDEND if s.kind == "end" else Op.SENDPAUSE)
        elif isinstance(s, CallStmt):
            self.call(s)
        elif isinstance(s, Asm):
            self.inline_asm(s)
        else:
            raise TypeError(s)

    def inline_asm(self, a):
        for item in a.items:
            if item.is_expr:
                self.expr(item.value)
            else:
                self.code.append(self.p.asm_words[id(item)])

    def store(self, target):
        """Store the word on top of the stack into a variable."""
        sym = self.sym(target)
        if isinstance(target, Index):
            self.array_ref(sym)
            self.expr(target.index)
            self.emit(Op.STOREI)
        elif sym.kind == WORD and not sym.local:
            self.emit(Op.STORE, sym.address.b)
        elif sym.kind in (WORD, FORMAL_WORD):
            self.emit(Op.STOREL, sym.slot)
        else:
            self.port_ref(sym)
            self.emit(Op.PORTSET)

    def port_ref(self, sym):
        if sym.kind == FORMAL_PORT:
            self.emit(Op.LOADL, sym.slot)
        else:
            self.emit(Op.PUSH, sym.port)

    def array_ref(self, sym):
        """Push reference and length of an array."""
        if sym.kind == ARRAY and not sym.local:
            self.push_affine(sym.address)
            self.push_affine(sym.size)
        elif sym.kind == CONSTARRAY:
            self.emit(Op.PUSH)
            self.ref(self.const_array(sym), tagged=True)
            self.emit(Op.PUSH, len(sym.values))
        else:
            self.emit(Op.LOADL, sym.slot)
            self.emit(Op.LOADL, sym.slot + 1)

    def call(self, node):
        sub = self.sym(node)
        for arg, formal in zip(node.args, sub.formals):
            if formal.kind == FORMAL_WORD:
                self.expr(arg)
            elif formal.kind == FORMAL_PORT:
                self.port_ref(self.sym(arg))
            else:
                self.array_ref(self.sym(arg))
                if isinstance(arg, Index):
                    self.expr(arg.index)
                    self.emit(Op.SUBREF)
                if formal.size is not None:
                    self.push_affine(formal.size)
                    self.emit(Op.FITREF)
        if sub.builtin == "new":
            self.emit(Op.NEWPROC)
            return
        self.emit(Op.CALL, self.sub_labels[id(sub)], sub.nslots - sub.nlocals, sub.nlocals)

    # -------------------------------------------------------- expressions
    def expr(self, e):
        if isinstance(e, Num):
            self.emit(Op.PUSH, e.value)
        elif isinstance(e, Paren):
            self.expr(e.expr)
        elif isinstance(e, Name):
            sym = self.sym(e)
            if sym.kind == CONST:
                if sym.value is not None:
                    self.push_affine(sym.value)
                else:
                    self.expr(sym.expr)
            elif sym.kind == WORD and not sym.local:
                self.emit(Op.LOAD, sym.address.b)
            elif sym.kind in (WORD, FORMAL_WORD):
                self.emit(Op.LOADL, sym.slot)
            elif sym.kind in (PORT, FORMAL_PORT):
                self.port_ref(sym)
                self.emit(Op.PORTREAD)
            else:
                raise TypeError(sym)
        elif isinstance(e, Index):
            self.array_ref(self.sym(e))
            self.expr(e.index)
            self.emit(Op.LOADI)
        elif isinstance(e, SizeOf):
            sym = self.sym(e)
            if sym.kind in (ARRAY, CONSTARRAY):
                self.push_affine(sym.size)
            else:
                self.emit(Op.LOADL, sym.slot + 1)
        elif isinstance(e, Call):
            self.call(e)
        elif isinstance(e, Now):
            self.emit(Op.NOW)
        elif isinstance(e, Receive):
            self.port_ref(self.sym(e))
            if e.target is None:
                self.emit(Op.RECVEND)
                return
            fail, done = Label(), Label()
            self.emit(Op.RECV)
            self.emit(Op.JZ, fail)
            self.store(e.target)
            self.emit(Op.PUSH, 1)
            self.emit(Op.JMP, done)
            self.place(fail)
            self.emit(Op.PUSH, 0)
            self.place(done)
        elif isinstance(e, Unary):
            self.expr(e.operand)
            self.emit(UNARY_OPS[e.op])
        elif isinstance(e, Binary):
            self.expr(e.left)
            self.expr(e.right)
            self.emit(BINARY_OPS[e.op, e.signed])
        else:
            raise TypeError(e)


def compile_program(checked: CheckedProgram) -> Image:
    return Codegen(checked).compile()


def compile_source(source):
    """Lex, parse, check and compile source text in one go."""
    from .sema import analyze
    from .syntax import parse
    return compile_program(analyze(parse(source)))
