"""Semantic analysis: scopes, constant evaluation and the static rules.

``analyze`` resolves every identifier use to a :class:`Symbol`, lays out
global data, and rejects programs that break a static rule.  Independent
errors are collected so that one run reports all of them.

Constants are evaluated as affine functions ``a*dimension + b`` of the
process dimension.  A scalar constant that depends on the dimension in a
non-affine way is still legal; it is then computed at run time.  Array
sizes must be affine.
"""

from dataclasses import dataclass, field
from typing import Optional

from . import arith
from .diagnostics import Diagnostic, SemaError
from .syntax import (
    After, Asm, Assign, Binary, Call, CallStmt, ConstArrayDef, ConstDef,
    FunctionDecl, If, Index, Name, Next, Now, Num, Paren, ProcedureDecl,
    Program, Receive, ReceiveGuard, Repeat, Send, SizeOf, Str, TransmitReady,
    Unary, WordsDecl,
)

# symbol kinds
PROCESS = "process"
STATE = "state"
PORT = "port"
CONST = "const"
CONSTARRAY = "constarray"
WORD = "word"
ARRAY = "array"
PROCEDURE = "procedure"
FUNCTION = "function"
FORMAL_WORD = "formal word"
FORMAL_ARRAY = "formal array"
FORMAL_CONSTARRAY = "formal constarray"
FORMAL_PORT = "formal port"

WORD_VALUES = (CONST, WORD, FORMAL_WORD, PORT, FORMAL_PORT)
ARRAYS = (ARRAY, FORMAL_ARRAY)
ANY_ARRAYS = (ARRAY, FORMAL_ARRAY, CONSTARRAY, FORMAL_CONSTARRAY)
PORTS = (PORT, FORMAL_PORT)

MAX_CONST_ARRAY = 1 << 20
SIZE_LIMIT = 1 << 31


@dataclass(frozen=True)
class Affine:
    """``a * dimension + b`` with word (mod 2**32) coefficients."""
    a: int
    b: int

    @property
    def is_const(self):
        return self.a == 0

    def __add__(self, o):
        return Affine(arith.add(self.a, o.a), arith.add(self.b, o.b))

    def __sub__(self, o):
        return Affine(arith.sub(self.a, o.a), arith.sub(self.b, o.b))

    def scale(self, k):
        return Affine(arith.mul(self.a, k), arith.mul(self.b, k))

    def at(self, dimension):
        return self.a * dimension + self.b


ZERO = Affine(0, 0)

# a dimension-dependent value that is not affine
DYNAMIC = object()


@dataclass(eq=False)
class Symbol:
    name: str
    kind: str
    pos: tuple = (0, 0)
    local: bool = False
    value: Optional[Affine] = None    # const
    expr: object = None               # const computed at run time
    values: Optional[list] = None     # constarray contents
    size: Optional[Affine] = None     # arrays; optional on formal arrays
    address: Optional[Affine] = None  # global data
    slot: int = 0                     # frame slot (locals and formals)
    port: int = 0                     # local port number
    state: int = 0
    formals: list = field(default_factory=list)
    arrays: list = field(default_factory=list)  # local arrays of a subroutine
    nlocals: int = 0
    nslots: int = 0
    decl: object = None
    builtin: Optional[str] = None
    dimension: bool = False

    def __repr__(self):
        return f"Symbol({self.name!r}, {self.kind})"


def _builtin_new():
    formals = [
        Symbol("name", FORMAL_CONSTARRAY, local=True, slot=0),
        Symbol("dimension", FORMAL_WORD, local=True, slot=2),
        Symbol("extra", FORMAL_WORD, local=True, slot=3),
    ]
    return Symbol("new", FUNCTION, formals=formals, builtin="new", nslots=4)


@dataclass
class CheckedProgram:
    tree: Program
    symbols: dict          # id(node) -> Symbol
    asm_words: dict        # id(AsmItem) -> folded word
    globals: dict
    states: list           # Symbol per state, index = state id
    ports: list            # Symbol per local port, index = port number
    variables: list        # global WORD/ARRAY symbols in layout order
    subroutines: list      # declaration order
    state_guards: dict     # state id -> [GuardedState]
    d1: int = 0
    d0: int = 0

    def sym(self, node):
        return self.symbols[id(node)]


class _Reject(Exception):
    def __init__(self, code, msg, pos):
        self.diag = Diagnostic(code, msg, pos[0], pos[1])


class Analyzer:
    def __init__(self, tree: Program):
        self.tree = tree
        self.errors = []
        self.globals = {}
        self.builtins = {"new": _builtin_new()}
        self.local = None  # dict while inside a subroutine
        self.sub = None
        self.symbols = {}
        self.asm_words = {}
        self.states = []
        self.ports = []
        self.variables = []
        self.subroutines = []

    # ------------------------------------------------------------ plumbing
    def error(self, code, msg, pos):
        self.errors.append(Diagnostic(code, msg, pos[0], pos[1]))

    def declare(self, sym):
        scope = self.local if self.local is not None else self.globals
        if sym.name in scope or (self.local is not None and sym.name in self.globals):
            self.error("E-REDECLARED", f"{sym.name!r} is already declared", sym.pos)
            return False
        scope[sym.name] = sym
        return True

    def find(self, name):
        if self.local is not None and name in self.local:
            return self.local[name]
        if name in self.globals:
            return self.globals[name]
        return self.builtins.get(name)

    def lookup(self, node, name, kinds, what):
        """Resolve ``name`` at ``node`` to a symbol of one of ``kinds``.

        Returns None (after recording a diagnostic) on failure.
        """
        sym = self.find(name)
        if sym is None:
            self.error("E-UNDECLARED", f"{name!r} is not declared", node.pos)
            return None
        self.symbols[id(node)] = sym
        if sym.kind not in kinds:
            self.error("E-KIND", f"{name!r} is a {sym.kind}, expected {what}", node.pos)
            return None
        return sym

    # ----------------------------------------------------- constant values
    def const_value(self, e):
        """Evaluate a constant expression to an Affine or DYNAMIC."""
        if isinstance(e, Num):
            return Affine(0, e.value)
        if isinstance(e, Paren):
            return self.const_value(e.expr)
        if isinstance(e, Name):
            sym = self.find(e.ident)
            if sym is None:
                raise _Reject("E-UNDECLARED", f"{e.ident!r} is not declared", e.pos)
            self.symbols[id(e)] = sym
            if sym.kind != CONST:
                raise _Reject("E-NOT-CONST", f"{e.ident!r} is not a constant", e.pos)
            return DYNAMIC if sym.value is None else sym.value
        if isinstance(e, Index):
            sym = self.find(e.ident)
            if sym is None:
                raise _Reject("E-UNDECLARED", f"{e.ident!r} is not declared", e.pos)
            self.symbols[id(e)] = sym
            if sym.kind != CONSTARRAY:
                raise _Reject("E-NOT-CONST", f"{e.ident!r} is not a constant array", e.pos)
            idx = self.const_value(e.index)
            if idx is DYNAMIC or not idx.is_const:
                raise _Reject("E-NOT-CONST", "constant array index must be constant", e.pos)
            if idx.b >= len(sym.values):
                raise _Reject("E-INDEX", f"index {idx.b} outside {e.ident!r}", e.pos)
            return Affine(0, sym.values[idx.b])
        if isinstance(e, SizeOf):
            sym = self.find(e.ident)
            if sym is None:
                raise _Reject("E-UNDECLARED", f"{e.ident!r} is not declared", e.pos)
            self.symbols[id(e)] = sym
            if sym.kind == ARRAY:
                return sym.size
            if sym.kind == CONSTARRAY:
                return Affine(0, len(sym.values))
            if sym.kind in (FORMAL_ARRAY, FORMAL_CONSTARRAY):
                raise _Reject("E-NOT-CONST", f"size of parameter {e.ident!r} is not constant", e.pos)
            raise _Reject("E-KIND", f"'#' needs an array, {e.ident!r} is a {sym.kind}", e.pos)
        if isinstance(e, Unary):
            v = self.const_value(e.operand)
            if v is DYNAMIC:
                return DYNAMIC
            if e.op == "-":
                return ZERO - v
            if not v.is_const:
                return DYNAMIC
            return Affine(0, arith.UNARY[e.op](v.b))
        if isinstance(e, Binary):
            left = self.const_value(e.left)
            right = self.const_value(e.right)
            if left is DYNAMIC or right is DYNAMIC:
                return DYNAMIC
            if left.is_const and right.is_const:
                try:
                    return Affine(0, arith.BINARY[e.op, e.signed](left.b, right.b))
                except arith.ArithmeticTrap:
                    raise _Reject("E-DIV-ZERO", "constant division by zero", e.pos)
            if e.op == "+":
                return left + right
            if e.op == "-":
                return left - right
            if e.op == "*" and right.is_const:
                return left.scale(right.b)
            if e.op == "*" and left.is_const:
                return right.scale(left.b)
            return DYNAMIC
        raise _Reject("E-NOT-CONST", "expression is not constant", e.pos)

    def word_const(self, e, what):
        """A constant that must be known at compile time (no dimension)."""
        v = self.const_value(e)
        if v is DYNAMIC or not v.is_const:
            raise _Reject("E-NOT-CONST", f"{what} must not depend on the dimension", e.pos)
        return v.b

    def size_value(self, e, what):
        v = self.const_value(e)
        if v is DYNAMIC:
            raise _Reject("E-NONAFFINE", f"{what} is not affine in the dimension", e.pos)
        if v.a >= SIZE_LIMIT or v.b >= SIZE_LIMIT:
            raise _Reject("E-SIZE", f"{what} is negative or too large", e.pos)
        return v

    # -------------------------------------------------------- declarations
    def declarations(self, decls):
        for d in decls:
            try:
                if isinstance(d, ConstDef):
                    self.const_def(d)
                elif isinstance(d, ConstArrayDef):
                    self.const_array_def(d)
                elif isinstance(d, WordsDecl):
                    self.words_decl(d)
                else:
                    self.subroutine(d)
            except _Reject as r:
                self.errors.append(r.diag)

    def const_def(self, d):
        sym = Symbol(d.name, CONST, d.pos, local=self.local is not None, decl=d)
        try:
            v = self.const_value(d.value)
        except _Reject as r:
            self.errors.append(r.diag)
            v = ZERO
        if v is DYNAMIC:
            sym.expr = d.value
        else:
            sym.value = v
        self.declare(sym)

    def const_array_def(self, d):
        sym = Symbol(d.name, CONSTARRAY, d.pos, decl=d)
        values = []
        for item in d.items:
            if isinstance(item, Str):
                values.extend(item.values)
            else:
                try:
                    values.append(self.word_const(item, "constant array element"))
                except _Reject as r:
                    self.errors.append(r.diag)
                    values.append(0)
        if d.size is not None:
            try:
                n = self.word_const(d.size, "constant array size")
            except _Reject as r:
                self.errors.append(r.diag)
                n = len(values)
            if n > MAX_CONST_ARRAY:
                self.error("E-SIZE", f"constant array {d.name!r} is too large", d.pos)
                n = len(values)
            if len(values) > n:
                self.error("E-CONST-OVERFLOW",
                           f"{len(values)} initial values exceed size {n} of {d.name!r}", d.pos)
            values = (values + [0] * n)[:n]
        sym.values = values
        sym.size = Affine(0, len(values))
        self.declare(sym)

    def words_decl(self, d):
        for w in d.items:
            if self.local is not None:
                self.local_decl(w)
                continue
            if w.size is None:
                sym = Symbol(w.name, WORD, w.pos, size=Affine(0, 1), decl=w)
            else:
                try:
                    size = self.size_value(w.size, f"size of {w.name!r}")
                except _Reject as r:
                    self.errors.append(r.diag)
                    size = ZERO
                sym = Symbol(w.name, ARRAY, w.pos, size=size, decl=w)
            if self.declare(sym):
                self.variables.append(sym)

    def local_decl(self, w):
        """Subroutine locals live in the frame; an array takes a (ref, len) slot pair."""
        if w.size is None:
            sym = Symbol(w.name, WORD, w.pos, local=True, decl=w)
            width = 1
        else:
            try:
                size = self.size_value(w.size, f"size of {w.name!r}")
            except _Reject as r:
                self.errors.append(r.diag)
                size = ZERO
            sym = Symbol(w.name, ARRAY, w.pos, local=True, size=size, decl=w)
            width = 2
        if self.declare(sym):
            sym.slot = self.sub.nslots
            self.sub.nslots += width
            self.sub.nlocals += width
            if width == 2:
                self.sub.arrays.append(sym)

    def subroutine(self, d):
        is_func = isinstance(d, FunctionDecl)
        sym = Symbol(d.name, FUNCTION if is_func else PROCEDURE, d.pos, decl=d)
        self.declare(sym)
        self.subroutines.append(sym)
        self.local, self.sub = {}, sym
        try:
            for f in d.formals:
                kind = {"word": FORMAL_WORD, "array": FORMAL_ARRAY,
                        "constarray": FORMAL_CONSTARRAY, "port": FORMAL_PORT}[f.kind]
                fs = Symbol(f.name, kind, f.pos, local=True, slot=sym.nslots, decl=f)
                if f.size is not None:
                    try:
                        fs.size = self.size_value(f.size, f"size of {f.name!r}")
                    except _Reject as r:
                        self.errors.append(r.diag)
                sym.nslots += 2 if kind in (FORMAL_ARRAY, FORMAL_CONSTARRAY) else 1
                sym.formals.append(fs)
                self.declare(fs)
            for w in d.locals:
                self.words_decl(w)
            self.statements(d.body, in_sub=True)
            if is_func:
                self.expr(d.result)
        finally:
            self.local, self.sub = None, None

    # ---------------------------------------------------------- statements
    def statements(self, body, in_sub):
        for s in body:
            try:
                self.statement(s, in_sub)
            except _Reject as r:
                self.errors.append(r.diag)

    def statement(self, s, in_sub):
        if isinstance(s, If):
            for cond, body in s.arms:
                self.expr(cond)
                self.statements(body, in_sub)
            if s.else_body is not None:
                self.statements(s.else_body, in_sub)
        elif isinstance(s, Repeat):
            if s.while_ is not None:
                self.expr(s.while_)
            self.expr(s.count)
            self.statements(s.body, in_sub)
            if s.until is not None:
                self.expr(s.until)
        elif isinstance(s, Next):
            if in_sub:
                self.error("E-TRANSITION-IN-SUB",
                           f"'next {s.state}' inside subroutine {self.sub.name!r}", s.pos)
            else:
                self.lookup(s, s.state, (STATE,), "a state")
        elif isinstance(s, Assign):
            self.target(s.target)
            if isinstance(s.value, Asm):
                self.inline_asm(s.value)
            else:
                self.expr(s.value)
        elif isinstance(s, Send):
            self.lookup(s, s.port, PORTS, "a port")
            if s.value is not None:
                self.expr(s.value)
        elif isinstance(s, CallStmt):
            sub = self.lookup(s, s.ident, (PROCEDURE,), "a procedure")
            if sub is not None:
                self.actuals(s, sub)
        elif isinstance(s, Asm):
            self.inline_asm(s)

    def inline_asm(self, a):
        for item in a.items:
            if item.is_expr:
                self.expr(item.value)
                continue
            try:
                w = self.word_const(item.value, "inline asm constant")
            except _Reject as r:
                self.errors.append(r.diag)
                continue
            if item.unary is not None:
                w = arith.UNARY[item.unary](w)
            self.asm_words[id(item)] = w

    def target(self, v):
        if isinstance(v, Name):
            self.lookup(v, v.ident, (WORD, FORMAL_WORD, PORT, FORMAL_PORT),
                        "a word variable or port")
        else:
            self.lookup(v, v.ident, ARRAYS, "a variable array")
            self.expr(v.index)

    def actuals(self, call, sub):
        if len(call.args) != len(sub.formals):
            self.error("E-ARGS", f"{sub.name!r} takes {len(sub.formals)} parameters, "
                                 f"{len(call.args)} given", call.pos)
            return
        for arg, formal in zip(call.args, sub.formals):
            if formal.kind == FORMAL_WORD:
                self.expr(arg)
                continue
            if formal.kind == FORMAL_PORT:
                allowed, what = PORTS, "a port"
            elif formal.kind == FORMAL_ARRAY:
                allowed, what = ARRAYS, "a variable array"
            else:
                allowed, what = ANY_ARRAYS, "an array"
            if not isinstance(arg, (Name, Index)) or (
                    isinstance(arg, Index) and formal.kind == FORMAL_PORT):
                self.error("E-ARG-KIND", f"parameter {formal.name!r} needs {what}", arg.pos)
                continue
            sym = self.find(arg.ident)
            if sym is None:
                self.error("E-UNDECLARED", f"{arg.ident!r} is not declared", arg.pos)
                continue
            self.symbols[id(arg)] = sym
            if sym.kind not in allowed:
                self.error("E-ARG-KIND", f"parameter {formal.name!r} needs {what}, "
                                         f"{arg.ident!r} is a {sym.kind}", arg.pos)
                continue
            if isinstance(arg, Index):
                self.expr(arg.index)

    # --------------------------------------------------------- expressions
    def expr(self, e):
        if isinstance(e, Num) or isinstance(e, Now):
            return
        if isinstance(e, Name):
            self.lookup(e, e.ident, WORD_VALUES, "a value")
        elif isinstance(e, Index):
            self.lookup(e, e.ident, ANY_ARRAYS, "an array")
            self.expr(e.index)
        elif isinstance(e, Call):
            sub = self.lookup(e, e.ident, (FUNCTION,), "a function")
            if sub is not None:
                self.actuals(e, sub)
        elif isinstance(e, SizeOf):
            self.lookup(e, e.ident, ANY_ARRAYS, "an array")
        elif isinstance(e, Receive):
            self.lookup(e, e.port, PORTS, "a port")
            if e.target is not None:
                self.target(e.target)
        elif isinstance(e, Unary):
            self.expr(e.operand)
        elif isinstance(e, Binary):
            self.expr(e.left)
            self.expr(e.right)
        elif isinstance(e, Paren):
            self.expr(e.expr)
        else:
            raise TypeError(e)

    # ------------------------------------------------------- path analysis
    def terminates(self, body):
        """True if every path through ``body`` ends in a transition."""
        for k, s in enumerate(body):
            if self.stmt_terminates(s):
                if k + 1 < len(body):
                    self.error("E-UNREACHABLE", "statement follows a transition",
                               body[k + 1].pos)
                return True
        return False

    def stmt_terminates(self, s):
        if isinstance(s, Next):
            return True
        if isinstance(s, If):
            arms = [self.terminates(body) for _, body in s.arms]
            if s.else_body is None:
                return False
            return all(arms) and self.terminates(s.else_body)
        if isinstance(s, Repeat):
            self.terminates(s.body)
        return False

    # ------------------------------------------------------------- program
    def run(self) -> CheckedProgram:
        p = self.tree
        self.declarations(p.before)
        self.declare(Symbol(p.name, PROCESS, p.pos))
        control = Symbol(p.control_port, PORT, p.pos, port=0)
        if self.declare(control):
            self.ports.append(control)
        if p.dimension is not None:
            self.declare(Symbol(p.dimension, CONST, p.pos, value=Affine(1, 0), dimension=True))
        for name in p.states:
            sym = Symbol(name, STATE, p.pos, state=len(self.states))
            if self.declare(sym):
                self.states.append(sym)
        for name in p.ports:
            sym = Symbol(name, PORT, p.pos, port=len(self.ports))
            if self.declare(sym):
                self.ports.append(sym)
        self.declarations(p.after)

        self.statements(p.init, in_sub=False)
        state_guards = {s.state: [] for s in self.states}
        for g in p.guarded:
            self.guarded_state(g, state_guards)

        if self.states:
            if not self.terminates(p.init):
                self.error("E-PATH-NO-TRANSITION",
                           "initialisation does not end in a transition", p.init_pos or p.pos)
            for g in p.guarded:
                if not self.terminates(g.body):
                    self.error("E-PATH-NO-TRANSITION",
                               "guarded statement does not end in a transition", g.pos)
        self.check_guards(state_guards)

        fixed = [v for v in self.variables if v.size.is_const]
        scaled = [v for v in self.variables if not v.size.is_const]
        offset = ZERO
        for v in fixed + scaled:
            v.address = offset
            offset = offset + v.size

        if self.errors:
            raise SemaError(self.errors)
        return CheckedProgram(
            tree=p, symbols=self.symbols, asm_words=self.asm_words,
            globals=self.globals, states=self.states, ports=self.ports,
            variables=fixed + scaled, subroutines=self.subroutines,
            state_guards=state_guards, d1=offset.a, d0=offset.b,
        )

    def guarded_state(self, g, state_guards):
        seen = set()
        for name in g.states:
            if name in seen:
                self.error("E-DUP-STATE", f"state {name!r} listed twice", g.pos)
                continue
            seen.add(name)
            sym = self.find(name)
            if sym is None:
                self.error("E-UNDECLARED", f"{name!r} is not declared", g.pos)
            elif sym.kind != STATE:
                self.error("E-KIND", f"{name!r} is a {sym.kind}, expected a state", g.pos)
            else:
                state_guards[sym.state].append(g)
        guard = g.guard
        try:
            if isinstance(guard, TransmitReady):
                self.lookup(guard, guard.port, PORTS, "a port")
            elif isinstance(guard, ReceiveGuard):
                self.lookup(guard, guard.port, PORTS, "a port")
                if guard.target is not None:
                    self.target(guard.target)
            elif isinstance(guard, After):
                self.expr(guard.expr)
        except _Reject as r:
            self.errors.append(r.diag)
        self.statements(g.body, in_sub=False)

    def check_guards(self, state_guards):
        for state in self.states:
            keys = {}
            for g in state_guards[state.state]:
                guard = g.guard
                if guard is None:
                    continue
                if isinstance(guard, After):
                    key = ("after",)
                elif isinstance(guard, TransmitReady):
                    key = ("send", guard.port)
                elif guard.target is None:
                    key = ("end", guard.port)
                else:
                    key = ("recv", guard.port)
                if key in keys:
                    if key[0] == "after":
                        self.error("E-DUP-EXPIRE",
                                   f"second expiration guard for state {state.name!r}", g.pos)
                    else:
                        self.error("E-DUP-GUARD",
                                   f"state {state.name!r} already has this guard on "
                                   f"port {key[1]!r}", g.pos)
                    continue
                keys[key] = g
            for key, g in keys.items():
                if key[0] == "recv" and ("end", key[1]) not in keys:
                    self.error("E-END-GUARD",
                               f"state {state.name!r} receives on {key[1]!r} "
                               f"without an end guard", g.pos)


def analyze(tree: Program) -> CheckedProgram:
    """Check a parsed program; raises :class:`SemaError` with all diagnostics."""
    return Analyzer(tree).run()
