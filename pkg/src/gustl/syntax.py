"""Syntax tree and recursive-descent parser.

The tree mirrors the grammar closely.  Identifiers are left unresolved:
``x``, ``x[i]`` and ``f(a)`` may name words, ports, constants, arrays or
subroutines, and only the semantic pass knows which.  Parenthesised
expressions keep an explicit :class:`Paren` node so that :func:`unparse`
reproduces the original structure without having to insert brackets.

Source positions are carried on every node but excluded from equality, so
two trees compare equal exactly when they are isomorphic.
"""

from dataclasses import dataclass, field
from typing import Optional, Union

from .diagnostics import Diagnostic, ParseError
from .lexer import EOF, IDENT, NUMBER, STRING, Token, tokenize

Pos = tuple  # (line, column)


def _pos():
    return field(default=(0, 0), compare=False, repr=False, kw_only=True)


# ---------------------------------------------------------------- expressions

@dataclass
class Num:
    value: int
    text: str = field(default="", compare=False, repr=False)
    pos: Pos = _pos()


@dataclass
class Name:
    ident: str
    pos: Pos = _pos()


@dataclass
class Index:
    ident: str
    index: "Expr"
    pos: Pos = _pos()


@dataclass
class Call:
    ident: str
    args: list
    pos: Pos = _pos()


@dataclass
class SizeOf:
    ident: str
    pos: Pos = _pos()


@dataclass
class Now:
    pos: Pos = _pos()


@dataclass
class Receive:
    """``port ? target``; ``target`` is None for ``port ? end``."""
    port: str
    target: Optional[Union[Name, Index]]
    pos: Pos = _pos()


@dataclass
class Unary:
    op: str
    operand: "Expr"
    pos: Pos = _pos()


@dataclass
class Binary:
    op: str
    signed: bool
    left: "Expr"
    right: "Expr"
    pos: Pos = _pos()


@dataclass
class Paren:
    expr: "Expr"
    pos: Pos = _pos()


Expr = Union[Num, Name, Index, Call, SizeOf, Now, Receive, Unary, Binary, Paren]


# ----------------------------------------------------------------- statements

@dataclass
class If:
    arms: list  # [(condition, body)]
    else_body: Optional[list]
    pos: Pos = _pos()


@dataclass
class Repeat:
    while_: Optional[Expr]
    count: Expr
    body: list
    until: Optional[Expr]
    pos: Pos = _pos()


@dataclass
class Next:
    state: str
    pos: Pos = _pos()


@dataclass
class AsmItem:
    """One inline-asm element: a constant with optional unary op, or ``(expr)``."""
    unary: Optional[str]
    value: Expr
    is_expr: bool
    pos: Pos = _pos()


@dataclass
class Asm:
    items: list
    pos: Pos = _pos()


@dataclass
class Assign:
    target: Union[Name, Index]
    value: Union[Expr, Asm]
    pos: Pos = _pos()


@dataclass
class Send:
    """``port ! value``; kind is 'data', 'end' or 'pause'."""
    port: str
    kind: str
    value: Optional[Expr]
    pos: Pos = _pos()


@dataclass
class CallStmt:
    ident: str
    args: list
    pos: Pos = _pos()


Stmt = Union[If, Repeat, Next, Assign, Send, CallStmt, Asm]


# --------------------------------------------------------------- declarations

@dataclass
class Str:
    values: tuple
    pos: Pos = _pos()


@dataclass
class ConstDef:
    name: str
    value: Expr
    pos: Pos = _pos()


@dataclass
class ConstArrayDef:
    name: str
    size: Optional[Expr]
    sized: bool  # brackets present; size may still be omitted
    items: list  # Expr | Str
    pos: Pos = _pos()


@dataclass
class WordDecl:
    name: str
    size: Optional[Expr]  # None for a single word
    pos: Pos = _pos()


@dataclass
class WordsDecl:
    items: list
    pos: Pos = _pos()


@dataclass
class Formal:
    kind: str  # 'word', 'array', 'constarray', 'port'
    name: str
    size: Optional[Expr] = None
    pos: Pos = _pos()


@dataclass
class ProcedureDecl:
    name: str
    formals: list
    locals: list  # WordsDecl
    body: list
    pos: Pos = _pos()


@dataclass
class FunctionDecl:
    name: str
    formals: list
    locals: list
    body: list
    result: Expr
    pos: Pos = _pos()


# -------------------------------------------------------------------- guards

@dataclass
class TransmitReady:
    port: str
    pos: Pos = _pos()


@dataclass
class ReceiveGuard:
    """``port ? var`` (target set) or ``port ? end`` (target None)."""
    port: str
    target: Optional[Union[Name, Index]]
    pos: Pos = _pos()


@dataclass
class After:
    expr: Expr
    pos: Pos = _pos()


@dataclass
class GuardedState:
    states: list
    guard: Optional[Union[TransmitReady, ReceiveGuard, After]]
    body: list
    pos: Pos = _pos()


@dataclass
class Program:
    before: list
    name: str
    control_port: str
    dimension: Optional[str]
    states: list
    ports: list
    after: list
    init: list
    guarded: list
    pos: Pos = _pos()
    init_pos: Pos = _pos()  # the ``start`` keyword

    @property
    def declarations(self):
        return self.before + self.after


# -------------------------------------------------------------------- parser

DECL_START = ("const", "word", "procedure", "function")
STMT_END = ("done", "until", "elseif", "else", "return", "on", "stop")
REL_OPS = ("=", "<>", "<", ">", "<=", ">=")
SIGNABLE_REL = ("<", ">", "<=", ">=")
ADD_OPS = ("+", "-", "|", "^", "or")
MUL_OPS = ("*", "&", "and", "<<", "/", "%", ">>")
SIGNABLE_MUL = ("/", "%", ">>")
UNARY_OPS = ("-", "~", "not")


class Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k=1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, *texts):
        t = self.tok
        return any(t.is_(x) for x in texts)

    def advance(self):
        t = self.tok
        if t.kind != EOF:
            self.i += 1
        return t

    def fail(self, expected):
        t = self.tok
        if isinstance(expected, str):
            expected = [expected]
        want = ", ".join(expected)
        raise ParseError(Diagnostic(
            "E-SYNTAX", f"expected {want} but found {t.describe()}", t.line, t.column))

    def expect(self, text):
        if not self.tok.is_(text):
            self.fail(repr(text))
        return self.advance()

    def accept(self, text):
        if self.tok.is_(text):
            return self.advance()
        return None

    def ident(self):
        if self.tok.kind != IDENT:
            self.fail("identifier")
        return self.advance().text

    @staticmethod
    def pos(t):
        return (t.line, t.column)

    # -- program
    def program(self) -> Program:
        start = self.tok
        before = self.declarations()
        self.expect("process")
        name = self.ident()
        self.expect("(")
        control = self.ident()
        dim = None
        if self.accept(","):
            dim = self.ident()
        self.expect(")")
        states, ports = [], []
        if self.accept("state"):
            states = self.ident_list()
        if self.accept("port"):
            ports = self.ident_list()
        after = self.declarations()
        init_pos = self.pos(self.tok)
        self.expect("start")
        init = self.statements()
        guarded = []
        while self.at("on"):
            guarded.append(self.guarded_state())
        self.expect("stop")
        if self.tok.kind != EOF:
            self.fail("end of input")
        return Program(before, name, control, dim, states, ports, after, init, guarded,
                       pos=self.pos(start), init_pos=init_pos)

    def ident_list(self):
        names = [self.ident()]
        while self.accept(","):
            names.append(self.ident())
        return names

    def declarations(self):
        decls = []
        while True:
            if self.at("const"):
                decls.append(self.const_def())
            elif self.at("word"):
                decls.append(self.words_decl())
            elif self.at("procedure"):
                decls.append(self.subroutine(function=False))
            elif self.at("function"):
                decls.append(self.subroutine(function=True))
            else:
                return decls

    def const_def(self):
        t = self.expect("const")
        name = self.ident()
        if self.accept("["):
            size = None if self.at("]") else self.expression()
            self.expect("]")
            self.expect("=")
            items = [self.const_item()]
            while self.accept(","):
                items.append(self.const_item())
            return ConstArrayDef(name, size, True, items, pos=self.pos(t))
        self.expect("=")
        return ConstDef(name, self.expression(), pos=self.pos(t))

    def const_item(self):
        if self.tok.kind == STRING:
            t = self.advance()
            return Str(t.value, pos=self.pos(t))
        return self.expression()

    def words_decl(self):
        t = self.expect("word")
        items = [self.word_decl()]
        while self.accept(","):
            items.append(self.word_decl())
        return WordsDecl(items, pos=self.pos(t))

    def word_decl(self):
        t = self.tok
        name = self.ident()
        if self.accept("["):
            size = self.expression()
            self.expect("]")
            return WordDecl(name, size, pos=self.pos(t))
        return WordDecl(name, None, pos=self.pos(t))

    def subroutine(self, function):
        t = self.advance()
        name = self.ident()
        self.expect("(")
        formals = []
        if not self.at(")"):
            formals.append(self.formal())
            while self.accept(","):
                formals.append(self.formal())
        self.expect(")")
        local_decls = []
        while self.at("word"):
            local_decls.append(self.words_decl())
        self.expect("do")
        body = self.statements()
        self.expect("return")
        if function:
            result = self.expression()
            return FunctionDecl(name, formals, local_decls, body, result, pos=self.pos(t))
        return ProcedureDecl(name, formals, local_decls, body, pos=self.pos(t))

    def formal(self):
        t = self.tok
        if self.accept("const"):
            name = self.ident()
            self.expect("[")
            size = None if self.at("]") else self.expression()
            self.expect("]")
            return Formal("constarray", name, size, pos=self.pos(t))
        if self.accept("port"):
            return Formal("port", self.ident(), pos=self.pos(t))
        name = self.ident()
        if self.accept("["):
            size = None if self.at("]") else self.expression()
            self.expect("]")
            return Formal("array", name, size, pos=self.pos(t))
        return Formal("word", name, pos=self.pos(t))

    # -- guarded states
    def guarded_state(self):
        t = self.expect("on")
        states = self.ident_list()
        guard = None
        if self.accept("\\"):
            guard = self.guard()
        self.expect(":")
        body = self.statements()
        return GuardedState(states, guard, body, pos=self.pos(t))

    def guard(self):
        t = self.tok
        if self.accept("after"):
            return After(self.expression(), pos=self.pos(t))
        port = self.ident()
        if self.accept("!"):
            return TransmitReady(port, pos=self.pos(t))
        if self.accept("?"):
            if self.accept("end"):
                return ReceiveGuard(port, None, pos=self.pos(t))
            return ReceiveGuard(port, self.variable(), pos=self.pos(t))
        self.fail(["'!'", "'?'"])

    # -- statements
    def statements(self):
        body = []
        while not (self.at(*STMT_END) or self.tok.kind == EOF):
            body.append(self.statement())
        return body

    def statement(self):
        t = self.tok
        if self.at("if"):
            return self.conditional()
        if self.at("while", "repeat"):
            return self.repetition()
        if self.accept("next"):
            return Next(self.ident(), pos=self.pos(t))
        if self.at("asm"):
            return self.inline_asm()
        if t.kind == IDENT:
            nxt = self.peek()
            if nxt.is_("!"):
                port = self.advance().text
                self.advance()
                if self.accept("end"):
                    return Send(port, "end", None, pos=self.pos(t))
                if self.accept("pause"):
                    return Send(port, "pause", None, pos=self.pos(t))
                return Send(port, "data", self.expression(), pos=self.pos(t))
            if nxt.is_("("):
                name = self.advance().text
                return CallStmt(name, self.actuals(), pos=self.pos(t))
            target = self.variable()
            self.expect(":=")
            value = self.inline_asm() if self.at("asm") else self.expression()
            return Assign(target, value, pos=self.pos(t))
        self.fail(["statement", *[repr(x) for x in STMT_END]])

    def conditional(self):
        t = self.expect("if")
        arms = []
        cond = self.expression()
        self.expect("then")
        arms.append((cond, self.statements()))
        while self.accept("elseif"):
            cond = self.expression()
            self.expect("then")
            arms.append((cond, self.statements()))
        else_body = None
        if self.accept("else"):
            else_body = self.statements()
        self.expect("done")
        return If(arms, else_body, pos=self.pos(t))

    def repetition(self):
        t = self.tok
        while_ = None
        if self.accept("while"):
            while_ = self.expression()
        self.expect("repeat")
        count = self.expression()
        self.expect("times")
        body = self.statements()
        until = None
        if self.accept("until"):
            until = self.expression()
        else:
            self.expect("done")
        return Repeat(while_, count, body, until, pos=self.pos(t))

    def inline_asm(self):
        t = self.expect("asm")
        items = [self.asm_item()]
        while self.accept(","):
            items.append(self.asm_item())
        return Asm(items, pos=self.pos(t))

    def asm_item(self):
        t = self.tok
        if self.accept("("):
            e = self.expression()
            self.expect(")")
            return AsmItem(None, e, True, pos=self.pos(t))
        unary = None
        if self.at(*UNARY_OPS):
            unary = self.advance().text
        return AsmItem(unary, self.constant(), False, pos=self.pos(t))

    def constant(self):
        t = self.tok
        if t.kind == NUMBER:
            self.advance()
            return Num(t.value, t.text, pos=self.pos(t))
        if self.accept("#"):
            return SizeOf(self.ident(), pos=self.pos(t))
        name = self.ident()
        if self.accept("["):
            e = self.expression()
            self.expect("]")
            return Index(name, e, pos=self.pos(t))
        return Name(name, pos=self.pos(t))

    def variable(self):
        t = self.tok
        name = self.ident()
        if self.accept("["):
            e = self.expression()
            self.expect("]")
            return Index(name, e, pos=self.pos(t))
        return Name(name, pos=self.pos(t))

    def actuals(self):
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.expression())
            while self.accept(","):
                args.append(self.expression())
        self.expect(")")
        return args

    # -- expressions
    def expression(self):
        left = self.simple_expr()
        if self.at(*REL_OPS):
            t = self.advance()
            signed = False
            if t.text in SIGNABLE_REL and self.accept("$"):
                signed = True
            right = self.simple_expr()
            return Binary(t.text, signed, left, right, pos=self.pos(t))
        return left

    def simple_expr(self):
        left = self.term()
        while self.at(*ADD_OPS):
            t = self.advance()
            left = Binary(t.text, False, left, self.term(), pos=self.pos(t))
        return left

    def term(self):
        left = self.factor()
        while self.at(*MUL_OPS):
            t = self.advance()
            signed = False
            if t.text in SIGNABLE_MUL and self.accept("$"):
                signed = True
            left = Binary(t.text, signed, left, self.factor(), pos=self.pos(t))
        return left

    def factor(self):
        t = self.tok
        if self.at(*UNARY_OPS):
            self.advance()
            return Unary(t.text, self.primary(), pos=self.pos(t))
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == NUMBER:
            self.advance()
            return Num(t.value, t.text, pos=self.pos(t))
        if self.accept("now"):
            return Now(pos=self.pos(t))
        if self.accept("#"):
            return SizeOf(self.ident(), pos=self.pos(t))
        if self.accept("("):
            e = self.expression()
            self.expect(")")
            return Paren(e, pos=self.pos(t))
        if t.kind == IDENT:
            nxt = self.peek()
            if nxt.is_("?"):
                port = self.advance().text
                self.advance()
                if self.accept("end"):
                    return Receive(port, None, pos=self.pos(t))
                return Receive(port, self.variable(), pos=self.pos(t))
            if nxt.is_("("):
                name = self.advance().text
                return Call(name, self.actuals(), pos=self.pos(t))
            return self.variable()
        self.fail(["expression"])


def parse(tokens) -> Program:
    """Parse a token list (or source text) into a :class:`Program`."""
    if isinstance(tokens, (str, bytes)):
        tokens = tokenize(tokens)
    return Parser(list(tokens)).program()


# ------------------------------------------------------------------- unparse

def _string(values):
    out = ['"']
    for cp in values:
        out.append('""' if cp == 34 else chr(cp))
    out.append('"')
    return "".join(out)


def unparse_expr(e) -> str:
    if isinstance(e, Num):
        return e.text or str(e.value)
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, Index):
        return f"{e.ident}[{unparse_expr(e.index)}]"
    if isinstance(e, Call):
        return f"{e.ident}({', '.join(unparse_expr(a) for a in e.args)})"
    if isinstance(e, SizeOf):
        return f"#{e.ident}"
    if isinstance(e, Now):
        return "now"
    if isinstance(e, Receive):
        return f"{e.port} ? {'end' if e.target is None else unparse_expr(e.target)}"
    if isinstance(e, Unary):
        sep = " " if e.op == "not" else ""
        return f"{e.op}{sep}{unparse_expr(e.operand)}"
    if isinstance(e, Binary):
        op = e.op + ("$" if e.signed else "")
        return f"{unparse_expr(e.left)} {op} {unparse_expr(e.right)}"
    if isinstance(e, Paren):
        return f"({unparse_expr(e.expr)})"
    raise TypeError(f"not an expression: {e!r}")


def _asm(a):
    parts = []
    for item in a.items:
        if item.is_expr:
            parts.append(f"({unparse_expr(item.value)})")
        else:
            u = item.unary or ""
            if u == "not":
                u = "not "
            parts.append(u + unparse_expr(item.value))
    return "asm " + ", ".join(parts)


def _stmts(body, depth, out):
    for s in body:
        _stmt(s, depth, out)


def _stmt(s, depth, out):
    ind = "  " * depth
    if isinstance(s, If):
        for k, (cond, body) in enumerate(s.arms):
            kw = "if" if k == 0 else "elseif"
            out.append(f"{ind}{kw} {unparse_expr(cond)} then")
            _stmts(body, depth + 1, out)
        if s.else_body is not None:
            out.append(f"{ind}else")
            _stmts(s.else_body, depth + 1, out)
        out.append(f"{ind}done")
    elif isinstance(s, Repeat):
        head = f"while {unparse_expr(s.while_)} " if s.while_ is not None else ""
        out.append(f"{ind}{head}repeat {unparse_expr(s.count)} times")
        _stmts(s.body, depth + 1, out)
        out.append(f"{ind}until {unparse_expr(s.until)}" if s.until is not None
                   else f"{ind}done")
    elif isinstance(s, Next):
        out.append(f"{ind}next {s.state}")
    elif isinstance(s, Assign):
        rhs = _asm(s.value) if isinstance(s.value, Asm) else unparse_expr(s.value)
        out.append(f"{ind}{unparse_expr(s.target)} := {rhs}")
    elif isinstance(s, Send):
        rhs = s.kind if s.kind != "data" else unparse_expr(s.value)
        out.append(f"{ind}{s.port} ! {rhs}")
    elif isinstance(s, CallStmt):
        out.append(f"{ind}{s.ident}({', '.join(unparse_expr(a) for a in s.args)})")
    elif isinstance(s, Asm):
        out.append(ind + _asm(s))
    else:
        raise TypeError(f"not a statement: {s!r}")


def _formal(f):
    size = unparse_expr(f.size) if f.size is not None else ""
    if f.kind == "constarray":
        return f"const {f.name}[{size}]"
    if f.kind == "array":
        return f"{f.name}[{size}]"
    if f.kind == "port":
        return f"port {f.name}"
    return f.name


def _words(d):
    parts = []
    for w in d.items:
        parts.append(w.name if w.size is None else f"{w.name}[{unparse_expr(w.size)}]")
    return "word " + ", ".join(parts)


def _decl(d, out):
    if isinstance(d, ConstDef):
        out.append(f"const {d.name} = {unparse_expr(d.value)}")
    elif isinstance(d, ConstArrayDef):
        size = unparse_expr(d.size) if d.size is not None else ""
        items = ", ".join(_string(i.values) if isinstance(i, Str) else unparse_expr(i)
                          for i in d.items)
        out.append(f"const {d.name}[{size}] = {items}")
    elif isinstance(d, WordsDecl):
        out.append(_words(d))
    elif isinstance(d, (ProcedureDecl, FunctionDecl)):
        kw = "function" if isinstance(d, FunctionDecl) else "procedure"
        out.append(f"{kw} {d.name}({', '.join(_formal(f) for f in d.formals)})")
        for w in d.locals:
            out.append("  " + _words(w))
        out.append("do")
        _stmts(d.body, 1, out)
        if isinstance(d, FunctionDecl):
            out.append(f"return {unparse_expr(d.result)}")
        else:
            out.append("return")
    else:
        raise TypeError(f"not a declaration: {d!r}")


def _guard(g):
    if isinstance(g, TransmitReady):
        return f"{g.port} !"
    if isinstance(g, ReceiveGuard):
        return f"{g.port} ? {'end' if g.target is None else unparse_expr(g.target)}"
    return f"after {unparse_expr(g.expr)}"


def unparse(p: Program) -> str:
    """Render a program back to source text (comments are not preserved)."""
    out = []
    for d in p.before:
        _decl(d, out)
    dim = f", {p.dimension}" if p.dimension else ""
    out.append(f"process {p.name}({p.control_port}{dim})")
    if p.states:
        out.append("state " + ", ".join(p.states))
    if p.ports:
        out.append("port " + ", ".join(p.ports))
    for d in p.after:
        _decl(d, out)
    out.append("start")
    _stmts(p.init, 1, out)
    for g in p.guarded:
        guard = f" \\ {_guard(g.guard)}" if g.guard is not None else ""
        out.append(f"on {', '.join(g.states)}{guard}:")
        _stmts(g.body, 1, out)
    out.append("stop")
    return "\n".join(out) + "\n"


# ----------------------------------------------------------------- ast dump

def dump(node, indent=0) -> str:
    """Indented debug rendering of a tree (not a stable format)."""
    pad = "  " * indent
    if isinstance(node, list):
        return "\n".join(dump(n, indent) for n in node) if node else pad + "[]"
    if isinstance(node, tuple):
        return "\n".join(dump(n, indent) for n in node)
    if not hasattr(node, "__dataclass_fields__"):
        return pad + repr(node)
    lines = [f"{pad}{type(node).__name__} @{node.pos[0]}:{node.pos[1]}"]
    for name, f in node.__dataclass_fields__.items():
        if name == "pos" or not f.compare:
            continue
        val = getattr(node, name)
        if isinstance(val, (list, tuple)) or hasattr(val, "__dataclass_fields__"):
            lines.append(f"{pad}  {name}:")
            lines.append(dump(val, indent + 2))
        else:
            lines.append(f"{pad}  {name}: {val!r}")
    return "\n".join(lines)
