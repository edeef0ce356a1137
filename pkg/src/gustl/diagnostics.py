"""Compiler diagnostics with stable error codes."""

import json
from dataclasses import dataclass

# Stable codes; documented in README.
CODES = {
    "E-LEX": "lexical error",
    "E-SYNTAX": "syntax error",
    "E-UNDECLARED": "identifier not declared before use",
    "E-REDECLARED": "identifier already declared",
    "E-KIND": "identifier used as the wrong kind of entity",
    "E-ARGS": "wrong number of actual parameters",
    "E-ARG-KIND": "actual parameter does not match formal parameter kind",
    "E-TRANSITION-IN-SUB": "transition inside a subroutine",
    "E-PATH-NO-TRANSITION": "execution path does not end in a transition",
    "E-UNREACHABLE": "statement after a transition",
    "E-END-GUARD": "receive guard without end guard on the same port and state",
    "E-DUP-GUARD": "two guards check the same condition on the same port",
    "E-DUP-EXPIRE": "more than one expiration guard for a state",
    "E-DUP-STATE": "state listed twice in one guarded statement",
    "E-NOT-CONST": "expression is not a compile-time constant",
    "E-NONAFFINE": "size is not affine in the dimension",
    "E-SIZE": "size is negative or too large",
    "E-CONST-OVERFLOW": "constant array initializer exceeds declared size",
    "E-DIV-ZERO": "constant division by zero",
    "E-INDEX": "constant index out of range",
}


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int = 0
    column: int = 0

    def __str__(self):
        return f"{self.line}:{self.column}: error {self.code}: {self.message}"

    def to_json(self) -> str:
        return json.dumps(
            {"code": self.code, "message": self.message,
             "line": self.line, "column": self.column},
            sort_keys=True,
        )


class CompileError(Exception):
    """Carries one or more diagnostics."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))

    @property
    def codes(self):
        return [d.code for d in self.diagnostics]


class LexError(CompileError):
    pass


class ParseError(CompileError):
    pass


class SemaError(CompileError):
    pass
