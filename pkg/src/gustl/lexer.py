"""Tokenizer for GuStL source text."""

from dataclasses import dataclass, field

from .arith import MASK
from .diagnostics import Diagnostic, LexError

RESERVED = frozenset("""
    process start stop state port const word procedure function do return
    on if then elseif else done while repeat times until next end pause
    or and not now after asm
""".split())

# longest first so that maximal munch works with a simple prefix scan
SPECIALS = sorted(
    """:= <= >= <> << >> ( ) , [ ] = < > $ + - | ^ * & / % ~ # ! ? : \\""".split(),
    key=len, reverse=True,
)

WHITESPACE = " \t\n\r"

SPECIAL, RESERVED_WORD, IDENT, NUMBER, STRING, EOF = (
    "special", "reserved", "ident", "number", "string", "eof")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    value: object = None  # int for numbers, tuple of code points for strings
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    def is_(self, text):
        return self.kind in (SPECIAL, RESERVED_WORD) and self.text == text

    def describe(self):
        if self.kind == EOF:
            return "end of input"
        return repr(self.text)


def _is_ident_start(c):
    return c == "_" or ("a" <= c <= "z") or ("A" <= c <= "Z")


def _is_ident_char(c):
    return _is_ident_start(c) or "0" <= c <= "9"


def _decode(source):
    if isinstance(source, str):
        return source
    try:
        return bytes(source).decode("utf-8")
    except UnicodeDecodeError as exc:
        prefix = bytes(source)[:exc.start].decode("utf-8")
        line = prefix.count("\n") + 1
        column = len(prefix) - (prefix.rfind("\n") + 1) + 1
        raise LexError(Diagnostic(
            "E-LEX", f"invalid UTF-8 byte sequence: {exc.reason}", line, column))


def tokenize(source) -> list[Token]:
    """Split source (``str`` or UTF-8 ``bytes``) into tokens.

    The list always ends with an EOF token.  Brace comments do not nest:
    the first ``}`` closes the comment, and a ``}`` outside a comment is an
    error.
    """
    text = _decode(source)
    tokens = []
    i, n = 0, len(text)
    line, line_start = 1, 0

    def error(msg, at):
        col = at - line_start + 1
        raise LexError(Diagnostic("E-LEX", msg, line, col))

    while i < n:
        c = text[i]
        if c in WHITESPACE:
            if c == "\n":
                line, line_start = line + 1, i + 1
            i += 1
            continue
        if c == "{":
            start = i
            start_line, start_col = line, i - line_start + 1
            i += 1
            while i < n and text[i] != "}":
                if text[i] == "\n":
                    line, line_start = line + 1, i + 1
                i += 1
            if i >= n:
                raise LexError(Diagnostic(
                    "E-LEX", "unterminated comment", start_line, start_col))
            i += 1
            continue
        if c == "}":
            error("'}' outside of a comment", i)

        col = i - line_start + 1
        start = i
        if _is_ident_start(c):
            while i < n and _is_ident_char(text[i]):
                i += 1
            word = text[start:i]
            kind = RESERVED_WORD if word in RESERVED else IDENT
            tokens.append(Token(kind, word, None, line, col))
        elif "0" <= c <= "9":
            if text.startswith("0x", i):
                i += 2
                while i < n and text[i] in "0123456789abcdefABCDEF":
                    i += 1
                digits = text[start + 2:i]
                if not digits:
                    error("hexadecimal number without digits", start)
                value = int(digits, 16)
            else:
                while i < n and "0" <= text[i] <= "9":
                    i += 1
                value = int(text[start:i])
            if i < n and _is_ident_char(text[i]):
                error(f"malformed number {text[start:i + 1]!r}", start)
            if value > MASK:
                error(f"number {text[start:i]} does not fit in 32 bits", start)
            tokens.append(Token(NUMBER, text[start:i], value, line, col))
        elif c == "'":
            if i + 2 < n and text[i + 1] not in "'\n" and text[i + 2] == "'":
                value = ord(text[i + 1])
                i += 3
                tokens.append(Token(NUMBER, text[start:i], value, line, col))
            else:
                error("character literal must be one character in single quotes", start)
        elif c == '"':
            start_line = line
            chars = []
            i += 1
            while True:
                if i >= n:
                    raise LexError(Diagnostic("E-LEX", "unterminated string", start_line, col))
                ch = text[i]
                if ch == '"':
                    if i + 1 < n and text[i + 1] == '"':
                        chars.append(34)
                        i += 2
                        continue
                    i += 1
                    break
                if ch == "\n":
                    line, line_start = line + 1, i + 1
                chars.append(ord(ch))
                i += 1
            tokens.append(Token(STRING, text[start:i], tuple(chars), start_line, col))
        else:
            for sym in SPECIALS:
                if text.startswith(sym, i):
                    i += len(sym)
                    tokens.append(Token(SPECIAL, sym, None, line, col))
                    break
            else:
                error(f"invalid character {c!r}", i)

    tokens.append(Token(EOF, "", None, line, i - line_start + 1))
    return tokens
