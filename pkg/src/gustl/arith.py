"""32-bit word arithmetic.

Words are plain Python ints in ``[0, 2**32)``.  Signedness is chosen by the
operation, never stored with the value: ``to_signed`` gives the two's
complement view when an operation asks for it.
"""

WORD_BITS = 32
MASK = 0xFFFFFFFF
SIGN = 0x80000000


class ArithmeticTrap(Exception):
    """Raised for division or modulus by zero."""


def wrap(n: int) -> int:
    return n & MASK


def to_signed(w: int) -> int:
    w &= MASK
    return w - (1 << WORD_BITS) if w & SIGN else w


def add(a, b):
    return (a + b) & MASK


def sub(a, b):
    return (a - b) & MASK


def mul(a, b):
    return (a * b) & MASK


def neg(a):
    return (-a) & MASK


def bit_not(a):
    return ~a & MASK


def div_u(a, b):
    if b == 0:
        raise ArithmeticTrap("division by zero")
    return a // b


def mod_u(a, b):
    if b == 0:
        raise ArithmeticTrap("modulus by zero")
    return a % b


def euclid_divmod(n: int, d: int) -> tuple[int, int]:
    """Euclidean quotient and remainder of two Python ints.

    The remainder always satisfies ``0 <= r < abs(d)`` and ``n == d*q + r``.
    """
    if d == 0:
        raise ArithmeticTrap("division by zero")
    q, r = divmod(n, d)  # floored: r has the sign of d
    if r < 0:
        # only possible for d < 0
        q += 1
        r -= d
    return q, r


def div_e(a, b):
    """Signed Euclidean quotient of two words."""
    q, _ = euclid_divmod(to_signed(a), to_signed(b))
    return q & MASK


def mod_e(a, b):
    """Signed Euclidean remainder of two words (never negative)."""
    _, r = euclid_divmod(to_signed(a), to_signed(b))
    return r & MASK


def shl(a, n):
    return 0 if n >= WORD_BITS else (a << n) & MASK


def shr_u(a, n):
    return 0 if n >= WORD_BITS else a >> n


def shr_a(a, n):
    s = to_signed(a)
    if n >= WORD_BITS:
        return MASK if s < 0 else 0
    return (s >> n) & MASK


def lt_u(a, b):
    return int(a < b)


def lt_s(a, b):
    return int(to_signed(a) < to_signed(b))


def le_u(a, b):
    return int(a <= b)


def le_s(a, b):
    return int(to_signed(a) <= to_signed(b))


def gt_u(a, b):
    return int(a > b)


def gt_s(a, b):
    return int(to_signed(a) > to_signed(b))


def ge_u(a, b):
    return int(a >= b)


def ge_s(a, b):
    return int(to_signed(a) >= to_signed(b))


def eq(a, b):
    return int(a == b)


def ne(a, b):
    return int(a != b)


# (operator text, signed flag) -> binary function.  ``and``/``or`` alias the
# bitwise forms.
def bit_and(a, b):
    return a & b


def bit_or(a, b):
    return a | b


BINARY = {
    ("+", False): add,
    ("-", False): sub,
    ("*", False): mul,
    ("/", False): div_u,
    ("/", True): div_e,
    ("%", False): mod_u,
    ("%", True): mod_e,
    ("&", False): bit_and,
    ("and", False): bit_and,
    ("|", False): bit_or,
    ("or", False): bit_or,
    ("^", False): lambda a, b: a ^ b,
    ("<<", False): shl,
    (">>", False): shr_u,
    (">>", True): shr_a,
    ("=", False): eq,
    ("<>", False): ne,
    ("<", False): lt_u,
    ("<", True): lt_s,
    ("<=", False): le_u,
    ("<=", True): le_s,
    (">", False): gt_u,
    (">", True): gt_s,
    (">=", False): ge_u,
    (">=", True): ge_s,
}

UNARY = {
    "-": neg,
    "~": bit_not,
    "not": bit_not,
}
