"""Small recursive-descent parser turning text expressions into RatFunc.

Grammar: `+ - * / ^` with usual precedence, parentheses, integer literals
and symbol names.  Names may carry an index-offset suffix `@k` and a prime
(`X'` is shorthand for `X@1`), matching the equation DSL conventions.
"""

from __future__ import annotations

import re

from .algebra import RatFunc
from .errors import DslSyntaxError, UnknownSymbol

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*(?:@-?\d+)?'*)"
    r"|(?P<op>[-+*/^()=]))"
)


def tokenize(text, line_offset=0):
    tokens = []
    lines = text.split("\n")
    for ln, line in enumerate(lines):
        pos = 0
        while pos < len(line):
            if line[pos].isspace():
                pos += 1
                continue
            m = _TOKEN.match(line, pos)
            if not m or m.start() != pos:
                raise DslSyntaxError(
                    f"unexpected character {line[pos]!r}",
                    line=line_offset + ln + 1, column=pos + 1)
            kind = m.lastgroup
            val = m.group(kind)
            tokens.append((kind, val, line_offset + ln + 1, m.start(kind) + 1))
            pos = m.end()
    return tokens


def canon_name(name):
    """Normalise prime/offset suffixes: X' -> X@1, X@0 -> X."""
    primes = len(name) - len(name.rstrip("'"))
    base = name.rstrip("'")
    off = 0
    if "@" in base:
        base, s = base.split("@")
        off = int(s)
    off += primes
    return base if off == 0 else f"{base}@{off}"


def split_offset(name):
    if "@" in name:
        base, s = name.split("@")
        return base, int(s)
    return name, 0


class _Parser:
    def __init__(self, tokens, symbols=None):
        self.tokens = tokens
        self.pos = 0
        self.symbols = symbols

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        t = self.peek()
        if t is None:
            raise DslSyntaxError("unexpected end of expression")
        self.pos += 1
        return t

    def expect_op(self, op):
        t = self.next()
        if t[0] != "op" or t[1] != op:
            raise DslSyntaxError(f"expected {op!r}, got {t[1]!r}",
                                 line=t[2], column=t[3])

    def parse_expr(self):
        node = self.parse_term()
        while True:
            t = self.peek()
            if t and t[0] == "op" and t[1] in "+-":
                self.next()
                rhs = self.parse_term()
                node = node + rhs if t[1] == "+" else node - rhs
            else:
                return node

    def parse_term(self):
        node = self.parse_factor()
        while True:
            t = self.peek()
            if t and t[0] == "op" and t[1] in "*/":
                self.next()
                rhs = self.parse_factor()
                node = node * rhs if t[1] == "*" else node / rhs
            else:
                return node

    def parse_factor(self):
        t = self.peek()
        if t and t[0] == "op" and t[1] == "-":
            self.next()
            return -self.parse_factor()
        if t and t[0] == "op" and t[1] == "+":
            self.next()
            return self.parse_factor()
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        t = self.peek()
        if t and t[0] == "op" and t[1] == "^":
            self.next()
            sign = 1
            t2 = self.peek()
            if t2 and t2[0] == "op" and t2[1] == "-":
                self.next()
                sign = -1
            t3 = self.next()
            if t3[0] != "num":
                raise DslSyntaxError("exponent must be an integer literal",
                                     line=t3[2], column=t3[3])
            return base ** (sign * int(t3[1]))
        return base

    def parse_atom(self):
        t = self.next()
        if t[0] == "num":
            return RatFunc.const(int(t[1]))
        if t[0] == "name":
            name = canon_name(t[1])
            if self.symbols is not None:
                base, _ = split_offset(name)
                if base not in self.symbols:
                    raise UnknownSymbol(f"unknown symbol {base!r}",
                                        line=t[2], column=t[3])
            return RatFunc.var(name)
        if t[0] == "op" and t[1] == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise DslSyntaxError(f"unexpected token {t[1]!r}",
                             line=t[2], column=t[3])


def parse_ratfunc(text, symbols=None):
    """Parse an expression into a RatFunc.

    When ``symbols`` is given, any base name outside it raises
    UnknownSymbol with position information.
    """
    p = _Parser(tokenize(text), symbols)
    node = p.parse_expr()
    t = p.peek()
    if t is not None:
        raise DslSyntaxError(f"trailing input {t[1]!r}", line=t[2], column=t[3])
    return node
