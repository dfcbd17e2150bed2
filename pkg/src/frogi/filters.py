"""Search-filter expression trees: parsing, printing, evaluation.

The text grammar is the classic parenthesized prefix form:

    filter     = "(" body ")"
    body       = and | or | not | simple
    and        = "&" filter+        or = "|" filter+       not = "!" filter
    simple     = attr ("=" value | "=*" | "=" substr | ">=" value | "<=" value)
    substr     = [chars] "*" ( [chars] "*" )* [chars]
    attr       = 1*(ALPHA / DIGIT / "." / "-" / "_")

Backslash escapes ``*``, ``(``, ``)`` and ``\\`` inside values. Evaluation
delegates to the selected matching kernel (see :mod:`frogi.kernels`).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from frogi import kernels
from frogi.errors import FilterParseError


@dataclass(frozen=True)
class And:
    children: tuple[FilterNode, ...]

    def __post_init__(self):
        if not self.children:
            raise ValueError("And requires at least one child")


@dataclass(frozen=True)
class Or:
    children: tuple[FilterNode, ...]

    def __post_init__(self):
        if not self.children:
            raise ValueError("Or requires at least one child")


@dataclass(frozen=True)
class Not:
    child: FilterNode


@dataclass(frozen=True)
class Equals:
    attr: str
    value: str


@dataclass(frozen=True)
class Present:
    attr: str


@dataclass(frozen=True)
class Substring:
    attr: str
    segments: tuple[str, ...]  # pattern = segments joined by '*'

    def __post_init__(self):
        if len(self.segments) < 2:
            raise ValueError("Substring requires at least one wildcard")
        if self.segments == ("", ""):
            raise ValueError("the bare '*' pattern is Present, not Substring")


@dataclass(frozen=True)
class GreaterEq:
    attr: str
    value: str


@dataclass(frozen=True)
class LessEq:
    attr: str
    value: str


FilterNode = And | Or | Not | Equals | Present | Substring | GreaterEq | LessEq

_ATTR_CHARS = frozenset(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789.-_"
)
_ESCAPABLE = frozenset("*()\\")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def fail(self, message: str, pos: int | None = None):
        raise FilterParseError(message, self.pos if pos is None else pos)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            self.fail(f"expected {ch!r}")
        self.pos += 1

    def parse(self) -> FilterNode:
        while self.peek().isspace():
            self.pos += 1
        node = self.filter()
        while self.peek().isspace():
            self.pos += 1
        if self.pos != len(self.text):
            self.fail("trailing characters after filter")
        return node

    def filter(self) -> FilterNode:
        self.expect("(")
        node = self.body()
        if self.peek() != ")":
            self.fail("unbalanced parentheses: expected ')'")
        self.pos += 1
        return node

    def body(self) -> FilterNode:
        ch = self.peek()
        if ch == "&":
            self.pos += 1
            return And(self.operands())
        if ch == "|":
            self.pos += 1
            return Or(self.operands())
        if ch == "!":
            self.pos += 1
            if self.peek() != "(":
                self.fail("dangling '!' operator: expected a filter")
            return Not(self.filter())
        return self.simple()

    def operands(self) -> tuple[FilterNode, ...]:
        if self.peek() != "(":
            self.fail("empty operator list: expected at least one filter")
        items = []
        while self.peek() == "(":
            items.append(self.filter())
        return tuple(items)

    def simple(self) -> FilterNode:
        start = self.pos
        while self.peek() in _ATTR_CHARS:
            self.pos += 1
        attr = self.text[start:self.pos]
        if not attr:
            self.fail("expected attribute name")
        ch = self.peek()
        if ch in (")", ""):
            self.fail("dangling attribute: expected an operator")
        if ch in ("<", ">"):
            self.pos += 1
            self.expect("=")
            return (GreaterEq if ch == ">" else LessEq)(attr, self.value(ordered=True))
        if ch != "=":
            self.fail("illegal attribute character")
        self.pos += 1
        segments = self.segments()
        if len(segments) == 1:
            return Equals(attr, segments[0])
        if len(segments) == 2 and segments == ("", ""):
            return Present(attr)
        return Substring(attr, segments)

    def value(self, ordered: bool) -> str:
        segments = self.segments(no_wildcard=ordered)
        return segments[0]

    def segments(self, no_wildcard: bool = False) -> tuple[str, ...]:
        parts: list[str] = []
        current: list[str] = []
        while True:
            ch = self.peek()
            if ch in (")", ""):
                break
            if ch == "\\":
                nxt = self.text[self.pos + 1:self.pos + 2]
                if nxt not in _ESCAPABLE:
                    self.fail("invalid escape sequence")
                current.append(nxt)
                self.pos += 2
            elif ch == "*":
                if no_wildcard:
                    self.fail("wildcard not allowed in comparison value")
                parts.append("".join(current))
                current = []
                self.pos += 1
            elif ch == "(":
                self.fail("unescaped '(' in value")
            else:
                current.append(ch)
                self.pos += 1
        parts.append("".join(current))
        return tuple(parts)


def parse_filter(text: str) -> FilterNode:
    """Parse filter text into an expression tree.

    Raises :class:`FilterParseError` with the offending offset on bad input.
    """
    return _Parser(text).parse()


def _escape(value: str) -> str:
    out = []
    for ch in value:
        if ch in _ESCAPABLE:
            out.append("\\")
        out.append(ch)
    return "".join(out)


def render_filter(node: FilterNode) -> str:
    """Canonical printer: no redundant whitespace, operands in source order."""
    if isinstance(node, And):
        return "(&" + "".join(render_filter(c) for c in node.children) + ")"
    if isinstance(node, Or):
        return "(|" + "".join(render_filter(c) for c in node.children) + ")"
    if isinstance(node, Not):
        return "(!" + render_filter(node.child) + ")"
    if isinstance(node, Equals):
        return f"({node.attr}={_escape(node.value)})"
    if isinstance(node, Present):
        return f"({node.attr}=*)"
    if isinstance(node, Substring):
        return f"({node.attr}=" + "*".join(_escape(s) for s in node.segments) + ")"
    if isinstance(node, GreaterEq):
        return f"({node.attr}>={_escape(node.value)})"
    if isinstance(node, LessEq):
        return f"({node.attr}<={_escape(node.value)})"
    raise TypeError(f"not a filter node: {node!r}")


@lru_cache(maxsize=4096)
def compile_filter(node: FilterNode) -> tuple:
    """Flatten a tree into the kernel program form (cached per node)."""
    if isinstance(node, And):
        return (kernels.OP_AND, tuple(compile_filter(c) for c in node.children), None)
    if isinstance(node, Or):
        return (kernels.OP_OR, tuple(compile_filter(c) for c in node.children), None)
    if isinstance(node, Not):
        return (kernels.OP_NOT, compile_filter(node.child), None)
    if isinstance(node, Equals):
        return (kernels.OP_EQ, node.attr, node.value)
    if isinstance(node, Present):
        return (kernels.OP_PRESENT, node.attr, None)
    if isinstance(node, Substring):
        return (kernels.OP_SUBSTR, node.attr, node.segments)
    if isinstance(node, GreaterEq):
        return (kernels.OP_GE, node.attr, node.value)
    if isinstance(node, LessEq):
        return (kernels.OP_LE, node.attr, node.value)
    raise TypeError(f"not a filter node: {node!r}")


def eval_filter(node: FilterNode, props: dict) -> bool:
    """Standard filter semantics; absent attributes never match."""
    return kernels.eval_program(compile_filter(node), props)


def pid_filter(pid: str) -> Equals:
    """The rigid-binding form: match one provider by its persistent id."""
    return Equals("service.pid", pid)


def pid_of_filter(node: FilterNode) -> str | None:
    """Return the pid when a filter is exactly (service.pid=...), else None."""
    if isinstance(node, Equals) and node.attr == "service.pid":
        return node.value
    return None
