"""Hot matching kernels with an optional compiled backend.

Filter trees are compiled (by :mod:`frogi.filters`) into nested tuples of the
form ``(opcode, a, b)`` so the evaluator works on one flat data contract:

    (OP_AND,     (prog, ...), None)
    (OP_OR,      (prog, ...), None)
    (OP_NOT,     prog,        None)
    (OP_EQ,      attr, value)
    (OP_PRESENT, attr, None)
    (OP_SUBSTR,  attr, (segment, ...))   # segments joined by '*'
    (OP_GE,      attr, value)
    (OP_LE,      attr, value)

Property maps are plain dicts: attribute name -> str | int | list[str].
``frogi._speedups`` implements the same two entry points in Cython; it is
preferred when importable unless FROGI_PURE is set in the environment.
"""

from __future__ import annotations

import os

OP_AND = 1
OP_OR = 2
OP_NOT = 3
OP_EQ = 4
OP_PRESENT = 5
OP_SUBSTR = 6
OP_GE = 7
OP_LE = 8

_DIGITS = frozenset("0123456789")
_MISSING = object()


def _as_int(text: str) -> int | None:
    body = text[1:] if text[:1] == "-" else text
    if body and all(c in _DIGITS for c in body):
        return int(text)
    return None


def _compare(element: str, operand: str) -> int:
    # Numeric when both operands are decimal integers, else byte-wise.
    a = _as_int(element)
    b = _as_int(operand)
    if a is not None and b is not None:
        return -1 if a < b else (1 if a > b else 0)
    ea = element.encode("utf-8")
    eb = operand.encode("utf-8")
    return -1 if ea < eb else (1 if ea > eb else 0)


def _match_segments(segments: tuple[str, ...], text: str) -> bool:
    first = segments[0]
    last = segments[-1]
    if not text.startswith(first) or not text.endswith(last):
        return False
    pos = len(first)
    limit = len(text) - len(last)
    for seg in segments[1:-1]:
        found = text.find(seg, pos)
        if found < 0 or found + len(seg) > limit:
            return False
        pos = found + len(seg)
    return pos <= limit


def py_eval_program(prog: tuple, props: dict) -> bool:
    """Pure-Python program evaluator (absent attributes never match)."""
    op = prog[0]
    if op == OP_AND:
        for child in prog[1]:
            if not py_eval_program(child, props):
                return False
        return True
    if op == OP_OR:
        for child in prog[1]:
            if py_eval_program(child, props):
                return True
        return False
    if op == OP_NOT:
        return not py_eval_program(prog[1], props)

    value = props.get(prog[1], _MISSING)
    if value is _MISSING:
        return False
    if op == OP_PRESENT:
        return True

    elements = value if isinstance(value, (list, tuple)) else (value,)
    operand = prog[2]
    if op == OP_EQ:
        for el in elements:
            if (el if isinstance(el, str) else str(el)) == operand:
                return True
        return False
    if op == OP_SUBSTR:
        for el in elements:
            if _match_segments(operand, el if isinstance(el, str) else str(el)):
                return True
        return False
    if op == OP_GE:
        for el in elements:
            if _compare(el if isinstance(el, str) else str(el), operand) >= 0:
                return True
        return False
    if op == OP_LE:
        for el in elements:
            if _compare(el if isinstance(el, str) else str(el), operand) <= 0:
                return True
        return False
    raise ValueError(f"bad opcode {op}")


def py_cron_match(fields: tuple, parts: tuple) -> bool:
    """fields: 7-tuple of None (wildcard) or frozenset[int]; parts: 7 ints."""
    for i in range(7):
        field = fields[i]
        if field is not None and parts[i] not in field:
            return False
    return True


if os.environ.get("FROGI_PURE"):
    _speedups = None
else:
    try:
        from frogi import _speedups  # type: ignore[attr-defined]
    except ImportError:
        _speedups = None

if _speedups is not None:
    eval_program = _speedups.eval_program
    cron_match = _speedups.cron_match
    BACKEND = "compiled"
else:
    eval_program = py_eval_program
    cron_match = py_cron_match
    BACKEND = "pure"


def available_backends() -> dict[str, tuple]:
    """Backend name -> (eval_program, cron_match), for tests and benchmarks."""
    backends = {"pure": (py_eval_program, py_cron_match)}
    if _speedups is not None:
        backends["compiled"] = (_speedups.eval_program, _speedups.cron_match)
    return backends
