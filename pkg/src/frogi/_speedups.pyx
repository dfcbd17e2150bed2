# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twin of the pure-Python kernels in frogi.kernels.

Operates on the same tuple programs and property dicts; must stay
behaviorally identical to py_eval_program / py_cron_match.
"""

DEF OP_AND = 1
DEF OP_OR = 2
DEF OP_NOT = 3
DEF OP_EQ = 4
DEF OP_PRESENT = 5
DEF OP_SUBSTR = 6
DEF OP_GE = 7
DEF OP_LE = 8

_MISSING = object()


cdef object _as_int(str text):
    cdef Py_ssize_t i, start = 0, n = len(text)
    if n == 0:
        return None
    if text[0] == u"-":
        start = 1
        if n == 1:
            return None
    for i in range(start, n):
        if not (u"0" <= text[i] <= u"9"):
            return None
    return int(text)


cdef int _compare(str element, str operand):
    cdef object a = _as_int(element)
    cdef object b = _as_int(operand)
    cdef bytes ea, eb
    if a is not None and b is not None:
        return -1 if a < b else (1 if a > b else 0)
    ea = element.encode("utf-8")
    eb = operand.encode("utf-8")
    return -1 if ea < eb else (1 if ea > eb else 0)


cdef bint _match_segments(tuple segments, str text):
    cdef str first = segments[0]
    cdef str last = segments[len(segments) - 1]
    cdef str seg
    cdef Py_ssize_t pos, limit, found, i
    if not text.startswith(first) or not text.endswith(last):
        return False
    pos = len(first)
    limit = len(text) - len(last)
    for i in range(1, len(segments) - 1):
        seg = segments[i]
        found = text.find(seg, pos)
        if found < 0 or found + len(seg) > limit:
            return False
        pos = found + len(seg)
    return pos <= limit


cdef str _text(object element):
    if type(element) is str:
        return <str>element
    return str(element)


def eval_program(tuple prog, dict props):
    """Evaluate a compiled filter program against a property map."""
    cdef int op = prog[0]
    cdef object child, value, el
    cdef str operand

    if op == OP_AND:
        for child in <tuple>prog[1]:
            if not eval_program(<tuple>child, props):
                return False
        return True
    if op == OP_OR:
        for child in <tuple>prog[1]:
            if eval_program(<tuple>child, props):
                return True
        return False
    if op == OP_NOT:
        return not eval_program(<tuple>prog[1], props)

    value = props.get(prog[1], _MISSING)
    if value is _MISSING:
        return False
    if op == OP_PRESENT:
        return True

    elements = value if type(value) is list or type(value) is tuple else (value,)
    if op == OP_EQ:
        operand = <str>prog[2]
        for el in elements:
            if _text(el) == operand:
                return True
        return False
    if op == OP_SUBSTR:
        for el in elements:
            if _match_segments(<tuple>prog[2], _text(el)):
                return True
        return False
    if op == OP_GE:
        operand = <str>prog[2]
        for el in elements:
            if _compare(_text(el), operand) >= 0:
                return True
        return False
    if op == OP_LE:
        operand = <str>prog[2]
        for el in elements:
            if _compare(_text(el), operand) <= 0:
                return True
        return False
    raise ValueError(f"bad opcode {op}")


def cron_match(tuple fields, tuple parts):
    """Match a parsed 7-field cron pattern against broken-down time parts."""
    cdef int i
    cdef object field
    for i in range(7):
        field = fields[i]
        if field is not None and parts[i] not in field:
            return False
    return True
