import random

import pytest

from frogi.errors import FilterParseError
from frogi.filters import (
    And,
    Equals,
    GreaterEq,
    LessEq,
    Not,
    Or,
    Present,
    Substring,
    eval_filter,
    parse_filter,
    render_filter,
)

# --- an independent recursive-descent reference parser (test oracle) ---------


def ref_parse(text):
    node, pos = _ref_filter(text, 0)
    if pos != len(text):
        raise ValueError("trailing input")
    return node


def _ref_filter(text, pos):
    assert text[pos] == "(", "filter must open with ("
    pos += 1
    ch = text[pos]
    if ch in "&|":
        children = []
        pos += 1
        while text[pos] == "(":
            child, pos = _ref_filter(text, pos)
            children.append(child)
        assert children
        node = (And if ch == "&" else Or)(tuple(children))
    elif ch == "!":
        child, pos = _ref_filter(text, pos + 1)
        node = Not(child)
    else:
        start = pos
        while text[pos] not in "=<>":
            pos += 1
        attr = text[start:pos]
        op = text[pos]
        if op in "<>":
            assert text[pos + 1] == "="
            value, pos = _ref_value(text, pos + 2, allow_star=False)
            node = (GreaterEq if op == ">" else LessEq)(attr, value[0])
        else:
            segments, pos = _ref_value(text, pos + 1, allow_star=True)
            if len(segments) == 1:
                node = Equals(attr, segments[0])
            elif segments == ("", ""):
                node = Present(attr)
            else:
                node = Substring(attr, segments)
    assert text[pos] == ")"
    return node, pos + 1


def _ref_value(text, pos, allow_star):
    parts, current = [], []
    while text[pos] != ")":
        if text[pos] == "\\":
            current.append(text[pos + 1])
            pos += 2
        elif text[pos] == "*" and allow_star:
            parts.append("".join(current))
            current = []
            pos += 1
        else:
            current.append(text[pos])
            pos += 1
    parts.append("".join(current))
    return tuple(parts), pos


# --- an independent reference evaluator (test oracle) -------------------------


def ref_eval(node, props):
    if isinstance(node, And):
        return all(ref_eval(c, props) for c in node.children)
    if isinstance(node, Or):
        return any(ref_eval(c, props) for c in node.children)
    if isinstance(node, Not):
        return not ref_eval(node.child, props)
    if node.attr not in props:
        return False
    if isinstance(node, Present):
        return True
    value = props[node.attr]
    elements = list(value) if isinstance(value, (list, tuple)) else [value]
    texts = [e if isinstance(e, str) else str(e) for e in elements]
    if isinstance(node, Equals):
        return node.value in texts
    if isinstance(node, Substring):
        import re

        pattern = ".*".join(re.escape(s) for s in node.segments)
        return any(re.fullmatch(pattern, t, re.DOTALL) for t in texts)

    def cmp(t):
        def as_int(s):
            body = s[1:] if s.startswith("-") else s
            return int(s) if body.isdigit() and body else None

        a, b = as_int(t), as_int(node.value)
        if a is not None and b is not None:
            return (a > b) - (a < b)
        ta, tb = t.encode(), node.value.encode()
        return (ta > tb) - (ta < tb)

    if isinstance(node, GreaterEq):
        return any(cmp(t) >= 0 for t in texts)
    return any(cmp(t) <= 0 for t in texts)


# --- parsing ----------------------------------------------------------------------


def test_parse_equality():
    assert parse_filter("(language=fr)") == Equals("language", "fr")


def test_parse_pid_equality():
    assert parse_filter("(service.pid=server.y2)") == Equals("service.pid", "server.y2")


def test_parse_presence():
    assert parse_filter("(cron.pattern=*)") == Present("cron.pattern")


def test_parse_conjunction_matches_reference_parser():
    text = "(&(objectClass=y.Y)(language=fr))"
    expected = And((Equals("objectClass", "y.Y"), Equals("language", "fr")))
    assert parse_filter(text) == expected
    assert ref_parse(text) == expected


@pytest.mark.parametrize(
    "text",
    [
        "(a=b)",
        "(a=*)",
        "(a=he*llo)",
        "(a=*x*)",
        "(a=**)",
        "(a>=10)",
        "(a<=-3)",
        "(&(a=b)(c=d)(e=f))",
        "(|(a=b))",
        "(!(x=1))",
        "(&(|(a=1)(b=2))(!(c=3)))",
        "(a=c:\\\\dir)",
        "(a=\\*literal\\*)",
        "(a=va(lue)",
    ],
)
def test_parse_agrees_with_reference_parser(text):
    if text == "(a=va(lue)":
        with pytest.raises(FilterParseError):
            parse_filter(text)
        return
    assert parse_filter(text) == ref_parse(text)


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("(a=b", "unbalanced"),
        ("(&)", "empty operator list"),
        ("(|)", "empty operator list"),
        ("(!)", "dangling"),
        ("(a b=c)", "illegal attribute"),
        ("(=x)", "expected attribute"),
        ("(a)", "dangling attribute"),
        ("(a=b))", "trailing"),
        ("(a>=x*y)", "wildcard not allowed"),
        ("(a=\\q)", "invalid escape"),
        ("", "expected '('"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(FilterParseError) as err:
        parse_filter(text)
    assert fragment in str(err.value)
    assert err.value.offset >= 0


def test_parse_error_offset_points_at_problem():
    with pytest.raises(FilterParseError) as err:
        parse_filter("(abc=x(y)")
    assert err.value.offset == 6


# --- evaluation ---------------------------------------------------------------------


def test_equals_matches_property():
    assert eval_filter(Equals("language", "fr"), {"language": "fr"})


def test_absent_attribute_is_false():
    assert not eval_filter(Equals("a", "b"), {})


def test_negated_absent_attribute_is_true():
    assert eval_filter(Not(Equals("a", "b")), {})


def test_list_values_match_any_element():
    props = {"objectClass": ["y.Y", "java.lang.Runnable"]}
    assert eval_filter(Equals("objectClass", "y.Y"), props)
    assert not eval_filter(Equals("objectClass", "z.Z"), props)


def test_integer_property_renders_as_decimal():
    assert eval_filter(Equals("port", "8080"), {"port": 8080})
    assert not eval_filter(Equals("port", "08080"), {"port": 8080})


@pytest.mark.parametrize(
    "node, props, expected",
    [
        (GreaterEq("n", "9"), {"n": "10"}, True),  # numeric, not lexicographic
        (GreaterEq("n", "9"), {"n": "abc"}, True),  # bytewise fallback
        (LessEq("n", "10"), {"n": "9"}, True),
        (LessEq("n", "B"), {"n": "A"}, True),
        (GreaterEq("n", "-5"), {"n": 0}, True),
        (LessEq("n", "-5"), {"n": 0}, False),
    ],
)
def test_ordering_comparisons(node, props, expected):
    assert eval_filter(node, props) is expected


@pytest.mark.parametrize(
    "pattern, text, expected",
    [
        (("he", "llo"), "helxxllo", True),
        (("he", "llo"), "hello", True),
        (("a", "b"), "ab", True),
        (("ab", "ba"), "aba", False),
        (("", "x", ""), "axb", True),
        (("", "", ""), "anything", True),
        (("a", "", "b"), "ab", True),
    ],
)
def test_substring_semantics(pattern, text, expected):
    assert eval_filter(Substring("k", pattern), {"k": text}) is expected


# --- brute-force cross-check over small random trees ---------------------------------


def random_tree(rng, depth):
    attrs = ["p", "q"]
    if depth == 0 or rng.random() < 0.5:
        attr = rng.choice(attrs)
        pick = rng.randrange(5)
        if pick == 0:
            return Equals(attr, rng.choice(["1", "2", "x", ""]))
        if pick == 1:
            return Present(attr)
        if pick == 2:
            segments = tuple(rng.choice(["", "x", "1"]) for _ in range(2))
            if segments == ("", ""):
                segments = ("x", "")
            return Substring(attr, segments)
        if pick == 3:
            return GreaterEq(attr, rng.choice(["1", "2", "x"]))
        return LessEq(attr, rng.choice(["1", "2", "x"]))
    kind = rng.randrange(3)
    if kind == 2:
        return Not(random_tree(rng, depth - 1))
    children = tuple(random_tree(rng, depth - 1) for _ in range(rng.randint(1, 3)))
    return And(children) if kind == 0 else Or(children)


def property_maps():
    values = ["1", "2", "x", 2, ["1", "x"]]
    maps = [{}]
    for v1 in values:
        maps.append({"p": v1})
        for v2 in values:
            maps.append({"p": v1, "q": v2})
    return maps


def test_eval_matches_reference_on_random_trees():
    rng = random.Random(7)
    maps = property_maps()
    for _ in range(300):
        tree = random_tree(rng, 3)
        for props in maps:
            assert eval_filter(tree, props) == ref_eval(tree, props), (tree, props)


def test_de_morgan_and_double_negation():
    rng = random.Random(11)
    maps = property_maps()
    for _ in range(200):
        f = random_tree(rng, 2)
        g = random_tree(rng, 2)
        for props in maps:
            assert eval_filter(Not(And((f, g))), props) == eval_filter(
                Or((Not(f), Not(g))), props
            )
            assert eval_filter(Not(Not(f)), props) == eval_filter(f, props)


# --- canonical printing ------------------------------------------------------------


def test_render_canonical_forms():
    assert render_filter(parse_filter("(language=fr)")) == "(language=fr)"
    assert render_filter(parse_filter("(&(a=1)(b=2))")) == "(&(a=1)(b=2))"
    assert render_filter(parse_filter("(cron.pattern=*)")) == "(cron.pattern=*)"


def test_render_escapes_specials():
    node = Equals("a", "x*y(z)\\")
    assert render_filter(node) == "(a=x\\*y\\(z\\)\\\\)"
    assert parse_filter(render_filter(node)) == node


def test_parse_render_parse_fixpoint():
    rng = random.Random(13)
    for _ in range(300):
        tree = random_tree(rng, 3)
        printed = render_filter(tree)
        reparsed = parse_filter(printed)
        assert reparsed == tree
        assert render_filter(reparsed) == printed
