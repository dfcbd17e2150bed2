import os
import random

import pytest

from frogi import kernels
from frogi.benchmarks import build_corpus
from frogi.triggers import parse_cron, time_parts

BACKENDS = kernels.available_backends()


def test_backend_selection_reports_reality():
    assert kernels.BACKEND in BACKENDS
    if os.environ.get("FROGI_PURE"):
        assert kernels.BACKEND == "pure"


def test_pure_fallback_always_available():
    assert "pure" in BACKENDS


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_tuple_values_count_as_multi_valued(name):
    eval_program, _ = BACKENDS[name]
    program = (kernels.OP_EQ, "objectClass", "y.Y")
    assert eval_program(program, {"objectClass": ("y.Y", "other")})
    assert eval_program(program, {"objectClass": ["y.Y"]})
    assert not eval_program(program, {"objectClass": ("nope",)})


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_integer_values_compare_numerically(name):
    eval_program, _ = BACKENDS[name]
    assert eval_program((kernels.OP_GE, "n", "9"), {"n": 10})
    assert eval_program((kernels.OP_EQ, "n", "10"), {"n": 10})
    assert not eval_program((kernels.OP_EQ, "n", "010"), {"n": 10})


def test_backends_agree_on_random_corpus():
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    corpus = build_corpus(3000, seed=99)
    pure_eval = BACKENDS["pure"][0]
    fast_eval = BACKENDS["compiled"][0]
    for program, props in corpus:
        assert pure_eval(program, props) == fast_eval(program, props), (program, props)


def test_cron_backends_agree_over_a_day():
    pattern = parse_cron("0,30 * 3,15 * * * *").fields
    rng = random.Random(5)
    stamps = [rng.randrange(0, 4 * 366 * 86400) for _ in range(5000)]
    matchers = [match for _, match in BACKENDS.values()]
    for ts in stamps:
        parts = time_parts(ts)
        results = {m(pattern, parts) for m in matchers}
        assert len(results) == 1
