"""Compare the pure-Python and compiled matching kernels.

Run with ``python -m frogi.benchmarks``. Generates a corpus of random filter
programs and property maps, checks both backends agree, and times them.
"""

from __future__ import annotations

import random
import time

from frogi import kernels
from frogi.filters import (
    And,
    Equals,
    GreaterEq,
    LessEq,
    Not,
    Or,
    Present,
    Substring,
    compile_filter,
)
from frogi.triggers import parse_cron

ATTRS = ["language", "service.pid", "cron.pattern", "objectClass", "port", "zone"]
VALUES = ["fr", "en", "server.y2", "3", "42", "y.Y", "hello world", ""]


def random_filter(rng: random.Random, depth: int = 3):
    if depth == 0 or rng.random() < 0.55:
        attr = rng.choice(ATTRS)
        pick = rng.random()
        if pick < 0.4:
            return Equals(attr, rng.choice(VALUES))
        if pick < 0.55:
            return Present(attr)
        if pick < 0.7:
            segments = tuple(rng.choice(VALUES)[:3] for _ in range(rng.randint(2, 4)))
            if all(not s for s in segments):
                segments = ("h",) + segments[1:]
            return Substring(attr, segments)
        if pick < 0.85:
            return GreaterEq(attr, rng.choice(VALUES))
        return LessEq(attr, rng.choice(VALUES))
    pick = rng.random()
    children = tuple(random_filter(rng, depth - 1) for _ in range(rng.randint(1, 3)))
    if pick < 0.4:
        return And(children)
    if pick < 0.8:
        return Or(children)
    return Not(children[0])


def random_props(rng: random.Random) -> dict:
    props: dict = {}
    for attr in rng.sample(ATTRS, rng.randint(0, len(ATTRS))):
        pick = rng.random()
        if pick < 0.5:
            props[attr] = rng.choice(VALUES)
        elif pick < 0.75:
            props[attr] = rng.randint(-10, 100)
        else:
            props[attr] = [rng.choice(VALUES) for _ in range(rng.randint(1, 3))]
    return props


def build_corpus(pairs: int, seed: int = 20_05):
    rng = random.Random(seed)
    return [
        (compile_filter(random_filter(rng)), random_props(rng))
        for _ in range(pairs)
    ]


def bench_filters(pairs: int = 2000, rounds: int = 20) -> dict[str, float]:
    corpus = build_corpus(pairs)
    timings: dict[str, float] = {}
    reference = None
    for name, (eval_program, _) in kernels.available_backends().items():
        results = [eval_program(prog, props) for prog, props in corpus]
        if reference is None:
            reference = results
        elif results != reference:
            raise AssertionError("kernel backends disagree on the filter corpus")
        start = time.perf_counter()
        for _ in range(rounds):
            for prog, props in corpus:
                eval_program(prog, props)
        timings[name] = time.perf_counter() - start
    return timings


def bench_cron(rounds: int = 3) -> dict[str, float]:
    pattern = parse_cron("* * 3 * * * *").fields
    day = [
        (ts % 60, (ts // 60) % 60, (ts // 3600) % 24, 1, 1, 4, 1970)
        for ts in range(86_400)
    ]
    timings: dict[str, float] = {}
    for name, (_, cron_match) in kernels.available_backends().items():
        count = sum(1 for parts in day if cron_match(pattern, tuple(parts)))
        assert count == 3600, count
        start = time.perf_counter()
        for _ in range(rounds):
            for parts in day:
                cron_match(pattern, tuple(parts))
        timings[name] = time.perf_counter() - start
    return timings


def main() -> None:
    print(f"selected backend: {kernels.BACKEND}")
    print("filter evaluation (2000 programs x 20 rounds):")
    filter_times = bench_filters()
    for name, seconds in filter_times.items():
        print(f"  {name:9s} {seconds * 1000:8.1f} ms")
    _speedup(filter_times)
    print("cron matching (86400 ticks x 3 rounds):")
    cron_times = bench_cron()
    for name, seconds in cron_times.items():
        print(f"  {name:9s} {seconds * 1000:8.1f} ms")
    _speedup(cron_times)


def _speedup(timings: dict[str, float]) -> None:
    if "compiled" in timings and "pure" in timings and timings["compiled"] > 0:
        print(f"  speedup: {timings['pure'] / timings['compiled']:.2f}x")


if __name__ == "__main__":
    main()
