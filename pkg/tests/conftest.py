import random

import pytest
from gmpy2 import mpq

from bethe_forge.hilbert import Twist

SMALL = sorted({mpq(p, q) for q in (1, 2, 3) for p in range(1, 13)})


def draw_twist(rng: random.Random, K: int, N: int, M: int = 0) -> Twist:
    """Distinct small-height eigenvalues and random inhomogeneities."""
    xi = rng.sample(SMALL, K + M)
    theta = [mpq(rng.randint(-6, 6), rng.choice((1, 2, 3))) for _ in range(N)]
    return Twist(K, M, tuple(xi), tuple(theta))


def draw_point(rng: random.Random, tw: Twist, avoid=()) -> mpq:
    while True:
        t = mpq(rng.choice((-1, 1)) * rng.randint(1, 9), rng.randint(5, 17))
        if t not in avoid and all(1 - t * x != 0 for x in tw.xi):
            return t


@pytest.fixture
def rng():
    return random.Random(20240611)


@pytest.fixture
def tw22():
    return Twist.make((2, 3), (0, mpq(1, 2)))


ACCEPTANCE: dict = {}


def record(number: int, ok: bool, detail: str) -> bool:
    """Remember and print one acceptance line; returns ``ok`` for asserting."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE.setdefault(number, []).append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        for line in ACCEPTANCE[number]:
            terminalreporter.write_line(line)
