import numpy as np
import pytest

from orbitcount.group import GroupElement, LatticeElement


def random_group(rng: np.random.Generator, bound: float = 5.0) -> GroupElement:
    while True:
        m = rng.uniform(-bound, bound, size=(2, 2))
        d = np.linalg.det(m)
        if abs(d) > 1e-2:
            break
    if d < 0:
        m[:, [0, 1]] = m[:, [1, 0]]
    return GroupElement.normalized(m)


def random_lattice(rng: np.random.Generator, length: int = 8) -> LatticeElement:
    g = LatticeElement.identity()
    for _ in range(length):
        n = int(rng.integers(-3, 4))
        g = g @ LatticeElement.translation(n) @ LatticeElement.inversion()
    return g if rng.random() < 0.5 else -g


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
