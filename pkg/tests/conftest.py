import numpy as np
import pytest

from sdfm.core import GridSpec, LabelField, four_point_example, ten_atom_example


@pytest.fixture(scope="session")
def four():
    return four_point_example()


@pytest.fixture(scope="session")
def ten():
    return ten_atom_example()


def make_field(labels, n=None, lo=(0.0, 0.0), hi=(1.0, 1.0), producer="FM"):
    labels = np.asarray(labels, dtype=np.int64)
    n = int(labels.max()) if n is None else n
    grid = GridSpec(lo, hi, labels.shape[0], labels.shape[1])
    return LabelField(grid, labels, producer, max(n, 1))


ACCEPTANCE_LINES: dict = {}


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"{'PASS' if passed else 'FAIL'} [{number:2d}] {title}: {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
