import numpy as np
import pytest

from rkjl.linalg import RngState, make_system


def random_consistent(seed, m, n, unit_rows=False):
    """Gaussian ``A``, planted ``x`` and ``b = A x``."""
    rng = RngState(seed, 99)
    A = rng.normal(m * n).reshape(m, n)
    if unit_rows:
        A /= np.linalg.norm(A, axis=1)[:, None]
    x = rng.normal(n)
    return make_system(A, A @ x), x


@pytest.fixture
def small_system():
    return random_consistent(3, 40, 6)


# one PASS/FAIL line per acceptance criterion at the end of the run
_criteria = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    failed = report.outcome == "failed"
    if report.when == "call" or failed:
        _criteria[name] = "FAIL" if failed else ("PASS" if report.passed else "SKIP")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria):
        _, _, num, *words = name.split("_")
        terminalreporter.write_line(f"criterion {int(num):2d} {' '.join(words):<28} {_criteria[name]}")
