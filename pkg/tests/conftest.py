import numpy as np
import pytest

from robust_lrt import minimize_over_u, nominal_pair, solve_lfd

#: coarse grid for property tests; the default grid is used elsewhere
COARSE = (-10.0, 10.0, 801)

_ACCEPTANCE = {}


def record_criterion(number, label, ok, detail=""):
    """Store one acceptance check; a criterion passes only if all its checks do."""
    _ACCEPTANCE.setdefault(number, []).append((label, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        checks = _ACCEPTANCE[number]
        status = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        detail = "; ".join(f"{label}: {'ok' if ok else 'FAILED'} ({d})" for label, ok, d in checks)
        tr.write_line(f"criterion {number}: {status} | {detail}")


@pytest.fixture(scope="session")
def d1():
    return nominal_pair("d1")


@pytest.fixture(scope="session")
def d2():
    return nominal_pair("d2")


@pytest.fixture(scope="session")
def d3():
    return nominal_pair("d3")


@pytest.fixture(scope="session")
def d1_coarse():
    return nominal_pair("d1", COARSE)


@pytest.fixture(scope="session")
def kl_d1(d1):
    """KL balls of radius 0.1 around d1, solved at u = 0.5."""
    return solve_lfd(d1, "kl", 0.1, 0.1, 0.5)


@pytest.fixture(scope="session")
def kl_d1_opt(d1):
    return minimize_over_u(d1, "kl", 0.1, 0.1)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240601)
