import numpy as np
import pytest

from ergodic_mfg import DgmConfig, ModelParams, solve_stationary_closed_form, train

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, title, passed, detail=""):
        _ACCEPTANCE.append((number, title, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE, key=lambda r: (str(r[0]).zfill(4))):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>3} {title}: {detail}")


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def biased():
    return ModelParams(delta=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def trained_unbiased():
    p = ModelParams()
    sol = solve_stationary_closed_form(p.b, p.delta)
    return train(DgmConfig(rho=sol.rho), p), sol, p


@pytest.fixture(scope="session")
def trained_biased():
    p = ModelParams(delta=1.0)
    sol = solve_stationary_closed_form(p.b, p.delta)
    return train(DgmConfig(rho=sol.rho), p), sol, p
