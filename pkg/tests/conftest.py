import numpy as np
import pytest

from chaoskit import kernels

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte Carlo or CLI runs")
    config.addinivalue_line("markers", "acceptance: one of the numbered acceptance criteria")


class Recorder:
    def __call__(self, number: int, ok: bool, detail: str) -> bool:
        ok = bool(ok)
        prev = _ACCEPTANCE.get(number)
        if prev is not None:
            ok = ok and prev[0]
            detail = f"{prev[1]}; {detail}"
        _ACCEPTANCE[number] = (ok, detail)
        print(f"\nACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok


@pytest.fixture(scope="session")
def record():
    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[k]
        tr.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def fd():
    return kernels.fd(6, 1.5)


@pytest.fixture(scope="session")
def herm2():
    return kernels.herm2()


@pytest.fixture(scope="session")
def rosen():
    return kernels.rosen()


@pytest.fixture(scope="session")
def blk2():
    return kernels.blk2()


@pytest.fixture
def gen():
    return np.random.default_rng(12345)
