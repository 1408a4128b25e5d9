from __future__ import annotations

import numpy as np
import pytest

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def verdict():
    """Record one pass/fail line for the acceptance summary, then assert."""

    def record(criterion: str, ok: bool, detail: str) -> None:
        _ACCEPTANCE.append((criterion, bool(ok), detail))
        print(f"{criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"{criterion}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{criterion}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(rng, n=4):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_hermitian(rng, n=4):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a + a.conj().T


def random_unitary(rng, n=2):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / abs(np.diag(r)))
