import numpy as np
import pytest

from sweepopt import _backend

BACKENDS = {"pure": _backend.pure}
if _backend.compiled is not None:
    BACKENDS["compiled"] = _backend.compiled


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return BACKENDS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Acceptance outcomes, keyed by criterion number, filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion, clause, passed, detail=""):
    ACCEPTANCE.setdefault(criterion, []).append((clause, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        clauses = ACCEPTANCE[crit]
        ok = all(p for _, p, _ in clauses)
        parts = "; ".join(f"{c} {'ok' if p else 'FAILED'} ({d})" for c, p, d in clauses)
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {crit}: {parts}")
