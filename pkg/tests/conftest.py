"""Collects acceptance checks so the run ends with one verdict line per criterion."""
from collections import OrderedDict

import pytest

_RESULTS = OrderedDict()


class CriterionLog:
    def check(self, criterion, name, ok, detail):
        ok = bool(ok)
        _RESULTS.setdefault(criterion, []).append((name, ok, detail))
        print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion} / {name}: {detail}")
        assert ok, f"criterion {criterion} / {name}: {detail}"


@pytest.fixture(scope="session")
def criteria():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for criterion in sorted(_RESULTS, key=int):
        checks = _RESULTS[criterion]
        verdict = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        parts = "; ".join(f"{name} {'ok' if ok else 'FAILED'} ({detail})" for name, ok, detail in checks)
        tr.write_line(f"{verdict}  criterion {criterion}: {parts}")
