"""Collects the acceptance verdicts and prints one line per criterion at the
end of the session."""

import pytest

_VERDICTS: dict[str, list[tuple[bool, str]]] = {}


class AcceptanceReport:
    def add(self, criterion: str, ok: bool, detail: str) -> None:
        _VERDICTS.setdefault(criterion, []).append((bool(ok), detail))


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceReport()


def _sort_key(name: str):
    head = name.split()[0]
    return (int(head) if head.isdigit() else 99, name)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_VERDICTS, key=_sort_key):
        parts = _VERDICTS[name]
        ok = all(p[0] for p in parts)
        details = "; ".join(("" if p[0] else "FAILED: ") + p[1] for p in parts)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {name}: {details}")
