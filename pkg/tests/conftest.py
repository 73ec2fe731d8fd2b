import time

import pytest

_VERDICTS: dict = {}


class Criterion:
    """Collects violations for one acceptance criterion and times it."""

    def __init__(self, number: int, limit: float):
        self.number = number
        self.limit = limit
        self.violations: list[str] = []
        self.checked = 0
        self.start = time.perf_counter()

    def check(self, ok: bool, message: str) -> None:
        self.checked += 1
        if not ok:
            self.violations.append(message)

    def finish(self) -> None:
        elapsed = time.perf_counter() - self.start
        if elapsed >= self.limit:
            self.violations.append(f"runtime {elapsed:.1f}s exceeds {self.limit}s")
        status = "PASS" if not self.violations else "FAIL"
        line = f"criterion {self.number}: {status} ({self.checked} checks, {len(self.violations)} violations, {elapsed:.2f}s)"
        if self.violations:
            line += " first: " + self.violations[0]
        _VERDICTS[self.number] = line
        print(line)
        assert not self.violations, "\n".join(self.violations[:10])


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
