import pytest

_VERDICTS: dict[int, tuple[bool, str]] = {}


class Verdicts:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def record(self, criterion: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        print(line)
        _VERDICTS[criterion] = (ok, line)
        assert ok, line


@pytest.fixture(scope="session")
def verdicts() -> Verdicts:
    return Verdicts()


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[criterion][1])
