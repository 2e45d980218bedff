import pytest

_RESULTS = {}


class Scoreboard:
    """Collects one verdict line per acceptance criterion."""

    def record(self, number, title, ok, detail):
        _RESULTS[number] = (title, ok, detail)
        print(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
        return ok


@pytest.fixture(scope="session")
def scoreboard():
    return Scoreboard()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
