import contextlib

import pytest

_results = []


@pytest.fixture
def criterion(request):
    """Context manager that records one PASS/FAIL line per exit criterion."""

    @contextlib.contextmanager
    def check(number, title):
        try:
            yield
        except BaseException as exc:
            line = f"criterion {number:>2} FAIL  {title}  ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
            _emit(request, line)
            raise
        _emit(request, f"criterion {number:>2} PASS  {title}")

    return check


def _emit(request, line):
    _results.append(line)
    capman = request.config.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print("\n" + line)


def pytest_terminal_summary(terminalreporter):
    if _results:
        terminalreporter.section("exit criteria")
        for line in sorted(_results, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
