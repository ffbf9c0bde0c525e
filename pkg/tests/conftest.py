import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_results: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    outcome = "FAIL" if call.excinfo is not None else "PASS"
    _results[number] = (outcome, title)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        outcome, title = _results[number]
        terminalreporter.write_line(f"[{outcome}] criterion {number:2d}: {title}")
    passed = sum(1 for o, _ in _results.values() if o == "PASS")
    terminalreporter.write_line(f"{passed}/{len(_results)} criteria passed")
