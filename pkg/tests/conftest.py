import pytest

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_addoption(parser):
    parser.addoption("--extended", action="store_true", default=False,
                     help="run the slower symbolic checks (cancellation up to N = 8)")


def pytest_configure(config):
    config.addinivalue_line("markers", "extended: slow symbolic checks, enabled with --extended")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--extended"):
        return
    skip = pytest.mark.skip(reason="needs --extended")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def acceptance():
    """Record the outcome of one acceptance criterion for the summary table."""
    def record(number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = (bool(ok), detail)
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
