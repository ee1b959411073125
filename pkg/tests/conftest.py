import contextlib

import pytest

_RESULTS: list[tuple[str, str, str]] = []


def _first_line(exc: BaseException) -> str:
    text = str(exc).strip()
    return f"{type(exc).__name__}: {text.splitlines()[0]}" if text else type(exc).__name__


@pytest.fixture
def criterion():
    """``with criterion("C1 name") as note:`` records PASS/FAIL/SKIP for the summary."""

    @contextlib.contextmanager
    def record(name):
        details = []
        try:
            yield details.append
        except pytest.skip.Exception as exc:
            _RESULTS.append(("SKIP", name, str(exc)))
            raise
        except BaseException as exc:
            _RESULTS.append(("FAIL", name, "; ".join(details + [_first_line(exc)])))
            raise
        _RESULTS.append(("PASS", name, "; ".join(details)))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for status, name, detail in sorted(_RESULTS, key=lambda r: int(r[1].split()[0][1:])):
        terminalreporter.write_line(f"{status}  {name}" + (f"  [{detail}]" if detail else ""))
