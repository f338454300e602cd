import pytest

_CRITERION_LINES = pytest.StashKey()


@pytest.fixture
def criterion_line(request):
    """Record one PASS/FAIL line per acceptance criterion.

    The lines are printed immediately (visible with -s or on failure) and
    repeated in the terminal summary so a plain `pytest -v` run shows them.
    """
    lines = request.config.stash.setdefault(_CRITERION_LINES, [])

    def record(num, ok, label):
        line = "criterion %02d %s: %s" % (num, "PASS" if ok else "FAIL", label)
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERION_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
