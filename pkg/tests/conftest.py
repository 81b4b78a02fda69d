from hypothesis import settings

# compiled kernels load on first call, which would trip per-example deadlines
settings.register_profile("gampc", deadline=None)
settings.load_profile("gampc")

# one line per acceptance criterion, shown after the test run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
