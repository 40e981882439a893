import criterion_report


def pytest_terminal_summary(terminalreporter):
    """Echo the per-criterion PASS/FAIL lines after the test summary."""
    if criterion_report.LINES:
        terminalreporter.section("acceptance criteria")
        for line in criterion_report.LINES:
            terminalreporter.write_line(line)
