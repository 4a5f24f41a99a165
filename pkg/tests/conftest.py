import sys

import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: runs a simulation or refinement ladder (minutes)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # one line per acceptance criterion, visible even when capture
    # swallows the in-test prints
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.line(line)
