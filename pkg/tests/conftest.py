"""Shared pytest wiring: surface the acceptance verdict lines.

The acceptance tests record one PASS/FAIL line each in their module's
``VERDICTS`` list; default capture would swallow direct prints even on
the raw descriptors, so the lines are re-emitted here, after capture
ends, as a summary section.
"""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None) if mod is not None else None
    if lines:
        terminalreporter.section("acceptance verdicts")
        for line in lines:
            terminalreporter.write_line(line)
