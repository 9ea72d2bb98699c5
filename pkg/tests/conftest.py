"""Per-criterion PASS/FAIL summary for the acceptance suite.

Tests named ``test_criterion_NN_<label>`` are grouped by ``NN``; a criterion
passes only when every test in its group passes.
"""

import re
import sys
from collections import defaultdict
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERION = re.compile(r"test_criterion_(\d+)[a-z]?_(\w+?)(\[|$)")
_results: dict[int, list[tuple[str, str]]] = defaultdict(list)


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid.rsplit("::", 1)[-1])
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _results[int(m.group(1))].append((m.group(2), report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_results):
        checks = _results[num]
        failed = [name for name, outcome in checks if outcome != "passed"]
        status = "FAIL" if failed else "PASS"
        detail = f" (failed: {', '.join(failed)})" if failed else ""
        tr.write_line(f"criterion {num:2d}: {status}  [{len(checks) - len(failed)}/{len(checks)} checks]{detail}")
