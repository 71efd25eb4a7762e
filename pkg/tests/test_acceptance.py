"""Acceptance criteria A1 to A15 at their stated tolerances.

Each criterion runs once; A15 reruns all of them and compares the canonical JSON.
One PASS/FAIL line per criterion is printed to the terminal.
"""
import pytest

from uniconvex.acceptance import CRITERIA, determinism_check, format_line, run_criterion

RESULTS = {}


def _report(request, result):
    line = format_line(result)
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        reporter.write_line(line)
    else:
        print(line)


@pytest.mark.parametrize("cid", list(CRITERIA))
def test_criterion(cid, request):
    result = run_criterion(cid)
    RESULTS[cid] = result
    _report(request, result)
    assert result["passed"], result["details"]


def test_determinism(request):
    missing = [c for c in CRITERIA if c not in RESULTS]
    for cid in missing:
        RESULTS[cid] = run_criterion(cid)
    result = determinism_check([RESULTS[c] for c in CRITERIA])
    _report(request, result)
    assert result["passed"], result["details"]
