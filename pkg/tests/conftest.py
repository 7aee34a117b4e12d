"""Shared fixtures: the expensive table reproductions are computed once per session."""
import time

import pytest

from blochtomo import harness as H

ACCEPTANCE_LOG = {}


def _timed_reports(fn, labels):
    non_bme = [r[0] for r in labels if r[1].method != "bme"]
    bme = [r[0] for r in labels if r[1].method == "bme"]
    start = time.perf_counter()
    a = fn(rows=non_bme)
    mid = time.perf_counter()
    b = fn(rows=bme)
    end = time.perf_counter()
    rep = H.Report(a.name, a.cells + b.cells)
    return rep, {"non_bme": mid - start, "bme": end - mid}


@pytest.fixture(scope="session")
def table1_report():
    return _timed_reports(H.reproduce_table1, H.TABLE1_ROWS)


@pytest.fixture(scope="session")
def table2_report():
    return _timed_reports(H.reproduce_table2, H.TABLE2_ROWS)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LOG


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LOG):
        terminalreporter.write_line(ACCEPTANCE_LOG[key])
