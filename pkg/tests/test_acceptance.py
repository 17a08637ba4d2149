"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines, or use
``slrc bench`` for the same checks plus a CSV summary.
"""

import pytest

from slrc import bench


@pytest.mark.slow
@pytest.mark.parametrize("check", bench.CHECKS, ids=[c.__name__ for c in bench.CHECKS])
def test_criterion(check):
    result = check()
    print(result.line())
    assert result.ok, result.line()
