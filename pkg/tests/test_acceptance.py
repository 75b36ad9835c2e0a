"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The same checks run from the command line with ``irs-secrecy verify``.
Criteria 2 and 6 are expected to fail; the failing line states the measured
numbers.
"""
import pytest

from irs_secrecy.verify import CRITERIA

pytestmark = pytest.mark.slow


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"criterion_{n}")
def test_criterion(number, capsys):
    result = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
