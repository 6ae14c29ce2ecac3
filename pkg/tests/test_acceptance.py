"""Acceptance criteria, one test per numbered check, at their stated tolerances.

Each test prints a single PASS/FAIL line; the collected lines are repeated in
the terminal summary so they survive output capture.
"""
import pytest

from nhberry.verify import CHECKS, format_table

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_acceptance(number):
    result = CHECKS[number]()
    table = format_table([result])
    line = table.splitlines()[0]
    ACCEPTANCE_LINES.append(line)
    print(table)
    assert result.passed, table
