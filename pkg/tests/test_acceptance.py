"""Acceptance gate: one test per criterion, each reported as a PASS/FAIL line."""

import pytest

from ghzklm.acceptance import CRITERIA, AcceptanceContext, run_criterion

from .conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="module")
def context():
    return AcceptanceContext()


@pytest.mark.parametrize("cid", list(CRITERIA))
def test_criterion(cid, context):
    result = run_criterion(cid, context)
    ACCEPTANCE_LINES.append(result.line())
    print(result.line())
    assert result.passed, result.line()
