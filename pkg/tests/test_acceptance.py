"""Acceptance criteria 1-14 with the default configuration.

Each criterion runs once on a shared context (endpoint samples and Phi
profiles are reused across criteria) and prints one pass/fail line; the
lines are repeated in the terminal summary.
"""

import pytest

from carnotheat.acceptance import CRITERIA, AcceptanceConfig, _Context, run_acceptance

LINES: dict = {}


@pytest.fixture(scope="module")
def context():
    cfg = AcceptanceConfig()
    return cfg, _Context(cfg, None)


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(context, number):
    cfg, ctx = context
    (res,) = run_acceptance(cfg, [number], context=ctx)
    LINES[number] = res.line()
    print(res.line())
    assert res.ok, res.summary
