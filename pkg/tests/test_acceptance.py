"""Acceptance criteria at their stated tolerances, one line per criterion."""

import pytest

from fbmchaos.acceptance import CHECKS, run_check


@pytest.mark.slow
@pytest.mark.parametrize("check", CHECKS, ids=[f"{c.number:02d}-{c.name.replace(' ', '-')}" for c in CHECKS])
def test_acceptance_criterion(check, capsys):
    res = run_check(check)
    with capsys.disabled():
        print(f"\n{res.line()}")
    assert res.passed, res.line()
