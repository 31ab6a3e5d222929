"""One test per acceptance criterion check, each printing a PASS/FAIL line."""

import pytest

from noon_forge.acceptance import CHECKS, run_check


@pytest.mark.parametrize("check", CHECKS, ids=[f"c{c.criterion}-{c.key}" for c in CHECKS])
def test_criterion(check, capsys):
    r = run_check(check)
    with capsys.disabled():
        print(f"\n{r.line()}  ({r.seconds:.2f}s)")
    assert r.passed, r.line()
