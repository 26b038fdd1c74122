"""Release gate: every criterion runs at its pinned tolerance.

Each test prints one pass/fail line; ``gexpect verify`` runs the same
registry from the command line.
"""

import pytest

from gexpect.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize(
    "cid",
    [cid for cid, _, _ in CRITERIA],
    ids=[f"criterion-{cid:02d}" for cid, _, _ in CRITERIA],
)
def test_criterion(cid, capsys):
    result = run_criterion(cid)
    status = "PASS" if result.passed else "FAIL"
    with capsys.disabled():
        print(
            f"\n{status} criterion {result.cid:2d} [{result.seconds:6.1f}s] "
            f"{result.description}: {result.detail}"
        )
    assert result.passed, f"criterion {cid}: {result.detail}"
