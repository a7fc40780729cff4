"""Full-scale acceptance run: one line per criterion, then the verdict.

This takes about 40 minutes on one core; criterion 12 alone simulates
10^10 chain steps.
"""

import json

import pytest

from rcinar import verify as V


@pytest.mark.parametrize("number", sorted(V.CRITERIA))
def test_criterion(number, capsys):
    res = V.run_criterion(number, seed=V.VERIFY_SEED, scale=1.0)
    with capsys.disabled():
        print(f"\n{res.line()}  ({res.seconds:.0f}s) {json.dumps(res.details, default=str)}")
    assert res.passed, res.details
