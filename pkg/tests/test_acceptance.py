"""The fourteen acceptance criteria at their stated sizes, tolerances and runtime limits.

Each test prints one ``criterion NN PASS|FAIL ...`` line.  Running this file
directly prints the same lines without pytest.
"""

import sys

import pytest

from hcalg.acceptance import CRITERIA, ORACLE_SOURCES, oracle_criterion, run_criterion

NUMBERS = sorted(set(CRITERIA) | {13})
_results = {}


def result(n):
    if n not in _results:
        if n == 13:
            for m in ORACLE_SOURCES:
                result(m)
            _results[13] = oracle_criterion(_results)
        else:
            _results[n] = run_criterion(n, quick=True, seed=0)
    return _results[n]


@pytest.mark.parametrize("number", NUMBERS, ids=lambda n: f"criterion_{n:02d}")
def test_criterion(number, capsys):
    r = result(number)
    with capsys.disabled():
        print("\n" + r.line(), end=" ")
    assert r.passed, r.details


if __name__ == "__main__":
    lines = [result(n).line() for n in NUMBERS]
    print("\n".join(lines))
    sys.exit(0 if all(result(n).passed for n in NUMBERS) else 1)
