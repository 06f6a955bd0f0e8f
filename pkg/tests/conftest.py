import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from hrdd.data import Dataset  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_dataset(sizes=(40, 40), tau=(1.0, -1.0), sigma=0.5, seed=0, binary=False, c=0.0):
    """Small linear-in-x grouped data set with a known jump per group."""
    r = np.random.default_rng(seed)
    ys, xs, gs = [], [], []
    for g, (n, t) in enumerate(zip(sizes, tau)):
        x = r.uniform(c - 1, c + 1, n)
        y = 0.3 + t * (x >= c) + 0.5 * (x - c) + sigma * r.standard_normal(n)
        if binary:
            y = (r.random(n) < 1 / (1 + np.exp(-(y - 0.3)))).astype(float)
        ys.append(y)
        xs.append(x)
        gs.append(np.full(n, g))
    return Dataset.from_arrays(np.concatenate(ys), np.concatenate(xs), np.concatenate(gs), c,
                               "binary" if binary else "continuous")


@pytest.fixture
def acceptance(request, capsys):
    """Record one PASS/FAIL line per acceptance criterion and echo it."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        lines.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
