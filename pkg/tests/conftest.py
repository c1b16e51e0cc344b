import sys
import itertools

import numpy as np
import pytest


def bit_points(n):
    """All of {0,1}^n, index i <-> sum x_j 2^j."""
    return [tuple((i >> j) & 1 for j in range(n)) for i in range(1 << n)]


def naive_poly_eval(terms, x, p=None):
    """Evaluate {((var, exp), ...): coeff} by plain integer arithmetic."""
    total = 0
    for mono, c in terms.items():
        t = c
        for v, e in mono:
            t *= int(x[v]) ** e
        total += t
    return total % p if p else total


def naive_matmul(A, B, p):
    n = len(A)
    return [[sum(A[i][k] * B[k][j] for k in range(n)) % p for j in range(n)] for i in range(n)]


def naive_matpow(A, d, p):
    """Oracle by d-1 plain multiplications (independent of repeated squaring)."""
    R = [[v % p for v in row] for row in A]
    for _ in range(d - 1):
        R = naive_matmul(R, A, p)
    return R


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
