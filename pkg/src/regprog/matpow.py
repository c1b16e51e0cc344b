"""Matrix powering as register programs.

Inputs are the n^2 entries of M in row-major order; output k = i*n + j
receives (M^d)_{ij}.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from math import ceil, floor, log

from .builders import (Bound, BuildError, BuiltProgram, interpolation_program,
                       linear_program, waring_program)
from .field import FieldError, GF, next_prime
from .oracles import matpow_directive, oracle_function
from .poly import SparsePoly
from .rpir import Program, compose, parallel

DEFAULT_TERM_BUDGET = 20000


class BudgetError(ValueError):
    """Symbolic expansion would exceed the configured term budget."""


@dataclass(frozen=True)
class BoostPlan:
    delta: int
    digits: tuple  # alpha_0, ..., alpha_L, least significant first

    @classmethod
    def for_power(cls, d: int, delta: int) -> "BoostPlan":
        if delta < 2:
            raise BuildError("delta must be at least 2")
        if d < 1:
            raise BuildError("d must be at least 1")
        digits = []
        while d:
            digits.append(d % delta)
            d //= delta
        return cls(delta, tuple(digits))

    @property
    def L(self) -> int:
        return len(self.digits) - 1

    @property
    def power(self) -> int:
        return sum(a * self.delta ** i for i, a in enumerate(self.digits))


def matpow_poly(n: int, d: int, field=None, term_budget: int = DEFAULT_TERM_BUDGET) -> list:
    """Entry polynomials of M^d over n^2 variables (variable i*n+j is m_ij).

    The coefficient of each monomial counts the index paths producing it, so
    coefficients sum to n^(d-1) per entry.
    """
    if n < 1 or d < 1:
        raise BuildError("need n >= 1 and d >= 1")
    N = n * n
    var = [[SparsePoly.variable(i * n + j, N, field) for j in range(n)] for i in range(n)]
    cur = [row[:] for row in var]
    for _ in range(d - 1):
        nxt = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = SparsePoly.zero(N, field)
                for k in range(n):
                    acc = acc + cur[i][k] * var[k][j]
                row.append(acc)
            nxt.append(row)
        cur = nxt
        total = sum(len(P.terms) for row in cur for P in row)
        if total > term_budget:
            raise BudgetError(f"matrix power expansion exceeds {term_budget} terms")
    return [P for row in cur for P in row]


def _bounds(calls: int) -> list:
    return [Bound("calls_per_input", calls, True)]


def _finish(prog: Program, n: int, p: int, d: int, bounds, notes) -> BuiltProgram:
    prog = replace(prog, oracle=matpow_directive(n, p, d))
    return BuiltProgram(prog, oracle_function(prog.oracle), tuple(bounds), notes)


def build_matpow_small(n: int, p: int, d: int) -> BuiltProgram:
    if d >= p:
        raise FieldError(f"d = {d} must be below p = {p}; use the lifted builder")
    polys = matpow_poly(n, d, GF(p))
    prog = waring_program(polys, d, p, n * n, name=f"matpow_small_n{n}_d{d}")
    return _finish(prog, n, p, d, _bounds(4), {})


def lifted_modulus(n: int, p: int, d: int) -> int:
    return next_prime(max(p ** d * n ** (d - 1) + 1, d + 2))


def power_program(n: int, q: int, k: int, input_range: int) -> Program:
    """Exact M^k over F_q (q larger than every entry), via Waring forms."""
    if k == 1:
        return identity_program(n, q, input_range)
    polys = matpow_poly(n, k, GF(q))
    return waring_program(polys, k, q, n * n, input_range=input_range, name=f"pow{k}")


def identity_program(n: int, q: int, input_range: int) -> Program:
    N = n * n
    rows = [[int(i == j) for j in range(N)] for i in range(N)]
    return linear_program(rows, None, q, N, name="identity", input_range=input_range)


def build_matpow_lifted(n: int, p: int, d: int) -> BuiltProgram:
    q = lifted_modulus(n, p, d)
    prog = power_program(n, q, d, p)
    prog = replace(prog, name=f"matpow_lifted_n{n}_d{d}", readout=p)
    return _finish(prog, n, p, d, _bounds(4 if d > 1 else 1), {"q": q})


def boost_call_bound(d: int, delta: int, t: int = 4) -> float:
    L = ceil(log(d, delta) - 1e-12) if d > 1 else 0
    return (L + 2) * t / (t - 1) * t ** L


def product_polys(n: int, factors: int, field) -> list:
    """Entries of X_1 X_2 ... X_F, with X_f occupying variables f*n^2 .. (f+1)*n^2 - 1."""
    N = n * n
    total = factors * N

    def var(f, i, j):
        return SparsePoly.variable(f * N + i * n + j, total, field)
    cur = [[var(0, i, j) for j in range(n)] for i in range(n)]
    for f in range(1, factors):
        cur = [[sum((cur[i][k] * var(f, k, j) for k in range(1, n)), cur[i][0] * var(f, 0, j))
                for j in range(n)] for i in range(n)]
    return [P for row in cur for P in row]


def build_matpow_boosted(n: int, p: int, d: int, delta: int) -> BuiltProgram:
    plan = BoostPlan.for_power(d, delta)
    used = [(i, a) for i, a in enumerate(plan.digits) if a]
    F = len(used)
    Q = next_prime(max(p ** d * n ** (d - 1) + 1, F + 2, p + 1, delta + 2))
    base = {}

    def B(k):
        if k not in base:
            base[k] = power_program(n, Q, k, p)
        return base[k]

    factors = []
    for i, a in used:
        prog = None
        for _ in range(i):
            prog = B(delta) if prog is None else compose(B(delta), prog)
        if a > 1 or prog is None:
            prog = B(a) if prog is None else compose(B(a), prog)
        factors.append(prog)
    if F == 1:
        prog = factors[0]
    else:
        stage = parallel(factors, name="factors")
        product = interpolation_program(product_polys(n, F, GF(Q)), Q, F * n * n,
                                        input_range=p, name="product")
        prog = compose(product, stage)
    prog = replace(prog, name=f"matpow_boosted_n{n}_d{d}_delta{delta}", readout=p)
    bound = boost_call_bound(d, delta)
    # per-factor register count; the single output register becomes n^2 of them
    r = max(f.resources().total_registers for f in factors)
    notes = {"Q": Q, "digits": plan.digits, "L": plan.L, "call_bound": bound,
             "factor_registers": r,
             "register_bound": n * n + r * (plan.L + 1),
             "epsilon": 3 / log(delta, 2)}
    return _finish(prog, n, p, d, [Bound("calls_per_input", floor(2 * bound), False)], notes)


__all__ = [
    "BoostPlan", "BudgetError", "matpow_poly", "build_matpow_small", "build_matpow_lifted",
    "build_matpow_boosted", "boost_call_bound", "lifted_modulus", "product_polys",
]
