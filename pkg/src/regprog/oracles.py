"""Reference functions attached to programs by a one-line directive.

Directive forms::

    poly mod=<m> vars=<n> : <P1> ; <P2> ; ...
    truth : <bits>                      # bit i is f(x) with i = sum x_j 2^(j-1)
    matpow n=<n> p=<p> d=<d>            # entries of A^d, row-major
    circuit : <netlist>
    neg <directive>                     # negation, attached by program inversion

Each decodes to a callable ``x -> list[int]`` that is independent of any
register program.
"""
from __future__ import annotations

from typing import Callable, Sequence

from .poly import SparsePoly, parse_poly


class OracleError(ValueError):
    pass


def poly_directive(polys: Sequence[SparsePoly], modulus: int) -> str:
    n = max(P.num_vars for P in polys)
    return f"poly mod={modulus} vars={n} : " + " ; ".join(P.render() for P in polys)


def truth_directive(table: Sequence[int]) -> str:
    return "truth : " + "".join(str(int(b)) for b in table)


def matpow_directive(n: int, p: int, d: int) -> str:
    return f"matpow n={n} p={p} d={d}"


def _options(head: str) -> dict:
    out = {}
    for tok in head.split()[1:]:
        k, eq, v = tok.partition("=")
        if not eq or not v.isdigit():
            raise OracleError(f"bad oracle option {tok!r}")
        out[k] = int(v)
    return out


def mat_mul(A, B, p: int):
    n = len(A)
    return [[sum(A[i][k] * B[k][j] for k in range(n)) % p for j in range(n)] for i in range(n)]


def mat_pow(A, d: int, p: int):
    """``A^d mod p`` by repeated squaring."""
    n = len(A)
    result = [[int(i == j) for j in range(n)] for i in range(n)]
    base = [[v % p for v in row] for row in A]
    while d:
        if d & 1:
            result = mat_mul(result, base, p)
        base = mat_mul(base, base, p)
        d >>= 1
    return result


def oracle_function(directive: str) -> Callable[[Sequence[int]], list]:
    if directive.startswith("neg "):
        inner = oracle_function(directive[4:])
        return lambda x: [-v for v in inner(x)]
    head, _, body = directive.partition(":")
    kind = head.split()[0] if head.split() else ""
    if kind == "poly":
        opts = _options(head)
        m, n = opts.get("mod"), opts.get("vars")
        if m is None or n is None:
            raise OracleError("poly oracle needs mod= and vars=")
        polys = [parse_poly(s, num_vars=n) for s in body.split(";")]
        return lambda x: [P(x) % m for P in polys]
    if kind == "truth":
        bits = body.strip()
        if set(bits) - {"0", "1"}:
            raise OracleError("truth table must be a 0/1 string")

        def table(x):
            return [int(bits[sum(int(v) << i for i, v in enumerate(x))])]
        return table
    if kind == "matpow":
        opts = _options(head)
        n, p, d = opts["n"], opts["p"], opts["d"]

        def power(x):
            A = [list(x[i * n:(i + 1) * n]) for i in range(n)]
            return [v for row in mat_pow(A, d, p) for v in row]
        return power
    if kind == "circuit":
        from .circuits import eval_circuit, parse_netlist
        C = parse_netlist(body)
        return lambda x: [int(eval_circuit(C, x))]
    raise OracleError(f"unknown oracle kind {kind!r}")
