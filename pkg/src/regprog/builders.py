"""Compile polynomials and Boolean functions into clean register programs."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from math import comb
from typing import Callable, Sequence

from .field import FieldError, GF, next_prime
from .oracles import oracle_function, poly_directive, truth_directive
from .poly import (PolyError, SparsePoly, extraction_weights, interpolate_univariate,
                   waring_decompose)
from .rpir import (BasicUpdate, InputAccess, Program, RegisterBank, compose, parallel,
                   resources)


class BuildError(ValueError):
    """Builder preconditions failed (usage error)."""


@dataclass(frozen=True)
class Bound:
    name: str
    value: int
    exact: bool


# how each bound name is measured on a resource profile
MEASURES: dict = {
    "calls_per_input": lambda prof: prof.max_calls,
    "registers": lambda prof: prof.total_registers,
    "basic_instructions": lambda prof: prof.basic_instructions,
}


@dataclass
class BuiltProgram:
    program: Program
    oracle: Callable
    bounds: tuple = ()
    notes: dict = field(default_factory=dict)

    @property
    def profile(self):
        return resources(self.program)

    def check_bounds(self) -> list:
        """``[(name, bound, measured, exact, ok), ...]``."""
        prof = self.profile
        rows = []
        for b in self.bounds:
            got = MEASURES[b.name](prof)
            ok = got == b.value if b.exact else got <= b.value
            rows.append((b.name, b.value, got, b.exact, ok))
        return rows


def _built(program: Program, bounds=(), notes=None) -> BuiltProgram:
    return BuiltProgram(program, oracle_function(program.oracle), tuple(bounds), notes or {})


def _as_field_poly(P: SparsePoly, p: int) -> SparsePoly:
    return P.with_field(GF(p))


# -- primitive programs ---------------------------------------------------------

def linear_program(rows: Sequence[Sequence[int]], constants: Sequence[int] | None, p: int,
                   num_inputs: int, name: str = "linear",
                   input_range: int | None = None) -> Program:
    """Output k receives ``sum_j rows[k][j] x_j + constants[k]`` with one access per input."""
    ell = len(rows)
    constants = list(constants or [0] * ell)
    F = GF(p)
    body = []
    for j in range(num_inputs):
        pairs = tuple((k, rows[k][j] % p) for k in range(ell) if rows[k][j] % p)
        if pairs:
            body.append(InputAccess(j, 0, pairs))
    for k, c in enumerate(constants):
        if c % p:
            body.append(BasicUpdate(0, ((k, 1),), SparsePoly.constant(c % p, ell, F)))
    return Program(name, (RegisterBank("R", p, max(ell, 1)),), num_inputs, 0, tuple(body),
                   tuple((0, k) for k in range(ell)), input_range=input_range)


def _fig1_payloads(coeffs: Sequence[int], n: int, size: int, p: int):
    """Payloads for the compute and uncompute output updates of the univariate program.

    Register 0 holds the input copy, register j (1..n) its j-th power offset.
    """
    first: dict = {}
    second: dict = {}
    for i, a in enumerate(coeffs):
        if a % p == 0:
            continue
        for j in range(0, i + 1):
            c = a * comb(i, j) * (-1) ** (i - j) % p
            if c == 0:
                continue
            mono = []
            if i - j:
                mono.append((0, i - j))
            if j:
                mono.append((j, 1))
            mono = tuple(mono)
            first[mono] = (first.get(mono, 0) + c) % p
            if j:
                second[mono] = (second.get(mono, 0) + c) % p
    F = GF(p)
    return SparsePoly(first, size, F), SparsePoly(second, size, F)


def univariate_set_program(polys: Sequence[SparsePoly], p: int, name: str = "univariate",
                           input_range: int | None = None) -> Program:
    if not polys:
        raise BuildError("need at least one polynomial")
    coeff_lists = []
    for P in polys:
        if P.num_vars > 1 and any(v > 0 for v in P.variables()):
            raise BuildError("polynomial must be univariate in x1")
        coeff_lists.append([c % p for c in (P.univariate_coeffs() or [0])])
    n = max(len(c) for c in coeff_lists) - 1
    ell = len(polys)
    size = n + 1 + ell
    F = GF(p)
    powers = [BasicUpdate(0, ((i, 1),), SparsePoly({((0, i),): 1}, size, F))
              for i in range(1, n + 1)]
    unpowers = [BasicUpdate(0, ((i, p - 1),), u.payload) for i, u in zip(range(1, n + 1), powers)]
    outs_first, outs_second = [], []
    for k, coeffs in enumerate(coeff_lists):
        first, second = _fig1_payloads(coeffs, n, size, p)
        out = n + 1 + k
        if not first.is_zero():
            outs_first.append(BasicUpdate(0, ((out, 1),), first))
        if not second.is_zero():
            outs_second.append(BasicUpdate(0, ((out, p - 1),), second))
    up = InputAccess(0, 0, ((0, 1),))
    down = InputAccess(0, 0, ((0, p - 1),))
    body = [up, *powers, down, *outs_first, up, *unpowers, down, *outs_second]
    return Program(name, (RegisterBank("R", p, size),), 1, 0, tuple(body),
                   tuple((0, n + 1 + k) for k in range(ell)), input_range=input_range)


def _as_univariate(P, p: int) -> SparsePoly:
    if isinstance(P, SparsePoly):
        return _as_field_poly(P, p)
    return SparsePoly.univariate([int(c) for c in P], GF(p))


def build_univariate(P, p: int) -> BuiltProgram:
    """Univariate ``P`` (SparsePoly or low-to-high coefficient list) over F_p."""
    P = _as_univariate(P, p)
    n = max(P.degree(), 0)
    prog = univariate_set_program([P], p, name=f"univariate_deg{n}")
    prog = replace(prog, oracle=poly_directive([P], p))
    return _built(prog, [Bound("calls_per_input", 4, True), Bound("registers", n + 2, True),
                         Bound("basic_instructions", 2 * n + 2, False)])


def build_univariate_set(polys: Sequence, p: int) -> BuiltProgram:
    if not polys:
        raise BuildError("need at least one polynomial")
    Ps = [_as_univariate(P, p) for P in polys]
    n = max(max(P.degree(), 0) for P in Ps)
    ell = len(Ps)
    prog = univariate_set_program(Ps, p, name=f"univariate_set_deg{n}_x{ell}")
    prog = replace(prog, oracle=poly_directive(Ps, p))
    return _built(prog, [Bound("calls_per_input", 4, True),
                         Bound("registers", n + 1 + ell, True),
                         Bound("basic_instructions", 2 * n + 2 * ell, False)])


def constant_program(values: Sequence[int], p: int, num_inputs: int,
                     input_range: int | None = None) -> Program:
    return linear_program([[0] * num_inputs for _ in values], values, p, num_inputs,
                          name="constant", input_range=input_range)


# -- Waring --------------------------------------------------------------------

def waring_program(polys: Sequence[SparsePoly], degree: int, p: int, num_inputs: int,
                   input_range: int | None = None, name: str = "waring") -> Program:
    """Homogeneous degree-``degree`` polys as parallel power-of-linear-form gadgets.

    Forms with the same linear part share one gadget whose univariate stage
    has one output per polynomial that uses the form.
    """
    by_beta: dict = {}
    for k, P in enumerate(polys):
        P = _as_field_poly(P, p)
        if P.is_zero():
            continue
        dec = waring_decompose(P, degree)
        for alpha, betas in dec.forms:
            betas = tuple(betas) + (0,) * (num_inputs - len(betas))
            by_beta.setdefault(betas, {})[k] = alpha
    if not by_beta:
        return constant_program([0] * len(polys), p, num_inputs, input_range)
    F = GF(p)
    gadgets, out_map = [], []
    for betas, alphas in by_beta.items():
        ks = sorted(alphas)
        outer = univariate_set_program(
            [SparsePoly({((0, degree),): alphas[k]}, 1, F) for k in ks], p, name="power")
        inner = linear_program([list(betas)], None, p, num_inputs, name="form",
                               input_range=input_range)
        gadgets.append(compose(outer, inner))
        out_map.append(ks)
    return parallel(gadgets, out_map, len(polys), name=name)


def build_waring(P: SparsePoly, p: int | None = None) -> BuiltProgram:
    p = p or P.modulus
    if p is None:
        raise BuildError("field modulus required")
    P = _as_field_poly(P, p)
    if not P.is_homogeneous():
        raise BuildError("polynomial must be homogeneous")
    d = max(P.degree(), 0)
    if d >= p:
        raise FieldError(f"degree {d} must be below p = {p}")
    n = P.num_vars
    if d == 0:
        prog = constant_program([P.coefficient(())], p, n)
    else:
        prog = waring_program([P], d, p, n, name=f"waring_deg{d}")
    prog = replace(prog, oracle=poly_directive([P], p))
    return _built(prog, [Bound("calls_per_input", 4 if d else 0, True)])


def general_program(polys: Sequence[SparsePoly], p: int, num_inputs: int,
                    input_range: int | None = None, name: str = "general") -> Program:
    """Arbitrary polys over F_p: one Waring stage per degree, constants as updates."""
    polys = [_as_field_poly(P, p) for P in polys]
    degrees = sorted({d for P in polys for d in P.homogeneous_parts()})
    parts = []
    for d in degrees:
        chunk = [P.homogeneous_parts().get(d, SparsePoly.zero(num_inputs, GF(p)))
                 for P in polys]
        if d == 0:
            parts.append(constant_program([c.coefficient(()) for c in chunk], p, num_inputs,
                                          input_range))
        else:
            parts.append(waring_program(chunk, d, p, num_inputs, input_range))
    if not parts:
        return constant_program([0] * len(polys), p, num_inputs, input_range)
    ell = len(polys)
    return parallel(parts, [list(range(ell))] * len(parts), ell, name=name)


def lift_modulus(P_list: Sequence[SparsePoly], p: int) -> int:
    """Prime ``q`` large enough to hold every exact integer value on inputs in [0, p)."""
    n = max(P.num_vars for P in P_list)
    d = max(max(P.degree(), 0) for P in P_list)
    exact = max(sum((c % p) * (p - 1) ** sum(e for _, e in m) for m, c in P.terms.items())
                for P in P_list) + 1
    return next_prime(max(2 ** n * p ** (d + 1), exact, d + 2, p + 1))


def build_general(P, p: int, lift: bool = False) -> BuiltProgram:
    """``P`` (one SparsePoly or a list) over F_p; ``lift`` computes over a larger F_q."""
    polys = [P] if isinstance(P, SparsePoly) else list(P)
    n = max(Q.num_vars for Q in polys)
    reduced = [SparsePoly({m: c % p for m, c in Q.terms.items()}, n, GF(p)) for Q in polys]
    d = max(max(Q.degree(), 0) for Q in reduced)
    oracle = poly_directive(reduced, p)
    if not lift:
        if d >= p:
            raise FieldError(f"degree {d} needs lifting over F_{p}")
        prog = general_program(reduced, p, n, name=f"general_deg{d}")
        return _built(replace(prog, oracle=oracle),
                      [Bound("calls_per_input", 4 if d else 0, True)])
    q = lift_modulus(reduced, p)
    lifted = [SparsePoly(Q.terms, n, GF(q)) for Q in reduced]
    prog = general_program(lifted, q, n, input_range=p, name=f"general_deg{d}_lifted")
    prog = replace(prog, readout=p, oracle=oracle)
    return _built(prog, [Bound("calls_per_input", 4 if d else 0, True)], {"q": q})


# -- Boolean -------------------------------------------------------------------

def symmetric_program(truth: Sequence[int], p: int, inputs: Sequence[int], num_inputs: int,
                      scale: int = 1, name: str = "symmetric") -> Program:
    """``scale * g(sum of the chosen inputs)`` for 0/1 inputs, g given by its table."""
    m = len(inputs)
    if len(truth) != m + 1:
        raise BuildError(f"need {m + 1} table entries, got {len(truth)}")
    if p <= m:
        raise FieldError(f"p = {p} must exceed the number of summed inputs {m}")
    F = GF(p)
    g = interpolate_univariate([(F(k), F(scale * int(v))) for k, v in enumerate(truth)], F)
    outer = univariate_set_program([g], p, name="g")
    row = [0] * num_inputs
    for j in inputs:
        row[j] = 1
    inner = linear_program([row], None, p, num_inputs, name="sum", input_range=2)
    return compose(outer, inner, name=name)


def _check_truth(truth: Sequence[int]):
    if any(int(v) not in (0, 1) for v in truth):
        raise BuildError("truth vector entries must be bits")


def build_symmetric_bool(truth: Sequence[int], p: int) -> BuiltProgram:
    """``f(x) = g(x_1 + ... + x_n)`` with ``truth = (g(0), ..., g(n))``."""
    _check_truth(truth)
    n = len(truth) - 1
    if p <= n:
        raise FieldError(f"p = {p} must exceed n = {n}")
    prog = symmetric_program(truth, p, list(range(n)), n, name=f"symmetric_n{n}")
    table = [truth[sum(x)] for x in _bit_points(n)]
    prog = replace(prog, oracle=truth_directive(table))
    return _built(prog, [Bound("calls_per_input", 4 if n else 0, True)])


def _bit_points(n: int):
    # little-endian order: index = sum x_j 2^j, matching the truth directive
    return [tuple((i >> j) & 1 for j in range(n)) for i in range(1 << n)]


def _truth(value) -> bool:
    if isinstance(value, (list, tuple)):
        value = value[0]
    return bool(value)


def represent_check(P: SparsePoly, p: int, f: Callable | None = None, limit: int = 12) -> bool:
    """On {0,1}^n: (P mod p != 0) iff (P != 0), and iff f when given."""
    n = P.num_vars
    if n > limit:
        return True
    for x in _bit_points(n):
        v = P(x)
        if (v % p != 0) != (v != 0):
            return False
        if f is not None and _truth(f(x)) != (v != 0):
            return False
    return True


def sum_program(P: SparsePoly, p: int, num_inputs: int, name: str = "terms") -> Program:
    """``P mod p`` on 0/1 inputs, one symmetric gadget per nonlinear term."""
    linear_row = [0] * num_inputs
    constant = 0
    gadgets = []
    for mono, c in P.sorted_terms():
        support = sorted(v for v, _ in mono)
        if not support:
            constant += c
        elif len(support) == 1:
            linear_row[support[0]] += c
        else:
            m = len(support)
            table = [0] * m + [1]
            gadgets.append(symmetric_program(table, p, support, num_inputs, scale=c % p))
    parts = [linear_program([linear_row], [constant], p, num_inputs, name="linear",
                            input_range=2)] + gadgets
    return parallel(parts, [[0]] * len(parts), 1, name=name)


def nonzero_program(p: int, mode: str = "digits", values: Sequence[int] | None = None
                    ) -> Program:
    """One input v in F_p; output ``[v != 0]``.

    ``digits``: OR over the binary digits of v, each digit a univariate
    indicator (4 x 4 calls).  ``direct``: the degree p-1 indicator itself
    (4 calls); ``values`` restricts interpolation to the attainable values.
    """
    F = GF(p)
    if mode == "direct":
        pts = sorted(set(values)) if values is not None else list(range(p))
        if pts == [0]:
            return constant_program([0], p, 1)
        g = interpolate_univariate([(F(v), F(int(v != 0))) for v in pts], F)
        return univariate_set_program([g], p, name="nonzero")
    if mode != "digits":
        raise BuildError(f"unknown nonzero mode {mode!r}")
    L = max((p - 1).bit_length(), 1)
    if p <= L:
        raise FieldError(f"p = {p} too small for a {L}-input OR")
    bits = [interpolate_univariate([(F(v), F((v >> i) & 1)) for v in range(p)], F)
            for i in range(L)]
    digit = univariate_set_program(bits, p, name="digits")
    or_gate = symmetric_program([0] + [1] * L, p, list(range(L)), L, name="or")
    return compose(or_gate, digit, name="nonzero")


def bool_rep_program(P: SparsePoly, p: int, mode: str = "digits",
                     name: str = "bool_rep") -> Program:
    n = P.num_vars
    terms = sum_program(P, p, n)
    values = None
    if mode == "direct":
        values = sorted({P(x) % p for x in _bit_points(n)}) if n <= 12 else None
        if values is not None and len(P.terms) == 1:
            values = sorted(set(values) | {0})
    tail = nonzero_program(p, mode, values)
    return compose(tail, terms, name=name)


def build_bool_rep(P: SparsePoly, p: int | None = None, nonzero: str = "digits",
                   f: Callable | None = None) -> BuiltProgram:
    """Boolean ``f`` from an integer polynomial ``P`` that represents it."""
    if P.field is not None:
        raise BuildError("representation polynomial must have integer coefficients")
    n = P.num_vars
    d = max(P.degree(), 0)
    t = max(len(P.terms), 1)
    if p is None:
        p = next_prime(max(d, t, sum(abs(c) for c in P.terms.values())) + 1)
    if p <= max(d, t):
        raise FieldError(f"p = {p} must exceed max(d, t) = {max(d, t)}")
    if not represent_check(P, p, f):
        raise BuildError(f"polynomial does not represent the function over F_{p}")
    prog = bool_rep_program(P, p, nonzero, name=f"bool_rep_n{n}")
    if n <= 20:
        table = [int(P(x) != 0) for x in _bit_points(n)]
        prog = replace(prog, oracle=truth_directive(table))
    bound = 64 if nonzero == "digits" else 16
    return _built(prog, [Bound("calls_per_input", bound, False)], {"p": p})


# -- interpolation -------------------------------------------------------------

def interpolation_program(polys: Sequence[SparsePoly], p: int, num_inputs: int,
                          input_range: int | None = None, name: str = "interp") -> Program:
    polys = [_as_field_poly(P, p) for P in polys]
    d = max(max(P.degree(), 0) for P in polys)
    if d + 2 > p:
        raise FieldError(f"need d + 2 <= p (d = {d}, p = {p})")
    n = num_inputs
    homog = all(P.is_zero() or (P.is_homogeneous() and P.degree() == d) for P in polys)
    z = None if homog else n
    base = n + (0 if homog else 1)
    size = base + len(polys)
    F = GF(p)
    payloads = []
    for P in polys:
        H = P if homog else P.homogenize(z, d)
        payloads.append(SparsePoly(H.terms, size, F))
    lambdas = [k + 1 for k in range(d + 1)]
    weights = [int(c) for c in extraction_weights([F(v) for v in lambdas], d, F)]
    body = []

    def shift(delta):
        for j in range(n):
            body.append(InputAccess(j, 0, ((j, delta % p),)))
        if z is not None:
            body.append(BasicUpdate(0, ((z, 1),), SparsePoly.constant(delta % p, size, F)))

    prev = 0
    for lam, c in zip(lambdas, weights):
        shift(lam - prev)
        prev = lam
        for k, H in enumerate(payloads):
            if not H.is_zero():
                body.append(BasicUpdate(0, ((base + k, c),), H))
    shift(-prev)
    return Program(name, (RegisterBank("R", p, size),), n, 0, tuple(body),
                   tuple((0, base + k) for k in range(len(polys))), input_range=input_range)


def build_interpolation_eval(P, p: int) -> BuiltProgram:
    polys = [P] if isinstance(P, SparsePoly) else list(P)
    n = max(Q.num_vars for Q in polys)
    polys = [SparsePoly(Q.terms, n, GF(p)) for Q in polys]
    d = max(max(Q.degree(), 0) for Q in polys)
    prog = interpolation_program(polys, p, n, name=f"interp_deg{d}")
    prog = replace(prog, oracle=poly_directive(polys, p))
    return _built(prog, [Bound("calls_per_input", d + 2 if n else 0, True)], {"d": d})


__all__ = [
    "BuildError", "Bound", "BuiltProgram", "build_univariate", "build_univariate_set",
    "build_waring", "build_general", "build_symmetric_bool", "build_bool_rep",
    "build_interpolation_eval", "linear_program", "univariate_set_program", "waring_program",
    "general_program", "interpolation_program", "symmetric_program", "nonzero_program",
    "bool_rep_program", "lift_modulus", "represent_check",
]
