"""Sparse multivariate polynomials over a prime field (or over the integers).

A monomial is a tuple of ``(variable, exponent)`` pairs sorted by variable,
with every exponent positive; the constant monomial is ``()``.  Coefficients
are plain ints, reduced mod p when the polynomial carries a field.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import product as _cartesian
from math import comb, factorial
from typing import Callable, Iterable, Mapping, Sequence

from .field import FieldElement, FieldError, GF, PrimeField

Monomial = tuple

_SENTINEL = (1 << 62, 0)


class PolyError(ValueError):
    pass


class PolyParseError(PolyError):
    def __init__(self, message: str, column: int):
        super().__init__(f"column {column}: {message}")
        self.column = column


def monomial_key(mono: Monomial):
    """Sort key giving lexicographic order on exponent vectors, largest first."""
    return tuple((v, -e) for v, e in mono) + (_SENTINEL,)


def mono_degree(mono: Monomial) -> int:
    return sum(e for _, e in mono)


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    exps = dict(a)
    for v, e in b:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted(exps.items()))


class SparsePoly:
    """Immutable sparse polynomial.

    ``field`` is a :class:`PrimeField` or ``None`` for integer coefficients.
    """

    __slots__ = ("field", "num_vars", "terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, int], num_vars: int,
                 field: PrimeField | None = None):
        p = field.modulus if field is not None else None
        clean = {}
        for mono, c in terms.items():
            if p is not None:
                c %= p
            if c == 0:
                continue
            for v, e in mono:
                if e <= 0 or not 0 <= v < num_vars:
                    raise PolyError(f"bad monomial {mono!r} for {num_vars} variables")
            clean[mono] = c
        self.field = field
        self.num_vars = num_vars
        self.terms = clean
        self._hash = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, num_vars: int, field: PrimeField | None = None) -> "SparsePoly":
        return cls({}, num_vars, field)

    @classmethod
    def constant(cls, c: int, num_vars: int, field: PrimeField | None = None) -> "SparsePoly":
        return cls({(): int(c)}, num_vars, field)

    @classmethod
    def variable(cls, i: int, num_vars: int, field: PrimeField | None = None,
                 coeff: int = 1) -> "SparsePoly":
        return cls({((i, 1),): coeff}, num_vars, field)

    @classmethod
    def linear(cls, coeffs: Sequence[int], field: PrimeField | None = None) -> "SparsePoly":
        return cls({((i, 1),): c for i, c in enumerate(coeffs)}, len(coeffs), field)

    @classmethod
    def univariate(cls, coeffs: Sequence[int], field: PrimeField | None = None) -> "SparsePoly":
        """``coeffs[i]`` is the coefficient of X^i."""
        terms = {(((0, i),) if i else ()): c for i, c in enumerate(coeffs)}
        return cls(terms, 1, field)

    # -- basic properties ---------------------------------------------------
    @property
    def modulus(self) -> int | None:
        return self.field.modulus if self.field is not None else None

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((mono_degree(m) for m in self.terms), default=-1)

    def num_terms(self) -> int:
        return len(self.terms)

    def coeff_sum(self) -> int:
        return sum(self.terms.values())

    def variables(self) -> set:
        return {v for m in self.terms for v, _ in m}

    def is_homogeneous(self) -> bool:
        return len({mono_degree(m) for m in self.terms}) <= 1

    def coefficient(self, mono: Monomial) -> int:
        return self.terms.get(tuple(mono), 0)

    def univariate_coeffs(self) -> list:
        if self.num_vars != 1:
            raise PolyError("not univariate")
        out = [0] * (self.degree() + 1)
        for m, c in self.terms.items():
            out[m[0][1] if m else 0] = c
        return out

    def sorted_terms(self) -> list:
        return sorted(self.terms.items(), key=lambda t: monomial_key(t[0]))

    # -- arithmetic ---------------------------------------------------------
    def _check(self, other: "SparsePoly"):
        if self.modulus != other.modulus:
            raise PolyError(f"field mismatch: {self.field} vs {other.field}")

    def _lift(self, other) -> "SparsePoly":
        if isinstance(other, SparsePoly):
            self._check(other)
            return other
        if isinstance(other, FieldElement):
            other = other.value
        if isinstance(other, int):
            return SparsePoly.constant(other, self.num_vars, self.field)
        raise TypeError(f"cannot combine SparsePoly with {type(other).__name__}")

    def __add__(self, other) -> "SparsePoly":
        other = self._lift(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms.get(m, 0) + c
        return SparsePoly(terms, max(self.num_vars, other.num_vars), self.field)

    __radd__ = __add__

    def __neg__(self) -> "SparsePoly":
        return SparsePoly({m: -c for m, c in self.terms.items()}, self.num_vars, self.field)

    def __sub__(self, other) -> "SparsePoly":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "SparsePoly":
        return self._lift(other) - self

    def __mul__(self, other) -> "SparsePoly":
        if isinstance(other, FieldElement):
            other = other.value
        if isinstance(other, int):
            return SparsePoly({m: c * other for m, c in self.terms.items()},
                              self.num_vars, self.field)
        other = self._lift(other)
        terms: dict = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = mono_mul(ma, mb)
                terms[m] = terms.get(m, 0) + ca * cb
        return SparsePoly(terms, max(self.num_vars, other.num_vars), self.field)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "SparsePoly":
        if k < 0:
            raise PolyError("negative power")
        result = SparsePoly.constant(1, self.num_vars, self.field)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return (self.modulus == other.modulus and self.num_vars == other.num_vars
                and self.terms == other.terms)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.modulus, self.num_vars, frozenset(self.terms.items())))
        return self._hash

    # -- evaluation ---------------------------------------------------------
    def __call__(self, point: Sequence) -> int:
        """Evaluate at integer (or FieldElement) coordinates; returns an int."""
        if len(point) != self.num_vars:
            raise PolyError(f"expected {self.num_vars} coordinates, got {len(point)}")
        xs = [int(v) for v in point]
        p = self.modulus
        total = 0
        for mono, c in self.terms.items():
            term = c
            for v, e in mono:
                term *= pow(xs[v], e, p) if p else xs[v] ** e
            total += term
        return total % p if p else total

    # -- transformations ----------------------------------------------------
    def homogeneous_parts(self) -> dict:
        """Map degree -> homogeneous part, omitting empty parts."""
        buckets: dict = {}
        for m, c in self.terms.items():
            buckets.setdefault(mono_degree(m), {})[m] = c
        return {d: SparsePoly(t, self.num_vars, self.field) for d, t in sorted(buckets.items())}

    def with_field(self, field: PrimeField | None) -> "SparsePoly":
        return SparsePoly(self.terms, self.num_vars, field)

    def rename(self, mapping: Mapping[int, int] | Callable[[int], int],
               num_vars: int) -> "SparsePoly":
        """Substitute variable ``v`` by variable ``mapping[v]``."""
        f = mapping if callable(mapping) else mapping.__getitem__
        terms: dict = {}
        for m, c in self.terms.items():
            exps: dict = {}
            for v, e in m:
                w = f(v)
                exps[w] = exps.get(w, 0) + e
            key = tuple(sorted(exps.items()))
            terms[key] = terms.get(key, 0) + c
        return SparsePoly(terms, num_vars, self.field)

    def homogenize(self, aux_var: int, degree: int | None = None) -> "SparsePoly":
        """Pad every term with powers of ``aux_var`` up to ``degree``."""
        d = self.degree() if degree is None else degree
        terms = {}
        for m, c in self.terms.items():
            pad = d - mono_degree(m)
            if pad < 0:
                raise PolyError("degree below polynomial degree")
            terms[mono_mul(m, ((aux_var, pad),)) if pad else m] = c
        return SparsePoly(terms, max(self.num_vars, aux_var + 1), self.field)

    # -- text ---------------------------------------------------------------
    def render(self, var_name: Callable[[int], str] | None = None) -> str:
        name = var_name or (lambda i: f"x{i + 1}")
        if not self.terms:
            return "0"
        parts = []
        for mono, c in self.sorted_terms():
            factors = [name(v) if e == 1 else f"{name(v)}^{e}" for v, e in mono]
            if c != 1 or not factors:
                factors.insert(0, str(c))
            parts.append("*".join(factors))
        return " + ".join(parts)

    def __str__(self):
        return self.render()

    def __repr__(self):
        return f"SparsePoly({self.render()!r}, num_vars={self.num_vars}, field={self.field})"


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|(x(\d+))|([A-Za-z_]\w*)\[(\d+)\]|(\^|\*|\+|-))")


def parse_poly(text: str, num_vars: int | None = None, field: PrimeField | None = None,
               bank: str | None = None, column_offset: int = 0) -> SparsePoly:
    """Parse ``3*x1^2*x2 + 4`` (or ``R[0]*R[2]`` when ``bank`` is given).

    Variables ``x<i>`` are 1-based; bank registers ``name[i]`` are 0-based.
    With ``num_vars=None`` the arity is the largest variable seen.
    """
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PolyParseError(f"unexpected character {text[pos]!r}", pos + 1 + column_offset)
        col = m.start(0) + len(m.group(0)) - len(m.group(0).lstrip()) + 1 + column_offset
        if m.group(1) is not None:
            tokens.append(("num", int(m.group(1)), col))
        elif m.group(2) is not None:
            if bank is not None:
                raise PolyParseError(f"expected {bank}[i], got {m.group(2)}", col)
            idx = int(m.group(3))
            if idx < 1:
                raise PolyParseError("variables are 1-based", col)
            tokens.append(("var", idx - 1, col))
        elif m.group(4) is not None:
            if bank is None or m.group(4) != bank:
                raise PolyParseError(f"unknown register bank {m.group(4)!r}", col)
            tokens.append(("var", int(m.group(5)), col))
        else:
            tokens.append(("op", m.group(6), col))
        pos = m.end()
    if not tokens:
        raise PolyParseError("empty polynomial", 1 + column_offset)

    terms: dict = {}
    i = 0
    max_var = -1

    def expect_number():
        nonlocal i
        if i >= len(tokens) or tokens[i][0] != "num":
            col = tokens[i][2] if i < len(tokens) else len(text) + 1 + column_offset
            raise PolyParseError("expected a number", col)
        i += 1
        return tokens[i - 1][1]

    while i < len(tokens):
        sign = 1
        if tokens[i][0] == "op" and tokens[i][1] in "+-":
            if tokens[i][1] == "-":
                sign = -1
            i += 1
        elif terms or i:
            raise PolyParseError("expected '+' or '-'", tokens[i][2])
        coeff = sign
        exps: dict = {}
        while True:
            if i >= len(tokens):
                raise PolyParseError("dangling operator", len(text) + 1 + column_offset)
            kind, val, col = tokens[i]
            if kind == "num":
                coeff *= val
                i += 1
            elif kind == "var":
                i += 1
                e = 1
                if i < len(tokens) and tokens[i][:2] == ("op", "^"):
                    i += 1
                    e = expect_number()
                if e:
                    exps[val] = exps.get(val, 0) + e
                max_var = max(max_var, val)
            else:
                raise PolyParseError(f"unexpected {val!r}", col)
            if i < len(tokens) and tokens[i][:2] == ("op", "*"):
                i += 1
                continue
            break
        mono = tuple(sorted(exps.items()))
        terms[mono] = terms.get(mono, 0) + coeff
        if i < len(tokens) and not (tokens[i][0] == "op" and tokens[i][1] in "+-"):
            raise PolyParseError(f"unexpected {tokens[i][1]!r}", tokens[i][2])
    n = max_var + 1 if num_vars is None else num_vars
    if max_var >= n:
        raise PolyError(f"variable index {max_var + 1} exceeds arity {n}")
    return SparsePoly(terms, n, field)


# -- decomposition ------------------------------------------------------------

@dataclass
class LinearFormDecomposition:
    """``sum_i alpha_i * (sum_j beta_ij x_j)^degree`` over ``field``."""

    field: PrimeField
    num_vars: int
    degree: int
    forms: list  # [(alpha: int, betas: tuple[int, ...])]

    def __len__(self):
        return len(self.forms)

    def expand(self) -> SparsePoly:
        total = SparsePoly.zero(self.num_vars, self.field)
        for alpha, betas in self.forms:
            form = SparsePoly.linear(list(betas), self.field)
            total = total + (form ** self.degree) * alpha
        return total

    def __call__(self, point: Sequence[int]) -> int:
        p = self.field.modulus
        return sum(a * pow(sum(b * int(x) for b, x in zip(betas, point)), self.degree, p)
                   for a, betas in self.forms) % p


def _normalize_form(alpha: int, betas: tuple, degree: int, p: int):
    lead = next((b for b in betas if b), 0)
    if lead == 0:
        return None
    inv = pow(lead, -1, p)
    return (alpha * pow(lead, degree, p)) % p, tuple(b * inv % p for b in betas)


def polarization_forms(mono: Monomial, coeff: int, num_vars: int, p: int) -> list:
    """Forms for ``coeff * mono`` via the polarization identity with multiplicities."""
    d = mono_degree(mono)
    if d == 0:
        raise PolyError("constant monomial has no degree-d form decomposition")
    if d >= p:
        raise FieldError(f"degree {d} must be below the field size {p}")
    if len(mono) == 1:
        betas = [0] * num_vars
        betas[mono[0][0]] = 1
        return [(coeff % p, tuple(betas))]
    scale = coeff * pow(factorial(d), -1, p) % p
    out = []
    ranges = [range(e + 1) for _, e in mono]
    for ks in _cartesian(*ranges):
        size = sum(ks)
        if size == 0:
            continue
        weight = 1
        for (_, e), k in zip(mono, ks):
            weight *= comb(e, k)
        if (d - size) % 2:
            weight = -weight
        betas = [0] * num_vars
        for (v, _), k in zip(mono, ks):
            betas[v] = k % p
        out.append((scale * weight % p, tuple(betas)))
    return out


def _collect(forms: Iterable, degree: int, p: int) -> list:
    acc: dict = {}
    for alpha, betas in forms:
        norm = _normalize_form(alpha, betas, degree, p)
        if norm is None:
            continue
        a, b = norm
        acc[b] = (acc.get(b, 0) + a) % p
    return [(a, b) for b, a in acc.items() if a]


def polarize_monomial(variables: Sequence[int], field: PrimeField,
                      num_vars: int | None = None) -> LinearFormDecomposition:
    """Decompose the product of distinct variables into 2^d - 1 powers of linear forms."""
    if len(set(variables)) != len(variables):
        raise PolyError("variables must be distinct")
    n = num_vars if num_vars is not None else max(variables) + 1
    mono = tuple(sorted((v, 1) for v in variables))
    forms = polarization_forms(mono, 1, n, field.modulus)
    return LinearFormDecomposition(field, n, len(variables), forms)


def waring_decompose(P: SparsePoly, degree: int | None = None) -> LinearFormDecomposition:
    """Per-monomial polarization of a homogeneous polynomial, merging repeated forms."""
    if P.field is None:
        raise PolyError("Waring decomposition needs a prime field")
    if not P.is_homogeneous():
        raise PolyError("polynomial is not homogeneous")
    d = P.degree() if degree is None else degree
    if not P.is_zero() and P.degree() != d:
        raise PolyError(f"polynomial has degree {P.degree()}, not {d}")
    p = P.modulus
    if d >= p:
        raise FieldError(f"degree {d} must be below the field size {p}")
    raw = []
    for mono, c in P.sorted_terms():
        raw.extend(polarization_forms(mono, c, P.num_vars, p))
    return LinearFormDecomposition(P.field, P.num_vars, d, _collect(raw, d, p))


def homogeneous_parts(P: SparsePoly) -> dict:
    return P.homogeneous_parts()


def evaluate(P: SparsePoly, point: Sequence) -> FieldElement | int:
    """Value of ``P`` at ``point``: a FieldElement over F_p, an int over Z."""
    if P.field is not None:
        for v in point:
            if isinstance(v, FieldElement) and v.field.modulus != P.modulus:
                raise PolyError("point lives in a different field")
        return P.field(P(point))
    return P(point)


# -- interpolation ------------------------------------------------------------

def _as_int(v) -> int:
    return v.value if isinstance(v, FieldElement) else int(v)


def interpolate_univariate(points: Sequence, field: PrimeField | None = None) -> SparsePoly:
    """Lagrange interpolation through ``(abscissa, ordinate)`` pairs."""
    if not points:
        raise PolyError("need at least one point")
    if field is None:
        field = points[0][0].field
    p = field.modulus
    xs = [_as_int(a) % p for a, _ in points]
    ys = [_as_int(b) % p for _, b in points]
    if len(set(xs)) != len(xs):
        raise PolyError("abscissae must be pairwise distinct")
    k = len(xs)
    coeffs = [0] * k
    for i in range(k):
        # basis numerator prod_{j != i} (X - x_j), built low-to-high
        num = [1]
        denom = 1
        for j in range(k):
            if j == i:
                continue
            num = [(-xs[j] * num[0]) % p] + [
                (num[t - 1] - xs[j] * (num[t] if t < len(num) else 0)) % p
                for t in range(1, len(num) + 1)]
            denom = denom * (xs[i] - xs[j]) % p
        scale = ys[i] * pow(denom, -1, p) % p
        for t, c in enumerate(num):
            coeffs[t] = (coeffs[t] + scale * c) % p
    return SparsePoly.univariate(coeffs, field)


def _weights(lambdas: Sequence[int], p: int) -> list:
    out = []
    for k, lk in enumerate(lambdas):
        denom = 1
        for m, lm in enumerate(lambdas):
            if m != k:
                denom = denom * (lk - lm) % p
        out.append(pow(denom, -1, p))
    return out


def extraction_weights(lambdas: Sequence, target_degree: int,
                       field: PrimeField | None = None) -> list:
    """Weights c with sum_k c_k * lambda_k^j == [j == target_degree] for j <= target_degree."""
    if field is None:
        field = lambdas[0].field
    p = field.modulus
    lams = [_as_int(v) % p for v in lambdas]
    if len(lams) != target_degree + 1:
        raise PolyError(f"need exactly {target_degree + 1} evaluation points")
    if len(set(lams)) != len(lams) or 0 in lams:
        raise PolyError("evaluation points must be distinct and nonzero")
    return [field(c) for c in _weights(lams, p)]


__all__ = [
    "SparsePoly", "LinearFormDecomposition", "PolyError", "PolyParseError", "parse_poly",
    "evaluate", "homogeneous_parts", "polarize_monomial", "waring_decompose",
    "interpolate_univariate", "extraction_weights", "monomial_key", "GF",
]
