"""Prime-field arithmetic.

Register values, payload coefficients and delivery scales are all residues
modulo a prime.  Internally the rest of the package works on plain ``int``
residues for speed; :class:`FieldElement` is the checked value type used at
API boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

MAX_MODULUS = 1 << 80

# Deterministic Miller-Rabin: these bases are exact for n < 3.3e24 > 2^81.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


class FieldError(ValueError):
    """Raised on domain errors (inverse of zero, bad modulus)."""


class CapacityError(FieldError):
    """A modulus would exceed MAX_MODULUS."""


class FieldMismatchError(TypeError):
    """Operands live in different fields."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    if n >= MAX_MODULUS * 2:
        raise CapacityError(f"{n} is outside the supported range (< 2^81)")
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(lower_bound: int) -> int:
    """Smallest prime >= ``lower_bound``."""
    if lower_bound < 2:
        raise FieldError("lower_bound must be >= 2")
    n = lower_bound
    if n > 2 and n % 2 == 0:
        n += 1
    while not is_prime(n):
        n += 1 if n == 2 else 2
        if n > MAX_MODULUS:
            raise CapacityError(f"no prime <= 2^80 above {lower_bound}")
    if n > MAX_MODULUS:
        raise CapacityError(f"prime {n} exceeds 2^80")
    return n


@dataclass(frozen=True)
class PrimeField:
    modulus: int

    def __post_init__(self):
        if not isinstance(self.modulus, int) or self.modulus < 2:
            raise FieldError(f"bad modulus {self.modulus!r}")
        if self.modulus > MAX_MODULUS:
            raise CapacityError(f"modulus {self.modulus} exceeds 2^80")
        if not is_prime(self.modulus):
            raise FieldError(f"modulus {self.modulus} is not prime")

    def __call__(self, value: int) -> "FieldElement":
        return FieldElement(value % self.modulus, self)

    def __repr__(self) -> str:
        return f"GF({self.modulus})"

    @property
    def zero(self) -> "FieldElement":
        return self(0)

    @property
    def one(self) -> "FieldElement":
        return self(1)

    def inv(self, value: int) -> int:
        value %= self.modulus
        if value == 0:
            raise FieldError("inverse of zero")
        return pow(value, -1, self.modulus)

    def elements(self):
        return (FieldElement(v, self) for v in range(self.modulus))


@dataclass(frozen=True)
class FieldElement:
    value: int
    field: PrimeField

    def __post_init__(self):
        if not 0 <= self.value < self.field.modulus:
            raise FieldError(f"{self.value} is not reduced mod {self.field.modulus}")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.field.modulus != self.field.modulus:
                raise FieldMismatchError(f"{self.field} vs {other.field}")
            return other.value
        if isinstance(other, int):
            return other % self.field.modulus
        raise TypeError(f"cannot combine FieldElement with {type(other).__name__}")

    def __add__(self, other):
        o = self._coerce(other)
        return self.field(self.value + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return self.field(self.value - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        return self.field(o - self.value)

    def __mul__(self, other):
        o = self._coerce(other)
        return self.field(self.value * o)

    __rmul__ = __mul__

    def __neg__(self):
        return self.field(-self.value)

    def __truediv__(self, other):
        return self * self._coerce_inverse(other)

    def _coerce_inverse(self, other) -> int:
        return self.field.inv(self._coerce(other))

    def __pow__(self, exponent: int):
        if exponent < 0:
            return self.inverse() ** (-exponent)
        return self.field(pow(self.value, exponent, self.field.modulus))

    def inverse(self) -> "FieldElement":
        return self.field(self.field.inv(self.value))

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.field.modulus == other.field.modulus and self.value == other.value
        if isinstance(other, int):
            return self.value == other % self.field.modulus
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.field.modulus))

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value} (mod {self.field.modulus})"


@lru_cache(maxsize=None)
def GF(modulus: int) -> PrimeField:
    """Cached PrimeField constructor (primality is checked once per modulus)."""
    return PrimeField(modulus)


def field_op(kind: str, a: FieldElement, b=None) -> FieldElement:
    """Dispatch one of add/sub/mul/neg/inv/pow on field elements."""
    if kind == "add":
        return a + _same_field(a, b)
    if kind == "sub":
        return a - _same_field(a, b)
    if kind == "mul":
        return a * _same_field(a, b)
    if kind == "neg":
        return -a
    if kind == "inv":
        return a.inverse()
    if kind == "pow":
        if not isinstance(b, int) or b < 0:
            raise FieldError("pow exponent must be a non-negative integer")
        return a ** b
    raise ValueError(f"unknown field op {kind!r}")


def _same_field(a: FieldElement, b) -> FieldElement:
    if not isinstance(b, FieldElement):
        raise FieldMismatchError("second operand must be a FieldElement")
    if a.field.modulus != b.field.modulus:
        raise FieldMismatchError(f"{a.field} vs {b.field}")
    return b
