"""Clean register programs over prime fields: build, run, invert, compose, verify."""
from .field import GF, FieldElement, PrimeField, is_prime, next_prime
from .poly import SparsePoly, parse_poly, waring_decompose
from .rpir import (BasicUpdate, InputAccess, Program, RegisterBank, RegisterState,
                   ResourceProfile, compose, execute, invert, parallel, parse, resources,
                   serialize, verify_clean)

__version__ = "0.1.0"

__all__ = [
    "GF", "FieldElement", "PrimeField", "is_prime", "next_prime", "SparsePoly", "parse_poly",
    "waring_decompose", "BasicUpdate", "InputAccess", "Program", "RegisterBank",
    "RegisterState", "ResourceProfile", "compose", "execute", "invert", "parallel", "parse",
    "resources", "serialize", "verify_clean",
]
