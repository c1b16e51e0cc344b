"""SAC circuits: fan-in-2 AND, unbounded OR, over literals x_i and !x_i."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from math import ceil
from typing import Sequence

import numpy as np

from .builders import (Bound, BuildError, BuiltProgram, linear_program, nonzero_program,
                       sum_program)
from .field import FieldError, next_prime
from .oracles import oracle_function
from .poly import SparsePoly
from .rpir import Program, compose, parallel


class NetlistError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


# A node reference is ("x", i, negated) for literal x_{i+1}, or ("g", index).

@dataclass(frozen=True)
class Gate:
    name: str
    op: str  # "AND" | "OR"
    children: tuple


@dataclass(frozen=True)
class Circuit:
    num_inputs: int
    gates: tuple
    output: tuple

    def depth_of(self, ref) -> int:
        return self.depths[ref[1]] if ref[0] == "g" else 0

    @property
    def depths(self) -> list:
        out = []
        for g in self.gates:
            out.append(1 + max(out[c[1]] if c[0] == "g" else 0 for c in g.children))
        return out

    @property
    def depth(self) -> int:
        return self.depth_of(self.output)

    @property
    def size(self) -> int:
        return len(self.gates)

    @property
    def max_or_fanin(self) -> int:
        return max((len(g.children) for g in self.gates if g.op == "OR"), default=1)


def _literal(tok: str):
    neg = tok.startswith("!")
    body = tok[1:] if neg else tok
    if len(body) > 1 and body[0] == "x" and body[1:].isdigit() and int(body[1:]) >= 1:
        return ("x", int(body[1:]) - 1, neg)
    return None


def parse_netlist(text: str, num_inputs: int | None = None) -> Circuit:
    """Parse ``gid = AND a b`` / ``gid = OR a b ...`` / ``out ref`` lines (or ``;``-separated)."""
    statements = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        for stmt in raw.split("#", 1)[0].split(";"):
            if stmt.strip():
                statements.append((lineno, stmt.strip()))
    index: dict = {}
    gates: list = []
    output = None
    declared = num_inputs
    max_var = 0

    def ref(tok, lineno):
        nonlocal max_var
        lit = _literal(tok)
        if lit is not None:
            max_var = max(max_var, lit[1] + 1)
            return lit
        if tok not in index:
            raise NetlistError(lineno, f"undefined reference {tok!r} (gates must be defined "
                                       "before use; cycles are rejected)")
        return ("g", index[tok])

    for lineno, stmt in statements:
        toks = stmt.split()
        if toks[0] == "inputs":
            if len(toks) != 2 or not toks[1].isdigit():
                raise NetlistError(lineno, "expected 'inputs <n>'")
            declared = int(toks[1])
        elif toks[0] == "out":
            if len(toks) != 2:
                raise NetlistError(lineno, "expected 'out <ref>'")
            if output is not None:
                raise NetlistError(lineno, "output declared twice")
            output = ref(toks[1], lineno)
        elif len(toks) >= 3 and toks[1] == "=":
            name, op, args = toks[0], toks[2].upper(), toks[3:]
            if _literal(name) is not None:
                raise NetlistError(lineno, f"gate id {name!r} collides with a literal")
            if name in index:
                raise NetlistError(lineno, f"gate {name!r} defined twice")
            if op == "AND" and len(args) != 2:
                raise NetlistError(lineno, f"AND gate {name!r} needs exactly 2 operands")
            if op == "OR" and not args:
                raise NetlistError(lineno, f"OR gate {name!r} needs at least 1 operand")
            if op not in ("AND", "OR"):
                raise NetlistError(lineno, f"unknown gate type {toks[2]!r}")
            children = tuple(ref(a, lineno) for a in args)
            index[name] = len(gates)
            gates.append(Gate(name, op, children))
        else:
            raise NetlistError(lineno, f"cannot parse {stmt!r}")
    if output is None:
        raise NetlistError(statements[-1][0] if statements else 1, "missing 'out' line")
    n = declared if declared is not None else max_var
    if n < max_var:
        raise NetlistError(1, f"literal x{max_var} exceeds declared inputs {n}")
    return Circuit(n, tuple(gates), output)


def _ref_text(C: Circuit, r) -> str:
    if r[0] == "x":
        return ("!" if r[2] else "") + f"x{r[1] + 1}"
    return C.gates[r[1]].name


def to_netlist(C: Circuit, sep: str = "\n") -> str:
    lines = [f"inputs {C.num_inputs}"]
    lines += [f"{g.name} = {g.op} " + " ".join(_ref_text(C, c) for c in g.children)
              for g in C.gates]
    lines.append(f"out {_ref_text(C, C.output)}")
    return sep.join(lines)


def _eval_ref(C: Circuit, r, x, vals) -> int:
    if r[0] == "x":
        return 1 - int(x[r[1]]) if r[2] else int(x[r[1]])
    return vals[r[1]]


def eval_circuit(C: Circuit, x: Sequence[int]) -> int:
    if len(x) != C.num_inputs:
        raise ValueError(f"expected {C.num_inputs} inputs")
    vals: list = []
    for g in C.gates:
        bits = [_eval_ref(C, c, x, vals) for c in g.children]
        vals.append(int(all(bits)) if g.op == "AND" else int(any(bits)))
    return _eval_ref(C, C.output, x, vals)


def truth_table(C: Circuit) -> list:
    n = C.num_inputs
    return [eval_circuit(C, tuple((i >> j) & 1 for j in range(n))) for i in range(1 << n)]


# -- polynomials -------------------------------------------------------------------

def literal_var(ref, n: int) -> int:
    """x_i -> variable i, !x_i -> variable n + i."""
    return ref[1] + (n if ref[2] else 0)


def _cone_poly(C: Circuit, root, leaf_var, num_vars: int, stop=lambda r: False) -> SparsePoly:
    memo: dict = {}

    def go(r):
        if r[0] == "x" or stop(r):
            return SparsePoly.variable(leaf_var(r), num_vars)
        got = memo.get(r[1])
        if got is None:
            g = C.gates[r[1]]
            parts = [go(c) for c in g.children]
            if g.op == "OR":
                got = parts[0]
                for q in parts[1:]:
                    got = got + q
            else:
                got = parts[0] * parts[1]
            memo[r[1]] = got
        return got
    return go(root)


def block_to_poly(C: Circuit, root=None) -> SparsePoly:
    """Integer polynomial over 2n literal variables representing the cone at ``root``.

    OR becomes a sum and AND a product, so the value is nonzero exactly when
    the fragment is true under 0/1 literal values.
    """
    n = C.num_inputs
    return _cone_poly(C, C.output if root is None else root,
                      lambda r: literal_var(r, n), 2 * n)


def poly_bounds_ok(P: SparsePoly, d: int, fanin: int) -> bool:
    return P.degree() <= 2 ** d and len(P.terms) <= fanin ** (2 ** d)


# -- layer merging -----------------------------------------------------------------

@dataclass(frozen=True)
class SuperGate:
    root: tuple  # node computed by this super-gate
    poly: SparsePoly  # integer polynomial over the previous layer's outputs
    passthrough: bool
    depth: int
    fanin: int  # max OR fan-in inside the cone (1 if none)


@dataclass(frozen=True)
class BlockCircuit:
    num_inputs: int
    block_depth: int
    literals: tuple  # refs fed to layer 1, in order
    layers: tuple  # layers[k] is a tuple of SuperGate; the last holds the output

    @property
    def depth(self) -> int:
        return len(self.layers)


def merge_layers(C: Circuit, d: int) -> BlockCircuit:
    """Group gates into super-layers of depth ``d``; layer k holds gates with depth in ((k-1)d, kd]."""
    if d < 1:
        raise ValueError("block depth must be >= 1")
    depths = C.depths
    K = max(1, ceil(C.depth / d))

    def level(r):
        return 0 if r[0] == "x" else ceil(depths[r[1]] / d)

    layers = []
    need = [C.output]
    for k in range(K, 0, -1):
        below: dict = {}
        cones = []
        for r in need:
            if r[0] == "g" and level(r) == k:
                leaves: list = []
                seen = set()
                maxfan = 1
                cone_depth = {}

                def walk(u):
                    nonlocal maxfan
                    if u[0] == "x" or level(u) < k:
                        if u not in seen:
                            seen.add(u)
                            leaves.append(u)
                        return 0
                    if u[1] in cone_depth:
                        return cone_depth[u[1]]
                    g = C.gates[u[1]]
                    if g.op == "OR":
                        maxfan = max(maxfan, len(g.children))
                    dep = 1 + max(walk(c) for c in g.children)
                    cone_depth[u[1]] = dep
                    return dep
                dep = walk(r)
                cones.append((r, leaves, dep, maxfan))
                for u in leaves:
                    below.setdefault(u, len(below))
            else:
                cones.append((r, [r], 0, 1))
                below.setdefault(r, len(below))
        m = len(below)
        gates = []
        for r, leaves, dep, fan in cones:
            if leaves == [r]:
                poly = SparsePoly.variable(below[r], m)
                gates.append(SuperGate(r, poly, True, 0, 1))
            else:
                poly = _cone_poly(C, r, lambda u: below[u], m,
                                  stop=lambda u: u[0] == "g" and level(u) < k)
                gates.append(SuperGate(r, poly, False, dep, fan))
        layers.append(tuple(gates))
        need = list(below)
    return BlockCircuit(C.num_inputs, d, tuple(need), tuple(reversed(layers)))


def eval_blocks(B: BlockCircuit, x: Sequence[int]) -> int:
    vals = [1 - int(x[r[1]]) if r[2] else int(x[r[1]]) for r in B.literals]
    for layer in B.layers:
        vals = [int(g.poly(vals) != 0) for g in layer]
    return vals[0]


# -- compilation -------------------------------------------------------------------

def _attainable(P: SparsePoly, p: int, limit: int = 16):
    vars_ = sorted(P.variables())
    if len(vars_) > limit:
        return None
    point = [0] * P.num_vars
    out = set()
    for bits in itertools.product((0, 1), repeat=len(vars_)):
        for v, b in zip(vars_, bits):
            point[v] = b
        out.add(P(point) % p)
    return sorted(out)


def block_prime(B: BlockCircuit) -> int:
    need = 2
    for layer in B.layers:
        for g in layer:
            need = max(need, g.poly.coeff_sum(), g.poly.degree(), len(g.poly.terms))
    return next_prime(need + 1)


def supergate_program(g: SuperGate, p: int, num_inputs: int, nonzero: str = "direct"
                      ) -> Program:
    terms = sum_program(g.poly, p, num_inputs)
    if nonzero == "digits":
        return compose(nonzero_program(p, "digits"), terms)
    values = _attainable(g.poly, p)
    if values is not None and set(values) <= {0, 1}:
        return terms
    return compose(nonzero_program(p, "direct", values), terms)


def literal_program(B: BlockCircuit, p: int) -> Program:
    n = B.num_inputs
    rows, consts = [], []
    for r in B.literals:
        row = [0] * n
        row[r[1]] = -1 if r[2] else 1
        rows.append(row)
        consts.append(1 if r[2] else 0)
    return linear_program(rows, consts, p, n, name="literals", input_range=2)


def compile_circuit(C: Circuit, d: int, p: int | None = None, nonzero: str = "direct"
                    ) -> BuiltProgram:
    B = merge_layers(C, d)
    needed = block_prime(B)
    if p is None:
        p = needed
    for k, layer in enumerate(B.layers, start=1):
        for i, g in enumerate(layer):
            worst = max(g.poly.coeff_sum(), g.poly.degree(), len(g.poly.terms))
            if p <= worst:
                raise FieldError(f"p = {p} too small for block {i} of layer {k} "
                                 f"(needs > {worst})")
    prog = literal_program(B, p)
    for layer in B.layers:
        m = layer[0].poly.num_vars
        blocks = [supergate_program(g, p, m, nonzero) for g in layer]
        stage = parallel(blocks, [[i] for i in range(len(blocks))], len(blocks), name="layer")
        prog = compose(stage, prog, name="circuit")
    prog = replace(prog, name=f"circuit_d{d}", oracle="circuit : " + to_netlist(C, " ; "))
    per_layer = 64 if nonzero == "digits" else 16
    bounds = [Bound("calls_per_input", 64 ** B.depth, False)]
    notes = {"p": p, "super_layers": B.depth, "per_layer_bound": per_layer ** B.depth}
    return BuiltProgram(prog, oracle_function(prog.oracle), tuple(bounds), notes)


# -- random corpus -----------------------------------------------------------------

def random_circuit(rng: np.random.Generator, n: int, size: int, depth: int,
                   max_fanin: int = 3, neg_prob: float = 0.3) -> Circuit:
    """Random SAC circuit with exactly ``depth`` levels and at most ``size`` gates."""
    if size < depth:
        raise ValueError("size must be at least depth")
    names = []
    gates: list = []
    by_depth: dict = {0: []}

    def literal():
        return ("x", int(rng.integers(n)), bool(rng.random() < neg_prob))

    # a spine guarantees the exact depth
    counts = [1] * depth
    for _ in range(size - depth):
        counts[int(rng.integers(depth))] += 1
    for level in range(1, depth + 1):
        by_depth[level] = []
        for j in range(counts[level - 1] if level < depth else 1):
            is_and = bool(rng.random() < 0.5)
            k = 2 if is_and else int(rng.integers(1, max_fanin + 1))
            children = []
            spine = ("g", by_depth[level - 1][int(rng.integers(len(by_depth[level - 1])))]) \
                if level > 1 else literal()
            children.append(spine)
            while len(children) < k:
                lower = int(rng.integers(0, level))
                if lower == 0 or not by_depth[lower]:
                    children.append(literal())
                else:
                    pool = by_depth[lower]
                    children.append(("g", pool[int(rng.integers(len(pool)))]))
            name = f"g{len(gates) + 1}"
            names.append(name)
            gates.append(Gate(name, "AND" if is_and else "OR", tuple(children)))
            by_depth[level].append(len(gates) - 1)
    return Circuit(n, tuple(gates), ("g", len(gates) - 1))


__all__ = [
    "Circuit", "Gate", "BlockCircuit", "SuperGate", "NetlistError", "parse_netlist",
    "to_netlist", "eval_circuit", "truth_table", "block_to_poly", "merge_layers",
    "eval_blocks", "compile_circuit", "random_circuit", "poly_bounds_ok", "block_prime",
]
