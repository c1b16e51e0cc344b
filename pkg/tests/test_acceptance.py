"""Acceptance criteria 1-10.

Each criterion prints one ``PASS``/``FAIL`` line; the lines are repeated in the
pytest terminal summary. Run directly with ``python3 tests/test_acceptance.py``
to get only the ten lines.
"""
import itertools
import os
import sys
import time
from math import ceil, log

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))
from conftest import naive_matpow, naive_poly_eval  # noqa: E402
from corpus import built_corpus  # noqa: E402

from regprog.builders import (build_bool_rep, build_interpolation_eval, build_symmetric_bool,
                              build_univariate, build_univariate_set, build_waring)
from regprog.circuits import (compile_circuit, eval_circuit, merge_layers, poly_bounds_ok,
                              random_circuit)
from regprog.field import GF, next_prime
from regprog.matpow import (boost_call_bound, build_matpow_boosted, build_matpow_lifted,
                            build_matpow_small)
from regprog.poly import SparsePoly, waring_decompose
from regprog.report import SpaceReport
from regprog.rpir import (RegisterState, _input_array, _state_arrays, compose, invert, parse,
                          resources, run_batch, serialize, verify_clean)

RESULTS: list = []


class Criterion:
    def __init__(self, number, title, limit=None):
        self.number, self.title, self.limit = number, title, limit
        self.failures: list = []
        self.facts: list = []

    def check(self, ok, what):
        if not ok and len(self.failures) < 5:
            self.failures.append(what)
        return ok

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc is not None:
            self.failures.append(f"{exc_type.__name__}: {exc}")
        if self.limit is not None and elapsed >= self.limit:
            self.failures.append(f"runtime {elapsed:.1f}s over the {self.limit}s limit")
        status = "FAIL" if self.failures else "PASS"
        facts = "; ".join(self.facts + [f"{elapsed:.1f}s"])
        line = f"{status} [{self.number}] {self.title} ({facts})"
        if self.failures:
            line += " :: " + " | ".join(self.failures)
        RESULTS.append(line)
        print(line)
        assert not self.failures, line
        return False


def poly_oracle(P, p):
    return lambda x: [naive_poly_eval(P.terms, x) % p]


def random_poly(rng, n, d, p, homogeneous):
    P = SparsePoly.zero(n, GF(p))
    for _ in range(int(rng.integers(1, 6))):
        deg = d if homogeneous else int(rng.integers(0, d + 1))
        term = SparsePoly.constant(int(rng.integers(1, p)), n, GF(p))
        for _ in range(deg):
            term = term * SparsePoly.variable(int(rng.integers(n)), n, GF(p))
        P = P + term
    return P


def random_int_poly(rng, n, d):
    P = SparsePoly.zero(n)
    for _ in range(int(rng.integers(1, 6))):
        term = SparsePoly.constant(int(rng.choice([-3, -2, -1, 1, 2, 3])), n)
        for _ in range(int(rng.integers(0, d + 1))):
            term = term * SparsePoly.variable(int(rng.integers(n)), n)
        P = P + term
    return P


# -- 1 -------------------------------------------------------------------------

def test_criterion_1_univariate_fidelity():
    with Criterion(1, "univariate: 4 calls, n+2 registers, exhaustive cleanness", 5) as c:
        rng = np.random.default_rng(1)
        count = 0
        for p in (5, 7, 11, 13):
            for n in range(17):
                coeffs = [int(v) for v in rng.integers(0, p, n + 1)]
                coeffs[-1] = coeffs[-1] or 1
                b = build_univariate(coeffs, p)
                prof = b.profile
                c.check(prof.recursive_calls == (4,), f"p={p} n={n} calls {prof.recursive_calls}")
                c.check(prof.total_registers == n + 2, f"p={p} n={n} regs {prof.total_registers}")
                f = lambda x, cs=coeffs, p=p: [sum(a * x[0] ** i for i, a in enumerate(cs)) % p]
                rep = verify_clean(b.program, f, exhaustive=True, taus_per_input=200, seed=n)
                c.check(rep.passed, f"p={p} n={n} not clean: {rep.counterexample}")
                count += 1
        c.facts.append(f"{count} programs")


# -- 2 -------------------------------------------------------------------------

def test_criterion_2_univariate_set():
    with Criterion(2, "univariate set: 4 calls, n+1+l registers") as c:
        rng = np.random.default_rng(2)
        count = 0
        for p in (11, 13):
            for ell in range(1, 5):
                for n in range(1, 9):
                    polys = []
                    for _ in range(ell):
                        cs = [int(v) for v in rng.integers(0, p, int(rng.integers(1, n + 2)))]
                        polys.append(cs)
                    polys[0] = [int(v) for v in rng.integers(0, p, n)] + [1]
                    b = build_univariate_set(polys, p)
                    prof = b.profile
                    c.check(prof.recursive_calls == (4,), f"l={ell} n={n} calls")
                    c.check(prof.total_registers == n + 1 + ell,
                            f"l={ell} n={n} regs {prof.total_registers}")
                    f = lambda x, ps=polys, p=p: [
                        sum(a * x[0] ** i for i, a in enumerate(cs)) % p for cs in ps]
                    rep = verify_clean(b.program, f, exhaustive=True, taus_per_input=20)
                    c.check(rep.passed, f"l={ell} n={n} not clean")
                    count += 1
        c.facts.append(f"{count} programs")


# -- 3 -------------------------------------------------------------------------

def test_criterion_3_composition_counts():
    with Criterion(3, "composition of powering programs: 16 calls, s_f + t_f*s_g") as c:
        for p in (11, 13):
            for a in range(1, 6):
                for b in range(1, 6):
                    outer = build_univariate([0] * a + [1], p).program
                    inner = build_univariate([0] * b + [1], p).program
                    po, pi = resources(outer), resources(inner)
                    P = compose(outer, inner)
                    pc = resources(P)
                    t_f = po.recursive_calls[0]
                    c.check(pc.recursive_calls == (t_f * pi.recursive_calls[0],) == (16,),
                            f"p={p} a={a} b={b} calls {pc.recursive_calls}")
                    c.check(pc.basic_instructions
                            == po.basic_instructions + t_f * pi.basic_instructions,
                            f"p={p} a={a} b={b} basic {pc.basic_instructions}")
                    f = lambda x, e=a * b, p=p: [pow(x[0], e, p)]
                    rep = verify_clean(P, f, exhaustive=True, taus_per_input=20)
                    c.check(rep.passed, f"p={p} a={a} b={b} not clean")
        c.facts.append("50 compositions")


# -- 4 -------------------------------------------------------------------------

def test_criterion_4_waring():
    with Criterion(4, "Waring builder: 4 calls per input, exact decomposition") as c:
        rng = np.random.default_rng(4)
        cases = 0
        while cases < 120:
            p = int(rng.choice([5, 7, 11]))
            n = int(rng.integers(1, 5))
            d = int(rng.integers(1, 5))
            if d >= p:
                continue
            P = random_poly(rng, n, d, p, homogeneous=True)
            if P.is_zero():
                continue
            c.check(waring_decompose(P, d).expand() == P, f"decomposition of {P}")
            b = build_waring(P)
            used = P.variables()
            calls = b.profile.recursive_calls
            c.check(all(calls[v] == 4 for v in used) and max(calls) == 4,
                    f"{P} over F{p}: calls {calls}")
            points = [[int(v) for v in rng.integers(0, p, n)] for _ in range(50)]
            rep = verify_clean(b.program, poly_oracle(P, p), inputs=points, seed=cases)
            c.check(rep.passed, f"{P} over F{p} not clean")
            cases += 1
        c.facts.append(f"{cases} cases x 50 points")


def random_table(rng, n):
    # a constant table needs no input at all, so draw a nonconstant one
    while True:
        g = [int(v) for v in rng.integers(0, 2, n + 1)]
        if 0 < sum(g) < n + 1:
            return g


# -- 5 -------------------------------------------------------------------------

def test_criterion_5_boolean():
    with Criterion(5, "Boolean builders: exhaustive truth tables", 60) as c:
        rng = np.random.default_rng(5)
        count = 0
        for n in range(1, 11):
            p = next_prime(n + 1)
            tables = {"OR": [0] + [1] * n, "AND": [0] * n + [1],
                      "MAJ": [int(2 * k > n) for k in range(n + 1)],
                      "random": random_table(rng, n)}
            for name, g in tables.items():
                b = build_symmetric_bool(g, p)
                c.check(all(k == 4 for k in b.profile.recursive_calls), f"{name} n={n} calls")
                rep = verify_clean(b.program, lambda x, g=g: [g[sum(x)]], exhaustive=True)
                c.check(rep.passed, f"{name} n={n} not clean")
                count += 1
            for _ in range(2):
                P = random_int_poly(rng, n, min(n, 3))
                f = lambda x, P=P: [int(naive_poly_eval(P.terms, x) != 0)]
                b = build_bool_rep(P, f=f)
                c.check(b.profile.max_calls <= 64, f"bool rep n={n} calls {b.profile.max_calls}")
                rep = verify_clean(b.program, f, exhaustive=True)
                c.check(rep.passed, f"bool rep {P} not clean")
                count += 1
        c.facts.append(f"{count} functions, n <= 10")


# -- 6 -------------------------------------------------------------------------

def test_criterion_6_interpolation():
    with Criterion(6, "interpolation evaluation: d+2 accesses per input") as c:
        rng = np.random.default_rng(6)
        count = 0
        for d in range(1, 5):
            for p in sorted({next_prime(d + 1), 7, 11}):
                if p < d + 2:
                    continue
                for _ in range(5):
                    n = int(rng.integers(1, 4))
                    P = random_poly(rng, n, d, p, homogeneous=False)
                    if P.degree() != d:
                        P = P + SparsePoly.variable(0, n, GF(p)) ** d
                    b = build_interpolation_eval(P, p)
                    calls = b.profile.recursive_calls
                    c.check(all(calls[v] == d + 2 for v in range(n)),
                            f"{P} over F{p}: calls {calls}")
                    rep = verify_clean(b.program, poly_oracle(P, p), exhaustive=True,
                                       taus_per_input=3)
                    c.check(rep.passed, f"{P} over F{p} not clean")
                    count += 1
        c.facts.append(f"{count} polynomials")


# -- 7 -------------------------------------------------------------------------

def test_criterion_7_circuits():
    with Criterion(7, "SAC circuit pipeline", 300) as c:
        rng = np.random.default_rng(7)
        worst = 0.0
        count = 0
        for k in range(60):
            n = int(rng.integers(2, 9))
            depth = int(rng.integers(1, 7))
            size = int(rng.integers(depth, 41))
            C = random_circuit(rng, n, size, depth)
            for d in (1, 2, 3):
                B = merge_layers(C, d)
                for layer in B.layers:
                    for g in layer:
                        if not g.passthrough:
                            c.check(g.depth <= d and poly_bounds_ok(g.poly, d, g.fanin),
                                    f"circuit {k} d={d}: block bound")
                b = compile_circuit(C, d)
                bound = 64 ** ceil(C.depth / d)
                c.check(b.profile.max_calls <= bound, f"circuit {k} d={d} calls")
                worst = max(worst, b.profile.max_calls / bound)
                rep = verify_clean(b.program, lambda x, C=C: [eval_circuit(C, x)],
                                   exhaustive=True, seed=k)
                c.check(rep.passed, f"circuit {k} d={d} not clean")
                count += 1
        c.facts.append(f"{count} compilations of 60 circuits, max calls/bound {worst:.3f}")


# -- 8 -------------------------------------------------------------------------

def matrix_inputs(n, p, rng, count=30):
    mats = [[0] * (n * n), [int(i == j) for i in range(n) for j in range(n)]]
    for perm in itertools.permutations(range(n)):
        mats.append([int(perm[i] == j) for i in range(n) for j in range(n)])
    mats += [[int(v) for v in rng.integers(0, p, n * n)] for _ in range(count)]
    return mats


def matpow_oracle(n, p, d):
    def f(x):
        M = [list(x[i * n:(i + 1) * n]) for i in range(n)]
        return [v for row in naive_matpow(M, d, p) for v in row]
    return f


def boosted_grid():
    for n in (2, 3):
        for p in (5, 7):
            for d in range(1, 17):
                deltas = (2, 3, 4) if n == 2 or d == 16 else (2 + d % 3,)
                for delta in deltas:
                    yield n, p, d, delta


def test_criterion_8_matrix_powering():
    with Criterion(8, "matrix powering: small, lifted, boosted", 300) as c:
        rng = np.random.default_rng(8)
        counts = {"small": 0, "lifted": 0, "boosted": 0}
        worst = 0.0

        def check(b, n, p, d, label):
            rep = verify_clean(b.program, matpow_oracle(n, p, d),
                               inputs=matrix_inputs(n, p, rng), seed=d)
            c.check(rep.passed, f"{label} n={n} p={p} d={d} wrong")

        for n in (2, 3):
            for p in (5, 7):
                for d in range(1, p):
                    b = build_matpow_small(n, p, d)
                    c.check(set(b.profile.recursive_calls) == {4}, f"small n={n} d={d} calls")
                    check(b, n, p, d, "small")
                    counts["small"] += 1
                for d in range(p, 11 if n == 2 else 6):
                    check(build_matpow_lifted(n, p, d), n, p, d, "lifted")
                    counts["lifted"] += 1
        for n, p, d, delta in boosted_grid():
            b = build_matpow_boosted(n, p, d, delta)
            bound = boost_call_bound(d, delta)
            c.check(b.profile.max_calls <= 2 * bound, f"boosted n={n} d={d} delta={delta} calls")
            worst = max(worst, b.profile.max_calls / bound)
            check(b, n, p, d, f"boosted delta={delta}")
            counts["boosted"] += 1
        c.facts.append(", ".join(f"{k} {v}" for k, v in counts.items()))
        c.facts.append(f"max boosted calls/bound {worst:.3f}")


# -- 9 -------------------------------------------------------------------------

def test_criterion_9_round_trips():
    with Criterion(9, "serialize/parse identity and invert restoration") as c:
        rng = np.random.default_rng(9)
        corpus = built_corpus()
        for label, b in corpus:
            P = b.program
            c.check(parse(serialize(P)) == P, f"{label}: parse(serialize) differs")
            c.check(serialize(parse(serialize(P))) == serialize(P), f"{label}: text differs")
            inits = [RegisterState.random(P, rng) for _ in range(100)]
            xs = [[int(v) for v in rng.integers(0, P.input_range, P.num_inputs)]
                  for _ in range(100)]
            state = _state_arrays(P, inits)
            x = _input_array(P, xs)
            start = [a.copy() for a in state]
            mid = run_batch(P, state, x)
            back = run_batch(invert(P), mid, x)
            c.check(all(np.array_equal(a, b) for a, b in zip(start, back)),
                    f"{label}: invert does not restore")
        c.facts.append(f"{len(corpus)} programs x 100 (init, x)")


# -- 10 ------------------------------------------------------------------------

def test_criterion_10_space_report(capsys):
    from regprog.cli import main
    with Criterion(10, "space report against independent recomputation") as c:
        rng = np.random.default_rng(10)
        for _ in range(200):
            t, s, n = (int(v) for v in rng.integers(1, 10 ** 6, 3))
            R = next_prime(int(rng.integers(2, 10 ** 9)))
            rep = SpaceReport(t, s, n, R)
            pure = log(t * n * R) / log(2)
            cat = s * log(R) / log(2)
            c.check(abs(rep.pure_space_units - pure) < 1e-9 * max(pure, 1), f"pure {t},{s},{n},{R}")
            c.check(abs(rep.catalytic_space_units - cat) < 1e-9 * max(cat, 1), f"cat {t},{s},{n},{R}")
        code = main(["space-report", "--t", "16", "--s", "8", "--n", "4", "--field", "7"])
        out = capsys.readouterr().out
        c.check(code == 0 and "8.81 units" in out and "22.46 units" in out, "cli example")
        c.facts.append("200 random tuples and the cli example")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
