import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import naive_poly_eval
from regprog.builders import (BuildError, build_bool_rep, build_general,
                              build_interpolation_eval, build_symmetric_bool, build_univariate,
                              build_univariate_set, build_waring)
from regprog.field import GF, FieldError, next_prime
from regprog.poly import SparsePoly, parse_poly
from regprog.rpir import RegisterState, access_groups, execute, output_deltas, verify_clean


def deltas(P, x, seed=0):
    init = RegisterState.random(P, np.random.default_rng(seed))
    final, _ = execute(P, init, x)
    return output_deltas(P, init, final)


def all_bounds_hold(built):
    return all(ok for *_, ok in built.check_bounds())


# -- univariate ---------------------------------------------------------------

def test_univariate_degree_three_counts():
    b = build_univariate([1, 1, 1, 1], 7)
    prof = b.profile
    assert prof.recursive_calls == (4,) and prof.total_registers == 5
    assert prof.basic_instructions == 2 * 3 + 2
    assert all_bounds_hold(b)


@pytest.mark.parametrize("a0", [0, 3, 6])
def test_univariate_constant(a0):
    b = build_univariate([a0], 7)
    for x in range(7):
        assert deltas(b.program, [x], seed=x) == [a0]


def test_univariate_example():
    b = build_univariate(parse_poly("x1^2 + 1"), 7)
    assert deltas(b.program, [3]) == [3]


def test_univariate_set_counts_and_values():
    b = build_univariate_set([[0, 0, 1], [0, 0, 0, 1]], 11)
    assert b.profile.total_registers == 6 and b.profile.recursive_calls == (4,)
    assert deltas(b.program, [2]) == [4, 8]
    twin = build_univariate_set([[0, 1], [0, 1]], 5)
    assert all(deltas(twin.program, [x]) == [x, x] for x in range(5))
    with pytest.raises(BuildError):
        build_univariate_set([], 5)


# -- Waring --------------------------------------------------------------------

def test_waring_product_of_two():
    b = build_waring(parse_poly("x1*x2", field=GF(5)))
    assert b.profile.recursive_calls == (4, 4)
    assert deltas(b.program, [2, 3]) == [1]
    assert verify_clean(b.program, lambda x: [x[0] * x[1] % 5]).passed


def test_waring_pure_power_is_one_gadget():
    b = build_waring(parse_poly("x1^3", field=GF(7)))
    assert b.profile.total_registers == 3 + 2  # one univariate gadget
    assert verify_clean(b.program, lambda x: [x[0] ** 3 % 7]).passed


def test_waring_sum_of_products():
    b = build_waring(parse_poly("x1*x2 + x3*x4", field=GF(7)))
    assert deltas(b.program, [1, 2, 3, 4]) == [0]
    assert b.profile.recursive_calls == (4, 4, 4, 4)


def test_waring_degree_too_large():
    with pytest.raises(FieldError):
        build_waring(parse_poly("x1^5", field=GF(5)))


# -- general -------------------------------------------------------------------

def test_general_no_lift():
    P = parse_poly("x1*x2 + x3")
    b = build_general(P, 5)
    assert deltas(b.program, [2, 3, 4]) == [0]
    assert verify_clean(b.program, lambda x: [(x[0] * x[1] + x[2]) % 5]).passed
    assert b.profile.max_calls == 4


def test_general_lift_sixth_power():
    b = build_general(parse_poly("x1^6"), 5, lift=True)
    assert b.notes["q"] == next_prime(2 * 5 ** 7)
    assert b.program.readout == 5
    assert verify_clean(b.program, lambda x: [pow(x[0], 6, 5)]).passed


def test_general_zero_polynomial():
    b = build_general(SparsePoly.zero(2), 7)
    for x in itertools.product(range(7), repeat=2):
        assert deltas(b.program, list(x)) == [0]


def test_general_requires_lift_for_large_degree():
    with pytest.raises(FieldError):
        build_general(parse_poly("x1^5"), 5)


@st.composite
def high_degree(draw):
    p = draw(st.sampled_from([2, 3, 5]))
    n = draw(st.integers(1, 2))
    terms = {}
    for _ in range(draw(st.integers(1, 3))):
        mono = tuple((v, e) for v in range(n) if (e := draw(st.integers(0, p + 1))))
        terms[mono] = draw(st.integers(-9, 9))
    # force degree >= p
    v = draw(st.integers(0, n - 1))
    terms[((v, p + draw(st.integers(0, 1))),)] = draw(st.integers(1, p - 1))
    x = draw(st.lists(st.integers(0, p - 1), min_size=n, max_size=n))
    return p, SparsePoly(terms, n), x


@settings(max_examples=50, deadline=None)
@given(high_degree())
def test_lift_matches_integer_evaluation(case):
    p, P, x = case
    assert P.degree() >= p
    b = build_general(P, p, lift=True)
    rng = np.random.default_rng(len(x))
    init = RegisterState.random(b.program, rng)
    final, _ = execute(b.program, init, x)
    assert output_deltas(b.program, init, final) == [naive_poly_eval(P.terms, x) % p]


# -- Boolean -------------------------------------------------------------------

def test_symmetric_examples():
    or3 = build_symmetric_bool([0, 1, 1, 1], 5)
    assert deltas(or3.program, [1, 0, 1]) == [1]
    and4 = build_symmetric_bool([0, 0, 0, 0, 1], 5)
    assert deltas(and4.program, [1, 1, 1, 1]) == [1]
    maj3 = build_symmetric_bool([0, 0, 1, 1], 5)
    assert deltas(maj3.program, [1, 1, 0]) == [1]
    assert maj3.profile.recursive_calls == (4, 4, 4)
    with pytest.raises(FieldError):
        build_symmetric_bool([0, 0, 1, 1, 1, 1], 5)


def test_symmetric_exhaustive_random_tables(rng):
    for n in range(1, 7):
        g = [int(v) for v in rng.integers(0, 2, n + 1)]
        b = build_symmetric_bool(g, next_prime(n + 1))
        assert verify_clean(b.program, lambda x: [g[sum(x)]], exhaustive=True).passed


def test_bool_rep_or():
    b = build_bool_rep(parse_poly("x1 + x2 + x3"))
    assert deltas(b.program, [0, 0, 0]) == [0]
    assert deltas(b.program, [1, 0, 1]) == [1]
    assert b.profile.max_calls <= 64
    assert verify_clean(b.program, lambda x: [int(any(x))], exhaustive=True).passed


def test_bool_rep_nonlinear_digits_and_direct():
    P = parse_poly("x1*x2 + x2*x3*x4 + 2*x1")
    f = lambda x: [int(x[0] * x[1] + x[1] * x[2] * x[3] + 2 * x[0] != 0)]
    for mode in ("digits", "direct"):
        b = build_bool_rep(P, 7, nonzero=mode)
        assert b.profile.max_calls <= (64 if mode == "digits" else 16)
        assert verify_clean(b.program, f, exhaustive=True).passed


def test_bool_rep_rejects_non_representation():
    with pytest.raises(BuildError):
        build_bool_rep(parse_poly("5*x1"), 5)
    with pytest.raises(BuildError):
        build_bool_rep(parse_poly("x1"), 3, f=lambda x: x[0] == 0)


# -- interpolation -------------------------------------------------------------

def access_rounds(P):
    return sum(1 for is_acc, _ in access_groups(P.instructions) if is_acc)


def test_interpolation_product_of_two():
    b = build_interpolation_eval(parse_poly("x1*x2"), 7)
    assert deltas(b.program, [2, 3]) == [6]
    assert access_rounds(b.program) == 4  # 3 shifts + restore
    assert b.profile.recursive_calls == (4, 4)


def test_interpolation_linear():
    b = build_interpolation_eval(parse_poly("x1"), 5)
    assert b.profile.recursive_calls == (3,)
    assert verify_clean(b.program, lambda x: [x[0]]).passed


def test_interpolation_cubic():
    b = build_interpolation_eval(parse_poly("x1*x2*x3"), 11)
    assert deltas(b.program, [1, 2, 3]) == [6]


def test_interpolation_inhomogeneous_and_multi_output():
    P = parse_poly("x1^2 + 3*x2 + 5", num_vars=2)
    Q = parse_poly("x1*x2", num_vars=2)
    b = build_interpolation_eval([P, Q], 7)
    f = lambda x: [(x[0] ** 2 + 3 * x[1] + 5) % 7, x[0] * x[1] % 7]
    assert verify_clean(b.program, f).passed
    assert b.profile.recursive_calls == (4, 4)


def test_interpolation_field_too_small():
    with pytest.raises(FieldError):
        build_interpolation_eval(parse_poly("x1^4"), 5)
