"""The grid solver against brute force, and the batch checker against exact evaluation."""

from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from muord.gridsolve import (
    BatchChecker,
    Congruence,
    Expr,
    Implication,
    System,
    feasible_values,
    lin,
)

OPS = ["<=", ">=", "==", "<", ">"]


@st.composite
def systems(draw, nvars=3, ub=2):
    s = System()
    names = [f"x{k}" for k in range(nvars)]
    for v in names:
        s.add_var(v, 0, ub)
    for c in range(draw(st.integers(0, 3))):
        coeffs = draw(st.lists(st.integers(-2, 2), min_size=nvars, max_size=nvars))
        rhs = Fraction(draw(st.integers(-8, 8)), draw(st.sampled_from([1, 2, 4])))
        s.add(lin(zip(names, coeffs), draw(st.sampled_from(OPS)), rhs, f"c{c}"))
    if draw(st.booleans()):
        when = lin([(names[0], 1), (names[1], 1)], "==", draw(st.integers(0, 2 * ub)), "w")
        s.implications.append(Implication(when, (Congruence(((names[2], 1),), Fraction(0), 1),),
                                          "imp"))
    return s


def brute(s: System, D: int):
    grids = [[Fraction(x, D) for x in range(int(s.bounds[v][0] * D), int(s.bounds[v][1] * D) + 1)]
             for v in s.variables]
    out = []
    for pt in product(*grids):
        vals = dict(zip(s.variables, pt))
        if not s.violations(vals):
            out.append(vals)
    return out


@settings(max_examples=80, deadline=None)
@given(systems(), st.sampled_from([1, 2, 4]))
def test_search_is_complete_and_ordered(s, D):
    got = list(s.solutions(D))
    want = brute(s, D)
    key = lambda d: tuple(d[v] for v in s.variables)  # noqa: E731
    assert [key(x) for x in got] == sorted(key(x) for x in want)


@settings(max_examples=40, deadline=None)
@given(systems(), st.sampled_from([2, 4]))
def test_priority_changes_order_only(s, D):
    a = {tuple(sorted(x.items())) for x in s.solutions(D)}
    b = {tuple(sorted(x.items())) for x in s.solutions(D, priority=["x2", "x1"])}
    assert a == b


@settings(max_examples=40, deadline=None)
@given(systems(), st.sampled_from([2, 4]), st.integers(0, 2 ** 32 - 1))
def test_batch_checker_matches_exact(s, D, seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2 * D + 1, size=(50, len(s.variables)))
    mask = BatchChecker.build(s, D).feasible(X)
    for row, ok in zip(X, mask):
        vals = {v: Fraction(int(x), D) for v, x in zip(s.variables, row)}
        assert bool(ok) == (not s.violations(vals))


def test_feasible_values_and_first():
    s = System()
    s.add_var("x", 0, 2)
    s.add_var("y", 0, 2)
    s.add(lin({"x": 1, "y": 1}, "==", Fraction(3, 2), "sum"))
    assert feasible_values(s, "x", 2) == [Fraction(k, 2) for k in range(4)]
    assert s.first(2) == {"x": 0, "y": Fraction(3, 2)}
    assert s.first(1) is None


def test_expr_helpers():
    x, y = Expr.var("x"), Expr.var("y")
    e = 2 * x - y + 1
    assert e.value({"x": Fraction(1), "y": Fraction(3)}) == 0
    c = e.rel("<=", 0, "n")
    assert c.holds({"x": Fraction(1), "y": Fraction(3)})
    assert not c.holds({"x": Fraction(2), "y": Fraction(3)})


def test_bad_operator_and_duplicate():
    with pytest.raises(ValueError):
        lin({"x": 1}, "!=", 0, "bad")
    s = System()
    s.add_var("x", 0, 1)
    with pytest.raises(ValueError):
        s.add_var("x", 0, 1)
