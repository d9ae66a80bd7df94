"""Submodule arithmetic against brute-force enumeration of small groups."""

from itertools import product

from hypothesis import given, settings
from hypothesis import strategies as st

from muord.zpn import Submodule, apply, kernel, matmul, smith, valuation


def closure(vectors, p, n, r):
    mod = p ** n
    seen = {(0,) * r}
    frontier = list(seen)
    while frontier:
        nxt = []
        for x in frontier:
            for v in vectors:
                y = tuple((a + b) % mod for a, b in zip(x, v))
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return seen


def log_order(s, p):
    k, size = 0, len(s)
    while size > 1:
        size //= p
        k += 1
    return k


vec = lambda p, n, r: st.tuples(*[st.integers(0, p ** n - 1)] * r)  # noqa: E731


def test_valuation():
    assert valuation(8, 2, 5) == 3
    assert valuation(0, 3, 2) == 2
    assert valuation(9, 3, 2) == 2


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 3]), st.data())
def test_span_length_matches_enumeration(p, data):
    n, r = 2, 2
    gens = data.draw(st.lists(vec(p, n, r), max_size=3))
    sub = Submodule.span(gens, p, n, r)
    assert sub.length() == log_order(closure(gens, p, n, r), p)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_intersection_matches_enumeration(data):
    p, n, r = 2, 2, 2
    g1 = data.draw(st.lists(vec(p, n, r), max_size=2))
    g2 = data.draw(st.lists(vec(p, n, r), max_size=2))
    a, b = closure(g1, p, n, r), closure(g2, p, n, r)
    inter = Submodule.span(g1, p, n, r).intersect(Submodule.span(g2, p, n, r))
    assert inter.length() == log_order(a & b, p)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_kernel_matches_enumeration(data):
    p, n, r = 2, 2, 2
    A = [list(data.draw(vec(p, n, r))) for _ in range(r)]
    ker = kernel(A, p, n)
    brute = [x for x in product(range(p ** n), repeat=r) if not any(apply(A, x, p ** n))]
    assert ker.length() == log_order(brute, p)
    assert all(not any(apply(A, g, p ** n)) for g in ker.gens)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_smith_diagonalizes(data):
    p, n, r = 3, 2, 3
    mod = p ** n
    A = [list(data.draw(vec(p, n, r))) for _ in range(r)]
    vals, P, Q = smith(A, p, n)
    D = matmul(matmul(P, A, mod), Q, mod)
    for i in range(r):
        for j in range(r):
            if i != j:
                assert D[i][j] == 0
        assert valuation(D[i][i], p, n) == vals[i]


def test_order_relations():
    p, n, r = 2, 3, 2
    big = Submodule.span([(1, 0), (0, 1)], p, n, r)
    small = Submodule.span([(2, 0)], p, n, r)
    assert small <= big and not big <= small
    assert big == Submodule.whole(p, n, r)
    assert (small + Submodule.zero(p, n, r)) == small
    assert small.project([0]).length() == 2
    assert big.scale(4).length() == 2
