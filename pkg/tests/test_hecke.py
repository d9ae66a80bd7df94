from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from muord.datum import GlobalDatum, PlaceDatum, Weight, canonical_heights, enumerate_places
from muord.hecke import (
    EmptyS2,
    FlagState,
    HeckeTransition,
    IndexOutOfRange,
    Infeasible,
    MissingValuation,
    NotBad,
    N_constant,
    bad_norm_exponent,
    bad_test,
    classicality_check,
    complement_bounds,
    enumerate_transitions,
    exponent_formula,
    inf_kappa_lambda,
    l_sigma_profile,
    n_constant,
    sample_report,
    sample_transitions,
    search_l_sigma_violation,
    transition,
)

F = Fraction
L12 = PlaceDatum.from_lists("L", [1, 2], total=3)
U13 = PlaceDatum("U", ((1, 3),))
U11 = PlaceDatum("U", ((1, 1),))


def test_n_constant_examples():
    assert n_constant(L12, 1) == 3
    assert n_constant(PlaceDatum.from_lists("L", [2, 2], total=3), 2) == 2 * 2 * 1
    assert n_constant(PlaceDatum("U", ((2, 2), (2, 2))), 2) == 2 * 16 // 4
    with pytest.raises(IndexOutOfRange):
        n_constant(L12, 3)


def test_N_constant_examples():
    assert N_constant(L12, 1, [(0, 0), (0, 0)]) == 3
    assert N_constant(L12, 1, [(5, 3), (5, 3)]) == 8
    assert N_constant(U13, 2, [(4, 7)]) == 2 + 7


def test_complement_bounds_examples():
    assert complement_bounds(L12, 1).first == (0, 1)
    cb = complement_bounds(U13, 1)
    assert (cb.first[0], cb.second[0]) == (0, 2)
    assert complement_bounds(L12, 2).first == (0, 0)


def _state_l12(h1):
    return FlagState(L12, (h1, (F(1), F(2))), 4)


def test_transition_example():
    st_ = _state_l12((F(1, 2), F(1)))
    assert st_.deg(1) == F(3, 2) and st_.is_valid()
    tr = transition(st_, 1, {"L0": (F(0), F(1)), "meet:2": (F(0), F(1))})
    assert tr.successor.deg(1) == 2
    assert tr.successor.deg(2) == 3


def test_transition_infeasible_names_constraint():
    st_ = _state_l12((F(1, 2), F(1)))
    with pytest.raises(Infeasible) as e:
        transition(st_, 1, {"L0": (F(0), F(0)), "meet:2": (F(0), F(0))})
    assert "complement-bound" in e.value.violations


def test_enumeration_agrees_with_direct_transition():
    st_ = _state_l12((F(1, 2), F(1)))
    trs = list(enumerate_transitions(st_, 1))
    assert trs
    for tr in trs:
        again = transition(st_, 1, tr.choice)
        assert again.successor == tr.successor


def _fake(place, i, succ_deg_row, choice=None):
    state = FlagState.maximal(place, 4)
    rows = list(state.degrees)
    rows[i - 1] = succ_deg_row
    return HeckeTransition(state, i, choice or {}, FlagState(place, tuple(rows), 4))


def test_bad_test_examples():
    top = FlagState.maximal(L12)
    assert not bad_test(HeckeTransition(top, 1, {}, top), F(1, 10))
    assert bad_test(_fake(L12, 1, (F(0), F(1))), F(1, 10))
    # middle index of an inert place: t = 2, d = 2, deg H' = 1/2 is good
    assert not bad_test(_fake(U11, 1, (F(1, 4), F(1, 4))), F(1, 10))
    with pytest.raises(ValueError):
        bad_test(HeckeTransition(top, 1, {}, top), F(1))


def test_l_sigma_examples():
    tr = _fake(L12, 1, (F(1), F(1)), {"L0": (F(1, 4), F(5, 4))})
    assert l_sigma_profile(tr).l == (F(1, 4), F(1, 4))
    top = FlagState.maximal(L12, 4)
    for tr in enumerate_transitions(top, 1):
        assert set(l_sigma_profile(tr).l) == {0}
    good = HeckeTransition(top, 1, {"L0": (F(0), F(1))}, top)
    with pytest.raises(NotBad):
        l_sigma_profile(good, eps=F(1, 8), alpha=F(1, 10))


@pytest.mark.parametrize("place", [L12, U13, PlaceDatum("U", ((2, 2),)),
                                   PlaceDatum.from_lists("L", [1, 3], total=4)], ids=str)
def test_bad_transitions_have_large_complement(place):
    alpha = F(1, 10)
    for i in canonical_heights(place):
        s = sample_transitions(place, i, 500, 4, seed=3)
        for k in range(len(s)):
            tr = s.transition(k)
            if bad_test(tr, alpha):
                assert l_sigma_profile(tr).total >= 1 - alpha


def test_bad_norm_exponent_worked_example():
    # v = 0, n = 3, inf = 10, f = 2, eps = 1/100, alpha = 1/20
    e = bad_norm_exponent(L12, 1, [(5, 5), (6, 6)], 0, F(1, 100), F(1, 20), {2: "d"})
    assert e == exponent_formula(0, 3, 10, 2, F(1, 100), F(1, 20))
    assert e == 3 - (1 - F(1, 20) - F(4, 100)) * 10 == F(-61, 10)


def test_bad_norm_exponent_zero_weight():
    e = bad_norm_exponent(L12, 1, [(0, 0), (0, 0)], F(1, 2), F(1, 8), F(1, 4))
    assert e == F(1, 2) + 3


@given(st.integers(1, 40), st.integers(0, 10), st.integers(-5, 5),
       st.sampled_from([F(1, 100), F(1, 16), F(1, 8)]), st.sampled_from([F(1, 20), F(1, 4)]))
def test_bad_norm_exponent_monotone(inf, extra, v, eps, alpha):
    w = lambda m: [(m, 0), (100, 0)]  # noqa: E731  S_2 = {sigma_1}
    e = lambda m, v=v, eps=eps, alpha=alpha: bad_norm_exponent(L12, 1, w(m), v, eps, alpha)  # noqa: E731
    assert e(inf + extra + 1) < e(inf)
    assert e(inf, v=v + 1) > e(inf)
    assert e(inf, eps=eps * 2) > e(inf)
    assert e(inf, alpha=alpha * 2) > e(inf)


def test_empty_s2():
    with pytest.raises(EmptyS2):
        inf_kappa_lambda([(1, 1)], [])


def _weight(place, pairs):
    return Weight.from_extremals(GlobalDatum((place,)), [pairs])


def test_classicality_examples():
    p = PlaceDatum("L", ((2, 1),))
    w = _weight(p, [(2, 1)])
    rep = classicality_check(p, w, {(0, 1): F(0)})
    assert rep.verdict and rep.conditions[0].closed_form == ("f*a*b", 2)
    assert not classicality_check(p, w, {(0, 1): F(1)}).verdict
    rep = classicality_check(L12, _weight(L12, [(2, 2), (2, 2)]), {(0, 1): F(0), (0, 2): F(0)})
    assert [c.n for c in rep.conditions] == [3, 3] and rep.verdict
    with pytest.raises(MissingValuation):
        classicality_check(L12, _weight(L12, [(2, 2), (2, 2)]), {(0, 1): F(0)})


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 6), st.integers(0, 6)),
                min_size=2, max_size=2),
       st.lists(st.integers(-4, 8), min_size=4, max_size=4))
def test_classicality_invariant_under_place_order(rows, vals):
    places = [PlaceDatum.from_lists("L", [a], total=3) for a, _, _ in rows]
    ext = [[(k, l)] for _, k, l in rows]
    def verdict(order):
        g = GlobalDatum(tuple(places[o] for o in order))
        w = Weight.from_extremals(g, [ext[o] for o in order])
        v = {}
        for new, old in enumerate(order):
            for k in range(1, len(canonical_heights(places[old])) + 1):
                v[(new, k)] = F(vals[2 * old + k - 1])
        return classicality_check(g, w, v).verdict
    assert verdict([0, 1]) == verdict([1, 0])


@pytest.mark.parametrize("place", [p for c in "LU" for p in enumerate_places(c, 1, 3)
                                   if p.flag_length], ids=str)
def test_maximal_state_is_fixed(place):
    top = FlagState.maximal(place, 2)
    for i in range(1, place.flag_length + 1):
        succ = [tr.successor for tr in enumerate_transitions(top, i)]
        assert succ and all(s == top for s in succ)


@pytest.mark.parametrize("place", [L12, U13, PlaceDatum("U", ((2, 2),))], ids=str)
def test_sampled_transitions_monotone_and_exact(place):
    for i in range(1, place.flag_length + 1):
        s = sample_transitions(place, i, 2000, 4, seed=7)
        rep = sample_report(s)
        assert len(s) >= 2000 and rep.ok
        for k in range(0, len(s), max(1, len(s) // 40)):
            tr = s.transition(k)
            again = transition(tr.state, i, tr.choice)
            assert again.successor == tr.successor


def test_sampling_is_seeded():
    a = sample_transitions(L12, 1, 300, 4, seed=11)
    b = sample_transitions(L12, 1, 300, 4, seed=11)
    assert (a.X == b.X).all()


@pytest.mark.parametrize("place", [L12, U13, PlaceDatum("U", ((1, 2), (1, 2)))], ids=str)
def test_s1_cap_never_broken(place):
    for k in range(1, len(canonical_heights(place)) + 1):
        assert search_l_sigma_violation(place, k, F(1, 8), F(1, 4), 4) is None
