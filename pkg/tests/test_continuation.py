import math
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from muord.continuation import (
    MODEL_NOTE,
    ScheduleFails,
    StuckState,
    classify_path,
    contraction_steps,
    decompo_expand,
    extension_schedule,
    series_valuations,
)
from muord.datum import GlobalDatum, PlaceDatum, Weight, canonical_heights, max_degrees
from muord.hecke import FlagState, bad_test, enumerate_transitions, in_open, t_factor

F = Fraction
L12 = PlaceDatum.from_lists("L", [1, 2], total=3)


def _all_states(place, D):
    n, top = place.n_indices, place.flag_length
    axes = [[F(m, D) for m in range(min(c, j) * D + 1)]
            for j in range(1, top + 1) for c in place.caps]
    for flat in product(*axes):
        rows = tuple(flat[r * n:(r + 1) * n] for r in range(top))
        s = FlagState(place, rows, D)
        if s.is_valid():
            yield s


def _brute_contraction(place, k, gamma, D, eps):
    """Same iteration as contraction_steps, with W computed by exhaustive enumeration."""
    i = canonical_heights(place)[k - 1]
    d = max_degrees(place)[k - 1]
    worst = {}
    for s in _all_states(place, D):
        if not in_open(s, eps, {}, k):
            continue
        for tr in enumerate_transitions(s, i):
            x, y = s.deg(i), tr.successor.deg(i)
            worst[x] = min(worst.get(x, y), y)
    low = F(math.ceil((d - t_factor(place, i) * gamma) * D), D)
    N = 0
    while low < d - eps:
        cand = [y for x, y in worst.items() if x >= low]
        if not cand:
            break
        nxt = min(cand)
        assert nxt > low
        low, N = nxt, N + 1
    return N


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("gamma", [F(0), F(1, 4), F(1, 2), F(3, 4)])
def test_contraction_matches_brute_force(k, gamma):
    r = contraction_steps(L12, k, gamma, 4, F(1, 4))
    assert r.N == _brute_contraction(L12, k, gamma, 4, F(1, 4))


def test_contraction_l12_values():
    assert [contraction_steps(L12, 1, g).N for g in (0, F(1, 4), F(1, 2), F(3, 4))] == [0, 0, 1, 2]


def test_contraction_trajectory_and_witnesses():
    r = contraction_steps(L12, 1, F(3, 4))
    traj = r.trajectory
    assert list(traj) == sorted(set(traj))
    assert traj[-1] >= r.target
    for step in r.steps:
        w = step.witness
        assert w.state.is_valid() and w.state.deg(1) >= step.before
        assert w.successor.deg(1) == step.after


@pytest.mark.parametrize("place", [L12, PlaceDatum("U", ((1, 3),)), PlaceDatum("U", ((2, 2),))],
                         ids=str)
def test_contraction_monotone(place):
    for k in range(1, len(canonical_heights(place)) + 1):
        Ns = [contraction_steps(place, k, g).N for g in (0, F(1, 4), F(1, 2), F(3, 4))]
        assert Ns == sorted(Ns) and Ns[0] == 0
        assert contraction_steps(place, k, F(3, 4), eps=F(3, 8)).N <= Ns[-1]


def test_contraction_rejects_bad_parameters():
    with pytest.raises(ValueError):
        contraction_steps(L12, 1, 1)
    with pytest.raises(ValueError):
        contraction_steps(L12, 1, F(1, 2), eps=F(1, 2))
    with pytest.raises(ValueError):
        contraction_steps(L12, 3, F(1, 2))
    assert issubclass(StuckState, RuntimeError)


def test_decompo_small():
    t = decompo_expand(1)
    assert t.class_names == ("good", "bad") and t.identity_holds
    t = decompo_expand(2)
    assert t.class_names == ("U∘good", "good∘bad", "bad∘bad")
    assert [sum(c.values()) for _, c in t.classes] == [2, 1, 1]
    t = decompo_expand(3)
    assert [sum(c.values()) for _, c in t.classes] == [4, 2, 1, 1]
    assert t.leaf_count == 8 and t.identity_holds


@pytest.mark.parametrize("N", range(1, 7))
def test_decompo_classes_partition_words(N):
    t = decompo_expand(N)
    assert t.leaf_count == 2 ** N and t.identity_holds
    for j, (_, words) in enumerate(t.classes):
        assert sum(words.values()) == (2 ** (N - 1 - j) if j < N else 1)
        assert all(t.class_of(w) == j for w in words)


def test_classify_path_lists_last_transition_first():
    top = FlagState.maximal(L12)
    tr = next(enumerate_transitions(top, 1))
    assert not bad_test(tr, F(1, 10))
    assert classify_path([tr, tr], F(1, 10)) == ("good", "good")


def test_series_worked_example():
    led = series_valuations(F(-461, 50), 5)
    assert led.convergent and led.A(5) == 47 and led.note == MODEL_NOTE
    led = series_valuations(F(-61, 10), 3)
    assert [led.A(N) for N in range(4)] == [0, 7, 13, 19]
    assert not series_valuations(0, 4).convergent
    assert {r[2] for r in series_valuations(F(1, 2), 4).rows} == {0}


@given(st.fractions(min_value=F(-20), max_value=F(-1, 100), max_denominator=100),
       st.integers(1, 30))
def test_series_growth(e, N):
    led = series_valuations(e, N)
    As = [led.A(n) for n in range(N + 1)]
    c = -e
    assert all(a <= b for a, b in zip(As, As[1:]))
    if c >= 1:
        assert all(a < b for a, b in zip(As, As[1:]))
    assert all(b - a in (math.floor(c), math.ceil(c), math.floor(c) + 1)
               for a, b in zip(As, As[1:]))
    assert As[-1] >= N * c


def _w(place, pairs):
    return Weight.from_extremals(GlobalDatum((place,)), [pairs])


def test_schedule_order_and_s2():
    # K_1 = inf over sigma_1 = 4, K_2 = 6: operator 2 comes first
    w = _w(L12, [(4, 0), (6, 0)])
    s = extension_schedule(L12, w, {(0, 1): F(0), (0, 2): F(0)}, eps=F(1, 100))
    assert [st_.k for st_ in s.steps] == [2, 1]
    assert [st_.K for st_ in s.steps] == [6, 4]
    assert s.steps[0].s2 == (1,) and s.steps[1].s2 == (0, 1)
    assert s.ok


def test_schedule_single_operator_and_places():
    p = PlaceDatum("L", ((2, 1),))
    g = GlobalDatum((p, L12))
    w = Weight.from_extremals(g, [[(3, 0)], [(4, 0), (6, 0)]])
    vals = {(0, 1): F(0), (1, 1): F(0), (1, 2): F(0)}
    s = extension_schedule(g, w, vals)
    assert len(s.for_place(0)) == 1 and [x.k for x in s.for_place(1)] == [2, 1]
    g2 = GlobalDatum((L12, p))
    w2 = Weight.from_extremals(g2, [[(4, 0), (6, 0)], [(3, 0)]])
    vals2 = {(0, 1): F(0), (0, 2): F(0), (1, 1): F(0)}
    assert extension_schedule(g2, w2, vals2).ok == s.ok


def test_schedule_failure_and_eps_max():
    w = _w(L12, [(4, 0), (6, 0)])
    vals = {(0, 1): F(1), (0, 2): F(0)}     # n = 3, 3 + 1 = 4 is not < K_1 = 4
    with pytest.raises(ScheduleFails) as e:
        extension_schedule(L12, w, vals)
    assert e.value.step.k == 1
    s = extension_schedule(L12, w, vals, raise_on_failure=False)
    assert not s.ok and s.first_failure().eps_max is None
    step2 = s.steps[0]
    assert step2.eps_max == F(6 - 3, 2 * 2 * 6)
    assert step2.admissible
