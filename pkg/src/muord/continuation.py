"""Bookkeeping for the continuation argument, run on the degree model.

Four pieces: how many U_i steps push a degree into the target band, the formal
good/bad expansion of U^N, a declared model of valuation growth for the
resulting series, and the order in which operators and places are handled.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

from .datum import (
    GlobalDatum,
    PlaceDatum,
    Weight,
    canonical_heights,
    max_degrees,
    partitions,
    sigma_classes,
)
from .gridsolve import Expr, System, total
from .hecke import (
    FlagState,
    HeckeTransition,
    _flag_expr,
    _make,
    bad_test,
    inf_kappa_lambda,
    n_constant,
    t_factor,
    transition_model,
)


class StuckState(RuntimeError):
    """The worst-case degree stopped increasing before reaching the target band."""

    def __init__(self, degree: Fraction, witness: HeckeTransition | None = None):
        self.degree = degree
        self.witness = witness
        super().__init__(f"no progress from deg H_i = {degree}")


class ScheduleFails(RuntimeError):
    def __init__(self, step: "ScheduleStep", schedule: "Schedule"):
        self.step = step
        self.schedule = schedule
        super().__init__(
            f"place {step.place}, index {step.k}: n + v(alpha) = {step.lhs} is not below "
            f"(1 - 2f eps) K = {step.rhs}")


# ---------------------------------------------------------------- contraction


@dataclass(frozen=True)
class ContractionStep:
    before: Fraction          # worst-case lower bound on deg H_i entering the step
    after: Fraction           # worst-case lower bound after one application of U_i
    witness: HeckeTransition = field(compare=False, repr=False)


@dataclass(frozen=True)
class ContractionResult:
    place: PlaceDatum
    k: int
    gamma: Fraction
    eps: Fraction
    D: int
    start: Fraction
    target: Fraction
    steps: tuple[ContractionStep, ...]

    @property
    def N(self) -> int:
        return len(self.steps)

    @property
    def trajectory(self) -> tuple[Fraction, ...]:
        return (self.start,) + tuple(s.after for s in self.steps)


def _grid_ceil(x: Fraction, D: int) -> Fraction:
    return Fraction(math.ceil(x * D), D)


class _WorstSuccessor:
    """x -> least deg H_i' over grid transitions from states in U_1 with deg H_i = x."""

    def __init__(self, place: PlaceDatum, k: int, eps: Fraction, D: int,
                 eps_choices: Mapping[int, str]):
        self.place, self.D = place, D
        heights, d = canonical_heights(place), max_degrees(place)
        self.i = heights[k - 1]
        self.model = transition_model(place, self.i)
        n = place.n_indices
        self.deg_H = Expr.var(("agg", "H"))
        self.deg_Y = Expr.var(("agg", "Y"))
        self.opens = []
        for j, (A, dj) in enumerate(zip(heights, d), start=1):
            if j != k and eps_choices.get(j, "eps") == "eps":
                self.opens.append(total(_flag_expr(place, "H", A, t) for t in range(n)).rel(
                    ">=", dj - eps, f"open:{j}"))
        # branch on the state row, the complement and the new row first: the
        # integrality obstructions live there
        n_rows = [("H", self.i, t) for t in range(n)] + [("Y", self.i, t) for t in range(n)]
        comp = [("c", name, t) for name in self.model.choice_names[:2]
                if not name.startswith(("sum", "meet", "lift")) for t in range(n)]
        self.priority = n_rows + comp
        self.cache: dict = {}

    def _system(self, extra) -> System:
        s = self.model.system
        return System(list(s.variables), dict(s.bounds),
                      list(s.constraints) + self.opens + list(extra), list(s.implications))

    def __call__(self, x: Fraction):
        if x in self.cache:
            return self.cache[x]
        at_x = self.deg_H.rel("==", x, "start")
        sol = self._system([at_x]).first(self.D, self.priority)
        if sol is None:
            self.cache[x] = None
            return None
        # feasibility of deg H_i' <= y is monotone in y: bisect on the grid
        lo, hi = int(x * self.D), int(self.deg_Y.value(sol) * self.D)
        best = sol
        while lo < hi:
            mid = (lo + hi) // 2
            probe = self.deg_Y.rel("<=", Fraction(mid, self.D), "probe")
            s = self._system([at_x, probe]).first(self.D, self.priority)
            if s is None:
                lo = mid + 1
            else:
                hi, best = int(self.deg_Y.value(s) * self.D), s
        self.cache[x] = (Fraction(hi, self.D), best)
        return self.cache[x]

    def witness(self, sol) -> HeckeTransition:
        n, top = self.place.n_indices, self.place.flag_length
        state = FlagState(self.place, tuple(tuple(sol[("H", j, t)] for t in range(n))
                                            for j in range(1, top + 1)), self.D)
        return _make(self.model, state, sol)


def contraction_steps(place: PlaceDatum, k: int, gamma, D: int = 4, eps=Fraction(1, 4),
                      eps_choices: Mapping[int, str] | None = None) -> ContractionResult:
    """Worst-case number of U_i steps from deg H_i >= d_i - t*gamma to deg H_i >= d_i - eps.

    ``k`` is the canonical index and i = A_k. States range over the grid points
    of U_1 (every other canonical member within ``eps`` of its maximum, for the
    indices chosen as 'eps'). At each step the lower bound moves to the least
    successor degree reachable from any state at or above it.
    """
    gamma, eps = Fraction(gamma), Fraction(eps)
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    if not 0 < eps < Fraction(1, 2):
        raise ValueError("eps must lie in (0, 1/2)")
    if D < 2:
        raise ValueError("grid denominator must be at least 2")
    heights = canonical_heights(place)
    if not 1 <= k <= len(heights):
        raise ValueError(f"canonical index {k} outside 1..{len(heights)}")
    choices = dict(eps_choices or {})
    d = max_degrees(place)[k - 1]
    t = t_factor(place, heights[k - 1])
    start = _grid_ceil(d - t * gamma, D)
    target = d - eps
    W = _WorstSuccessor(place, k, eps, D, choices)
    grid = [Fraction(m, D) for m in range(int(start * D), d * D + 1)]
    steps: list[ContractionStep] = []
    low = start
    while low < target:
        best = None
        for x in grid:
            if x < low:
                continue
            r = W(x)
            if r is not None and (best is None or r[0] < best[0]):
                best = r
        if best is None:
            break  # no state of U_1 at or above the bound: nothing left to move
        nxt, sol = best
        if nxt <= low:
            raise StuckState(low, W.witness(sol))
        steps.append(ContractionStep(low, nxt, W.witness(sol)))
        low = nxt
    return ContractionResult(place, k, gamma, eps, D, start, target, tuple(steps))


# ---------------------------------------------------------------- decompo


def _render(word: Sequence[str]) -> str:
    return "∘".join(word)


@dataclass(frozen=True)
class OperatorTree:
    """Formal expansion of U^N with U = good + bad.

    Words list operators left to right as written in a composite, so the last
    letter acts first. Class j < N collects U^{N-1-j} ∘ good ∘ bad^j; class N is bad^N.
    """

    N: int
    labels: tuple[str, str]
    leaves: Counter                      # word -> multiplicity in the expansion of U^N
    classes: tuple[tuple[str, Counter], ...]

    @property
    def leaf_count(self) -> int:
        return sum(self.leaves.values())

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.classes)

    @property
    def identity_holds(self) -> bool:
        merged = Counter()
        for _, words in self.classes:
            merged.update(words)
        return merged == self.leaves

    def class_of(self, word: Sequence[str]) -> int:
        good, bad = self.labels
        if len(word) != self.N or any(w not in self.labels for w in word):
            raise ValueError(f"not a word of length {self.N} in {self.labels}")
        j = 0
        while j < self.N and word[self.N - 1 - j] == bad:
            j += 1
        return j


def decompo_expand(N: int, labels: tuple[str, str] = ("good", "bad")) -> OperatorTree:
    if N < 1:
        raise ValueError("N must be at least 1")
    good, bad = labels
    leaves = Counter(tuple(w) for w in product(labels, repeat=N))
    classes = []
    for j in range(N):
        head = N - 1 - j
        suffix = (good,) + (bad,) * j
        words = Counter(tuple(h) + suffix for h in product(labels, repeat=head))
        name = _render(("U",) * head + suffix)
        classes.append((name, words))
    classes.append((_render((bad,) * N), Counter({(bad,) * N: 1})))
    return OperatorTree(N, (good, bad), leaves, tuple(classes))


def classify_path(transitions: Sequence[HeckeTransition], alpha) -> tuple[str, ...]:
    """The word of a trajectory, listed as a composite (last applied first)."""
    return tuple("bad" if bad_test(tr, alpha) else "good" for tr in reversed(transitions))


# ---------------------------------------------------------------- series


MODEL_NOTE = ("declared model: each bad factor gains c = -exponent in valuation; "
              "A_N = ceil(N*c) when c > 0, else 0")


@dataclass(frozen=True)
class SeriesLedger:
    exponent: Fraction
    rows: tuple[tuple[int, int, int], ...]   # (N, bad factors, A_N)
    note: str = MODEL_NOTE

    @property
    def gain(self) -> Fraction:
        return -self.exponent

    @property
    def convergent(self) -> bool:
        return self.gain > 0

    def A(self, N: int) -> int:
        return self.rows[N][2]


def series_valuations(bad_exponent, N_max: int) -> SeriesLedger:
    e = Fraction(bad_exponent)
    if N_max < 0:
        raise ValueError("N_max must be nonnegative")
    c = -e
    rows = tuple((N, N, math.ceil(N * c) if c > 0 else 0) for N in range(N_max + 1))
    return SeriesLedger(e, rows)


# ---------------------------------------------------------------- schedule


@dataclass(frozen=True)
class ScheduleStep:
    place: int
    k: int
    height: int
    f: int
    K: int
    eps_choices: tuple[tuple[int, str], ...]
    s2: tuple[int, ...]
    n: int
    v_alpha: Fraction
    eps: Fraction

    @property
    def lhs(self) -> Fraction:
        return self.n + self.v_alpha

    @property
    def rhs(self) -> Fraction:
        return (1 - 2 * self.f * self.eps) * self.K

    @property
    def admissible(self) -> bool:
        return self.lhs < self.rhs

    @property
    def eps_max(self) -> Fraction | None:
        """Supremum of the admissible eps in (0, 1/2), None when there are none."""
        half = Fraction(1, 2)
        lhs, K, f = self.lhs, self.K, self.f
        if K > 0:
            return min((K - lhs) / (2 * f * K), half) if lhs < K else None
        if K == 0:
            return half if lhs < 0 else None
        return half if (lhs - K) / (2 * f * -K) < half else None


@dataclass(frozen=True)
class Schedule:
    steps: tuple[ScheduleStep, ...]
    note: str = "places are handled one after another; the order of places is immaterial"

    @property
    def ok(self) -> bool:
        return all(s.admissible for s in self.steps)

    def first_failure(self) -> ScheduleStep | None:
        return next((s for s in self.steps if not s.admissible), None)

    def for_place(self, p: int) -> tuple[ScheduleStep, ...]:
        return tuple(s for s in self.steps if s.place == p)


def place_schedule(place: PlaceDatum, p_idx: int, weight: Weight,
                   valuations: Mapping[tuple[int, int], Fraction], eps) -> list[ScheduleStep]:
    eps = Fraction(eps)
    heights = canonical_heights(place)
    classes = sigma_classes(place)
    kl = [(weight.kappa(p_idx, s), weight.lam(p_idx, s)) for s in range(place.f)]
    K = {k: inf_kappa_lambda(kl, sorted(classes[k])) for k in range(1, len(heights) + 1)}
    order = sorted(K, key=lambda k: (-K[k], k))
    steps, done = [], []
    for k in order:
        if (p_idx, k) not in valuations:
            from .hecke import MissingValuation
            raise MissingValuation(f"no valuation for place {p_idx}, index {k}")
        choices = {j: ("d" if j in done else "eps") for j in range(1, len(heights) + 1)}
        part = partitions(place, choices, k)
        # processed indices have K >= K_k, so the infimum over S_2 is attained on Sigma_k
        assert inf_kappa_lambda(kl, sorted(part.s2)) == K[k]
        steps.append(ScheduleStep(p_idx, k, heights[k - 1], place.f, K[k],
                                  tuple(sorted(choices.items())), tuple(sorted(part.s2)),
                                  n_constant(place, heights[k - 1]),
                                  Fraction(valuations[(p_idx, k)]), eps))
        done.append(k)
    return steps


def extension_schedule(datum: GlobalDatum | PlaceDatum, weight: Weight,
                       valuations: Mapping[tuple[int, int], Fraction], eps=Fraction(1, 100),
                       raise_on_failure: bool = True) -> Schedule:
    """Operators of each place in decreasing order of K_k, places in input order.

    Step k is admissible iff n_{A_k} + v(alpha_k) < (1 - 2 f eps) K_k.
    """
    if isinstance(datum, PlaceDatum):
        datum = GlobalDatum((datum,))
    eps = Fraction(eps)
    if not 0 < eps < Fraction(1, 2):
        raise ValueError("eps must lie in (0, 1/2)")
    weight.check(datum)
    steps = []
    for p_idx, place in enumerate(datum.places):
        steps += place_schedule(place, p_idx, weight, valuations, eps)
    sched = Schedule(tuple(steps))
    bad = sched.first_failure()
    if bad is not None and raise_on_failure:
        raise ScheduleFails(bad, sched)
    return sched
