"""Hecke operators at the level of degrees.

Normalisation constants, complement bounds, the degree-transition relation on
Iwahori flags, the good/bad split and the norm bound for the bad part, and the
classicality inequalities.

Index conventions: for a split place the flag H_1 c ... c H_{a+b-1} lives in
A[pi^+] and degrees are indexed by the sorted embeddings; for an inert place the
flag H_1 c ... c H_{(a+b)//2} lives in A[pi] and degrees are indexed by the 2f
embeddings in alpha order, where index t and its partner 2f-1-t are the two
extensions of one real embedding (caps a_sigma and b_sigma).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

from .datum import (
    BadChoice,
    GlobalDatum,
    PlaceDatum,
    Weight,
    canonical_heights,
    degree_profile,
    max_degrees,
    partitions,
)
from .gridsolve import (
    BatchChecker,
    Congruence,
    Expr,
    Implication,
    System,
    between,
    lin,
    total,
)


class IndexOutOfRange(ValueError):
    pass


class Infeasible(ValueError):
    def __init__(self, violations: Sequence[str]):
        self.violations = tuple(violations)
        super().__init__("infeasible transition: " + ", ".join(self.violations))


class NotBad(ValueError):
    pass


class EmptyS2(ValueError):
    pass


class MissingValuation(KeyError):
    pass


# ---------------------------------------------------------------- constants


def is_middle(place: PlaceDatum, i: int) -> bool:
    return place.case == "U" and 2 * i == place.total


def _check_index(place: PlaceDatum, i: int) -> None:
    top = place.total - 1 if place.case == "L" else place.total // 2
    if not 1 <= i <= top:
        raise IndexOutOfRange(f"operator index {i} outside 1..{top}")


def n_constant(place: PlaceDatum, i: int) -> int:
    _check_index(place, i)
    ab = place.total
    if place.case == "L":
        return sum(min(i, a) * min(ab - i, b) for a, b in place.signatures)
    if is_middle(place, i):
        return sum(ab * a for a in place.a) // 2
    return sum(ab * min(i, a) for a in place.a)


def N_constant(place: PlaceDatum, i: int, weight: Sequence[tuple[int, int]]) -> int:
    """n_i plus the weight part; ``weight`` holds (kappa_sigma, lambda_sigma) per sorted sigma."""
    n = n_constant(place, i)
    if len(weight) != place.f:
        raise ValueError("one (kappa, lambda) pair per embedding is required")
    extra = Fraction(0)
    for (a, b), (k, lam) in zip(place.signatures, weight):
        if place.case == "L":
            extra += max(a - i, 0) * k + max(i - a, 0) * lam
        elif is_middle(place, i):
            extra += Fraction(b - a, 2) * lam
        else:
            extra += max(a - i, 0) * k + max(b - a, b - i) * lam
    return n + int(extra)


@dataclass(frozen=True)
class ComplementBounds:
    """Lower bounds on the complement: (L_0, L_0-perp) for a split place,
    (sigma_1, sigma_2) parts of deg L for an inert one; one entry per sorted sigma."""

    first: tuple[Fraction, ...]
    second: tuple[Fraction, ...]


def complement_bounds(place: PlaceDatum, i: int) -> ComplementBounds:
    _check_index(place, i)
    F = Fraction
    if place.case == "L":
        return ComplementBounds(tuple(F(max(a - i, 0)) for a in place.a),
                                tuple(F(max(i - a, 0)) for a in place.a))
    if is_middle(place, i):
        return ComplementBounds(tuple(F(0) for _ in place.a),
                                tuple(F(b - a, 2) for a, b in place.signatures))
    return ComplementBounds(tuple(F(max(a - i, 0)) for a in place.a),
                            tuple(F(max(b - i, b - a, 0)) for a, b in place.signatures))


# ---------------------------------------------------------------- flags


def _flag_expr(place: PlaceDatum, prefix: str, j: int, t: int) -> Expr:
    """Degree at index t of H_j, 0 <= j <= a+b, in terms of the stored part of the flag."""
    ab, top = place.total, place.flag_length
    if j == 0:
        return Expr()
    if place.case == "L":
        return Expr(const=place.a[t]) if j == ab else Expr.var((prefix, j, t))
    if j <= top:
        return Expr.var((prefix, j, t))
    # H_j = H_{a+b-j}^perp
    return place.caps[t] - (ab - j) + _flag_expr(place, prefix, ab - j, place.partner(t))


def flag_constraints(place: PlaceDatum, prefix: str) -> list:
    out = []
    ab, n = place.total, place.n_indices
    for t in range(n):
        for j in range(1, ab + 1):
            step = _flag_expr(place, prefix, j, t) - _flag_expr(place, prefix, j - 1, t)
            out += between(step, 0, 1, f"flag-step:{prefix}{j}")
        for j in range(1, place.flag_length + 1):
            out.append(_flag_expr(place, prefix, j, t).rel("<=", min(place.caps[t], j),
                                                            f"flag-cap:{prefix}{j}"))
        if place.case == "U" and ab % 2 == 0:
            m = ab // 2
            out.append(_flag_expr(place, prefix, m, t).rel(
                "==", place.caps[t] - m + _flag_expr(place, prefix, m, place.partner(t)),
                f"flag-isotropic:{prefix}{m}"))
    return out


def _flag_vars(place: PlaceDatum, prefix: str):
    return [(prefix, j, t) for j in range(1, place.flag_length + 1) for t in range(place.n_indices)]


@dataclass(frozen=True)
class FlagState:
    place: PlaceDatum
    degrees: tuple[tuple[Fraction, ...], ...]   # degrees[j-1][t]
    D: int = 4

    def __post_init__(self):
        if len(self.degrees) != self.place.flag_length:
            raise ValueError(f"flag needs {self.place.flag_length} rows")
        if any(len(r) != self.place.n_indices for r in self.degrees):
            raise ValueError(f"each row needs {self.place.n_indices} partial degrees")
        object.__setattr__(self, "degrees",
                           tuple(tuple(Fraction(x) for x in r) for r in self.degrees))

    def deg(self, j: int) -> Fraction:
        return sum(self.degrees[j - 1], Fraction(0))

    def partial(self, j: int, t: int) -> Fraction:
        return self.degrees[j - 1][t]

    def Deg(self) -> tuple[Fraction, ...]:
        """Degrees of the canonical members H_{A_1}, ..., H_{A_s}."""
        return tuple(self.deg(A) for A in canonical_heights(self.place))

    def values(self, prefix: str = "H") -> dict:
        return {(prefix, j, t): x for j, r in enumerate(self.degrees, start=1)
                for t, x in enumerate(r)}

    def violations(self) -> list[str]:
        sysm = System()
        for v in _flag_vars(self.place, "H"):
            sysm.add_var(v, 0, self.place.total)
        sysm.extend(flag_constraints(self.place, "H"))
        out = sysm.violations(self.values())
        if any((x * self.D).denominator != 1 for r in self.degrees for x in r):
            out.append("grid")
        return out

    def is_valid(self) -> bool:
        return not self.violations()

    @classmethod
    def maximal(cls, place: PlaceDatum, D: int = 4) -> "FlagState":
        """The mu-ordinary-multiplicative point: every H_j at its maximal degrees."""
        return cls(place, tuple(tuple(Fraction(min(c, j)) for c in place.caps)
                                for j in range(1, place.flag_length + 1)), D)

    @classmethod
    def from_columns(cls, place: PlaceDatum, steps: Sequence[Sequence[int]], D: int) -> "FlagState":
        """Build from per-sorted-sigma step sequences of length a+b in grid units.

        For an inert place the column describes the sigma_1 line of the full flag and
        the sigma_2 line is its orthogonal reflection.
        """
        ab, top, f = place.total, place.flag_length, place.f
        rows = [[Fraction(0)] * place.n_indices for _ in range(top)]
        for k, col in enumerate(steps):
            cols = {k: list(col)}
            if place.case == "U":
                cols[place.partner(k)] = [D - x for x in reversed(col)]
            for t, st in cols.items():
                acc = 0
                for j in range(1, top + 1):
                    acc += st[j - 1]
                    rows[j - 1][t] = Fraction(acc, D)
        return cls(place, tuple(tuple(r) for r in rows), D)


# ---------------------------------------------------------------- transitions


@dataclass(frozen=True)
class TransitionModel:
    place: PlaceDatum
    i: int
    system: System
    choice_names: tuple[str, ...]
    successor: dict = field(repr=False)     # ("Y", j, t) -> Expr in state and choice unknowns
    aggregates: dict = field(repr=False, default_factory=dict)   # ("agg", name) -> Expr

    @property
    def n(self) -> int:
        return self.place.n_indices


class _Builder:
    def __init__(self, place: PlaceDatum, i: int):
        self.place, self.i = place, i
        self.sys = System()
        self.names: list[str] = []
        self.n = place.n_indices
        self.caps = place.caps
        self.aggs: dict = {}

    def H(self, j, t) -> Expr:
        return _flag_expr(self.place, "H", j, t)

    def Y(self, j, t) -> Expr:
        return _flag_expr(self.place, "Y", j, t)

    def new(self, name: str, ub) -> list[Expr]:
        """A subgroup degree vector: unknowns (c, name, t) with 0 <= deg_t <= ub[t]."""
        self.names.append(name)
        out = []
        for t in range(self.n):
            v = ("c", name, t)
            self.sys.add_var(v, 0, ub[t])
            out.append(Expr.var(v))
        return out

    def add(self, *cs):
        for c in cs:
            if isinstance(c, list):
                self.sys.extend(c)
            else:
                self.sys.add(c)

    def agg(self, name: str, expr: Expr) -> Expr:
        """A total degree as its own unknown; only there to help propagation."""
        v = ("agg", name)
        lo = hi = expr.const
        for u, c in expr.terms.items():
            a, z = self.sys.bounds[u]
            lo, hi = lo + min(c * a, c * z), hi + max(c * a, c * z)
        self.sys.add_var(v, lo, hi)
        self.aggs[v] = expr
        self.add(Expr.var(v).rel("==", expr, f"total:{name}"))
        return Expr.var(v)

    def contain(self, small: Sequence[Expr], big: Sequence[Expr], room: int, caps, why: str):
        """small c big with big/small of height ``room``; per-index quotient caps."""
        for t in range(self.n):
            self.add(between(big[t] - small[t], 0, min(caps[t], max(room, 0)), f"{why}"))


def _bt1_axiom(b: _Builder, j: int, lhs: Expr, rhs) -> Implication:
    """A direct-sum decomposition of a BT_1 with additive degrees forces integral partial degrees."""
    return Implication(lhs.rel("==", rhs, "split"),
                       tuple(Congruence(tuple(b.H(j, t).terms.items()), -b.H(j, t).const, 1)
                             for t in range(b.n)),
                       f"bt1-splitting:{j}")


@lru_cache(maxsize=None)
def transition_model(place: PlaceDatum, i: int) -> TransitionModel:
    _check_index(place, i)
    b = _Builder(place, i)
    ab, top, n, caps = place.total, place.flag_length, place.n_indices, place.caps
    for v in _flag_vars(place, "H"):
        b.sys.add_var(v, 0, ab)
    for v in _flag_vars(place, "Y"):
        b.sys.add_var(v, 0, ab)
    b.add(flag_constraints(place, "H"), flag_constraints(place, "Y"))
    succ: dict = {}
    amb = sum(caps)
    deg = lambda vec: total(vec)  # noqa: E731
    H = lambda j: [b.H(j, t) for t in range(n)]  # noqa: E731
    Y = lambda j: [b.Y(j, t) for t in range(n)]  # noqa: E731

    if place.case == "L":
        cb = complement_bounds(place, i)
        L0 = b.new("L0", [min(c, ab - i) for c in caps])
        for t in range(n):
            b.add(L0[t].rel(">=", cb.first[t], "complement-bound"),
                  (caps[t] - L0[t]).rel("<=", min(caps[t], i), "complement-quotient"))
        gH, gY, gC = b.agg("H", deg(H(i))), b.agg("Y", deg(Y(i))), b.agg("L0", deg(L0))
        b.add((gH + gC).rel("<=", amb, f"submodularity:{i}"),
              gY.rel("==", amb - gC, "successor-total"))
        b.sys.implications.append(_bt1_axiom(b, i, gH + gC, amb))
        prev = None
        for j in range(1, i):
            S = b.new(f"sum:{j}", [min(c, j + ab - i) for c in caps])
            b.contain(L0, S, j, caps, f"containment:L0<=H{j}+L0")
            b.contain(H(j), S, ab - i, caps, f"containment:H{j}<=H{j}+L0")
            if prev is not None:
                b.contain(prev, S, 1, caps, f"containment:chain-sum:{j}")
            b.add((deg(H(j)) + deg(L0)).rel("<=", deg(S), f"submodularity:{j}"))
            for t in range(n):
                succ[("Y", j, t)] = S[t] - L0[t]
            prev = S
        if prev is not None:
            b.contain(prev, [Expr(const=c) for c in caps], 1, caps, "containment:chain-sum:top")
        for t in range(n):
            succ[("Y", i, t)] = caps[t] - L0[t]
        prev = None
        for j in range(i + 1, ab):
            T = b.new(f"meet:{j}", [min(c, j - i) for c in caps])
            b.contain(T, H(j), i, caps, f"containment:H{j}^L0<=H{j}")
            b.contain(T, L0, ab - j, caps, f"containment:H{j}^L0<=L0")
            if prev is not None:
                b.contain(prev, T, 1, caps, f"containment:chain-meet:{j}")
            b.add((deg(H(j)) + deg(L0)).rel("<=", amb + deg(T), f"submodularity:{j}"))
            for t in range(n):
                succ[("Y", j, t)] = caps[t] + T[t] - L0[t]
            prev = T
        if prev is not None:
            b.contain(prev, L0, 1, caps, "containment:chain-meet:top")

    elif not is_middle(place, i):
        cb = complement_bounds(place, i)
        M = b.new("Lpi", [min(c, ab - i) for c in caps])
        Q = b.new("LmodLpi", [min(c, i) for c in caps])
        Lfull = [M[t] + Q[t] for t in range(n)]
        for t in range(n):
            b.add((caps[t] - M[t]).rel("<=", min(caps[t], i), "complement-quotient"))
        for k in range(place.f):
            s1, s2 = k, place.partner(k)
            b.add(Lfull[s2].rel("==", Lfull[s1] + (caps[s2] - caps[s1]), "maximal-isotropy"),
                  Lfull[s1].rel(">=", cb.first[k], "complement-bound"),
                  Lfull[s2].rel(">=", cb.second[k], "complement-bound"))
        gH, gY = b.agg("H", deg(H(i))), b.agg("Y", deg(Y(i)))
        gM, gQ = b.agg("Lpi", deg(M)), b.agg("LmodLpi", deg(Q))
        b.add(gQ.rel("<=", 2 * place.f * i - amb + gM, "isotropy"),
              (gH + gM).rel("<=", amb, f"submodularity:{i}"),
              gY.rel("==", 2 * amb - n * (ab - i) - gQ, "successor-total"))
        b.sys.implications.append(_bt1_axiom(b, i, gH + gM, amb))
        # pi^{-1}(L[pi]) has degree cap + deg L[pi]; images of H_j (j != i) in A/L lie under it
        ceiling = [caps[t] + M[t] for t in range(n)]
        prev_p = prev_s = None
        for j in range(1, i):
            P = b.new(f"sum_pi:{j}", [min(c, j + ab - i) for c in caps])
            b.contain(M, P, j, caps, f"containment:Lpi<=H{j}+Lpi")
            b.contain(H(j), P, ab - i, caps, f"containment:H{j}<=H{j}+Lpi")
            b.contain(P, [Expr(const=c) for c in caps], i - j, caps, f"containment:H{j}+Lpi<=A")
            b.add((deg(H(j)) + deg(M)).rel("<=", deg(P), f"submodularity:{j}"))
            S = b.new(f"sum:{j}", [min(2 * c, j + ab) for c in caps])
            b.contain(Lfull, S, j, caps, f"containment:L<=H{j}+L")
            b.contain(P, S, i, caps, f"containment:H{j}+Lpi<=H{j}+L")
            b.contain(S, ceiling, ab - i - j, [2 * c for c in caps], f"containment:H{j}+L<=pi^-1(Lpi)")
            b.add((deg(P) + deg(Lfull)).rel("<=", deg(S) + deg(M), f"submodularity-pi:{j}"))
            if prev_p is not None:
                b.contain(prev_p, P, 1, caps, f"containment:chain-sum-pi:{j}")
                b.contain(prev_s, S, 1, caps, f"containment:chain-sum:{j}")
            for t in range(n):
                succ[("Y", j, t)] = S[t] - Lfull[t]
            prev_p, prev_s = P, S
        for t in range(n):
            succ[("Y", i, t)] = (2 * caps[t] - (ab - i) + M[place.partner(t)] - M[t] - Q[t])
        prev_w = prev_z = None
        for j in range(i + 1, top + 1):
            W = b.new(f"meet:{j}", [min(c, j - i) for c in caps])
            b.contain(W, H(j), i, caps, f"containment:H{j}^Lpi<=H{j}")
            b.contain(W, M, ab - j, caps, f"containment:H{j}^Lpi<=Lpi")
            b.add((deg(H(j)) + deg(M)).rel("<=", amb + deg(W), f"submodularity:{j}"))
            Z = b.new(f"lift:{j}", [min(2 * c, ab + j) for c in caps])
            lift = [caps[t] + W[t] for t in range(n)]
            b.contain(Lfull, Z, j, caps, f"containment:L<=lift{j}")
            b.contain(lift, Z, i, caps, f"containment:pi^-1(H{j}^Lpi)<=lift{j}")
            b.contain(Z, ceiling, ab - i - j, [2 * c for c in caps], f"containment:lift{j}<=pi^-1(Lpi)")
            b.add((deg(lift) + deg(Lfull)).rel("<=", deg(Z) + deg(M), f"submodularity-pi:{j}"))
            if prev_w is not None:
                b.contain(prev_w, W, 1, caps, f"containment:chain-meet:{j}")
                b.contain(prev_z, Z, 1, caps, f"containment:chain-lift:{j}")
            for t in range(n):
                succ[("Y", j, t)] = Z[t] - Lfull[t]
            prev_w, prev_z = W, Z

    else:
        m = i
        cb = complement_bounds(place, i)
        Lm = b.new("L", [min(c, m) for c in caps])
        for t in range(n):
            b.add((caps[t] - Lm[t]).rel("<=", min(caps[t], m), "complement-quotient"),
                  Lm[t].rel("==", caps[t] - m + Lm[place.partner(t)], "maximal-isotropy"))
        for k in range(place.f):
            b.add(Lm[place.partner(k)].rel(">=", cb.second[k], "complement-bound"))
        gH, gY, gC = b.agg("H", deg(H(m))), b.agg("Y", deg(Y(m))), b.agg("L", deg(Lm))
        b.add((gH + gC).rel("<=", amb, f"submodularity:{m}"),
              gY.rel("==", amb - gC, "successor-total"))
        b.sys.implications.append(_bt1_axiom(b, m, gH + gC, amb))
        prev = None
        for j in range(1, m):
            S = b.new(f"sum:{j}", [min(c, j + m) for c in caps])
            b.contain(Lm, S, j, caps, f"containment:L<=H{j}+L")
            b.contain(H(j), S, m, caps, f"containment:H{j}<=H{j}+L")
            b.contain(S, [Expr(const=c) for c in caps], m - j, caps, f"containment:H{j}+L<=A")
            if prev is not None:
                b.contain(prev, S, 1, caps, f"containment:chain-sum:{j}")
            b.add((deg(H(j)) + deg(Lm)).rel("<=", deg(S), f"submodularity:{j}"))
            for t in range(n):
                succ[("Y", j, t)] = S[t] - Lm[t]
            prev = S
        for t in range(n):
            succ[("Y", m, t)] = caps[t] - Lm[t]

    for (_, j, t), e in succ.items():
        b.add(Expr.var(("Y", j, t)).rel("==", e, f"successor:{j}"))
    # totals go last so the search never branches on them; propagation fixes them
    b.sys.variables = ([v for v in b.sys.variables if v[0] != "agg"]
                       + [v for v in b.sys.variables if v[0] == "agg"])
    return TransitionModel(place, i, b.sys, tuple(b.names), succ, b.aggs)


Choice = Mapping[str, Sequence[Fraction]]


@dataclass(frozen=True)
class HeckeTransition:
    state: FlagState
    i: int
    choice: dict
    successor: FlagState

    @property
    def complement_degrees(self) -> tuple[Fraction, ...]:
        """deg_t of the whole complement (L_0, or L)."""
        c = self.choice
        if "L0" in c:
            return tuple(c["L0"])
        if "L" in c:
            return tuple(c["L"])
        return tuple(x + y for x, y in zip(c["Lpi"], c["LmodLpi"]))


def _choice_values(model: TransitionModel, choice: Choice) -> dict:
    missing = [k for k in model.choice_names if k not in choice]
    extra = [k for k in choice if k not in model.choice_names]
    if missing or extra:
        raise BadChoice(f"choice keys: missing {missing}, unexpected {extra}")
    out = {}
    for name in model.choice_names:
        vec = choice[name]
        if len(vec) != model.n:
            raise BadChoice(f"choice {name!r} needs {model.n} entries")
        for t, x in enumerate(vec):
            out[("c", name, t)] = Fraction(x)
    return out


def transition(state: FlagState, i: int, choice: Choice) -> HeckeTransition:
    """Apply U_i with the given complement/auxiliary degrees; raise Infeasible otherwise."""
    model = transition_model(state.place, i)
    values = state.values("H")
    values.update(_choice_values(model, choice))
    for v, e in model.successor.items():
        values[v] = e.value(values)
    for v, e in model.aggregates.items():
        values[v] = e.value(values)
    bad = model.system.violations(values)
    if any((x * state.D).denominator != 1 for k, x in values.items() if k[0] == "c"):
        bad.append("grid")
    if bad:
        raise Infeasible(list(dict.fromkeys(bad)))
    return _make(model, state, values)


def _make(model: TransitionModel, state: FlagState, values: Mapping) -> HeckeTransition:
    n, top = model.n, model.place.flag_length
    succ = FlagState(model.place, tuple(tuple(values[("Y", j, t)] for t in range(n))
                                        for j in range(1, top + 1)), state.D)
    choice = {name: tuple(values[("c", name, t)] for t in range(n)) for name in model.choice_names}
    return HeckeTransition(state, model.i, choice, succ)


def enumerate_transitions(state: FlagState, i: int, limit: int | None = None) -> Iterator[HeckeTransition]:
    """Every feasible choice on the state's grid, in lexicographic order."""
    model = transition_model(state.place, i)
    sysm = System(list(model.system.variables), dict(model.system.bounds),
                  list(model.system.constraints), list(model.system.implications))
    for v, x in state.values("H").items():
        sysm.bounds[v] = (x, x)
    for sol in sysm.solutions(state.D, limit):
        yield _make(model, state, sol)


# ---------------------------------------------------------------- sampling


def random_flag_columns(place: PlaceDatum, D: int, size: int, rng):
    """Random grid flags, shape (size, f, a+b) of step sizes in grid units."""
    import numpy as np

    ab = place.total
    out = np.empty((size, place.f, ab), dtype=np.int64)
    for k, a in enumerate(place.a):
        # choose D*a unit slots among ab*D, at most D per step
        keys = rng.random((size, ab * D))
        ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
        chosen = (ranks < D * a).reshape(size, ab, D)
        out[:, k, :] = chosen.sum(axis=2)
    return out


def _columns_to_rows(place: PlaceDatum, cols, D: int):
    """(size, f, a+b) step columns -> (size, flag_length, n_indices) cumulative degrees."""
    import numpy as np

    top, n = place.flag_length, place.n_indices
    size = cols.shape[0]
    out = np.zeros((size, top, n), dtype=np.int64)
    cum = np.cumsum(cols, axis=2)
    for k in range(place.f):
        out[:, :, k] = cum[:, k, :top]
        if place.case == "U":
            refl = D - cols[:, k, ::-1]
            out[:, :, place.partner(k)] = np.cumsum(refl, axis=1)[:, :top]
    return out


@dataclass
class TransitionSample:
    """Accepted transitions as grid-unit arrays: state and successor rows, and choices."""

    place: PlaceDatum
    i: int
    D: int
    H: "object"          # (N, flag_length, n)
    Y: "object"
    X: "object"          # full unknown vectors
    variables: list
    proposals: int

    def __len__(self):
        return len(self.H)

    def transition(self, k: int) -> HeckeTransition:
        values = {v: Fraction(int(x), self.D) for v, x in zip(self.variables, self.X[k])}
        model = transition_model(self.place, self.i)
        state = FlagState(self.place, tuple(tuple(values[("H", j, t)] for t in range(model.n))
                                            for j in range(1, self.place.flag_length + 1)), self.D)
        return _make(model, state, values)


def _propose(model: TransitionModel, D: int, size: int, rng):
    """Candidate unknown vectors: random state and successor flags, complement read off
    from the successor, auxiliaries drawn between simple bounds. Acceptance is decided
    by the compiled constraint system, never here."""
    import numpy as np

    place, i = model.place, model.i
    n, top, ab = place.n_indices, place.flag_length, place.total
    caps = np.array(place.caps) * D
    Hs = _columns_to_rows(place, random_flag_columns(place, D, size, rng), D)
    Ys = _columns_to_rows(place, random_flag_columns(place, D, size, rng), D)
    vals = {}
    for j in range(1, top + 1):
        for t in range(n):
            vals[("H", j, t)] = Hs[:, j - 1, t]
            vals[("Y", j, t)] = Ys[:, j - 1, t]

    def put(name, arr):
        for t in range(n):
            vals[("c", name, t)] = arr[:, t]

    def draw(lo, hi):
        lo = np.minimum(lo, hi)
        return lo + np.floor(rng.random(lo.shape) * (hi - lo + 1)).astype(np.int64)

    def Hrow(j):
        if j <= top:
            return Hs[:, j - 1, :]
        return np.tile(caps, (size, 1))

    Yi = Ys[:, i - 1, :]
    if place.case == "L":
        L0 = caps - Yi
        put("L0", L0)
        for j in range(1, i):
            put(f"sum:{j}", Ys[:, j - 1, :] + L0)
        for j in range(i + 1, ab):
            yj = Ys[:, j - 1, :] if j <= top else np.tile(caps, (size, 1))
            put(f"meet:{j}", yj + L0 - caps)
    elif not is_middle(place, i):
        M = np.zeros((size, n), dtype=np.int64)
        for k in range(place.f):
            s1, s2 = k, place.partner(k)
            lo = np.maximum(caps[s1] - min(place.caps[s1], i) * D, 0)
            hi = min(place.caps[s1], ab - i) * D
            M[:, s1] = draw(np.full(size, lo), np.full(size, hi))
            M[:, s2] = M[:, s1] + (caps[s2] - caps[s1]) - (Yi[:, s2] - Yi[:, s1])
        part = [place.partner(t) for t in range(n)]
        Q = 2 * caps - (ab - i) * D + M[:, part] - M - Yi
        put("Lpi", M)
        put("LmodLpi", Q)
        for j in range(1, i):
            Hj, Yj = Hrow(j), Ys[:, j - 1, :]
            lo = np.maximum(Hj - M, 0)
            hi = np.minimum(np.minimum(caps - M, j * D), caps)
            put(f"sum_pi:{j}", M + np.clip(Yj, lo, np.maximum(lo, hi)))
            put(f"sum:{j}", Yj + M + Q)
        for j in range(i + 1, top + 1):
            Hj, Yj = Hrow(j), Ys[:, j - 1, :]
            lo = np.maximum(np.maximum(Hj - np.minimum(caps, i * D), M - np.minimum(caps, (ab - j) * D)), 0)
            hi = np.minimum(np.minimum(Hj, M), np.minimum(caps, (j - i) * D))
            put(f"meet:{j}", draw(lo, hi))
            put(f"lift:{j}", Yj + M + Q)
    else:
        Lm = caps - Yi
        put("L", Lm)
        for j in range(1, i):
            put(f"sum:{j}", Ys[:, j - 1, :] + Lm)
    for v, e in model.aggregates.items():
        vals[v] = sum(c * vals[u] for u, c in e.terms.items()) + int(e.const * D)
    X = np.stack([vals[v] for v in model.system.variables], axis=1)
    return X


def sample_transitions(place: PlaceDatum, i: int, count: int, D: int = 4, seed: int = 0,
                       max_rounds: int = 200, batch: int = 20000) -> TransitionSample:
    """At least ``count`` feasible transitions of U_i (state and choice both random)."""
    import numpy as np

    model = transition_model(place, i)
    checker = BatchChecker.build(model.system, D)
    rng = np.random.default_rng(seed)
    kept, proposals = [], 0
    got = 0
    for _ in range(max_rounds):
        X = _propose(model, D, batch, rng)
        proposals += len(X)
        ok = checker.feasible(X)
        if ok.any():
            kept.append(X[ok])
            got += int(ok.sum())
        if got >= count:
            break
    X = np.concatenate(kept) if kept else np.zeros((0, len(model.system.variables)), dtype=np.int64)
    index = {v: k for k, v in enumerate(model.system.variables)}
    top, n = place.flag_length, place.n_indices
    H = np.stack([np.stack([X[:, index[("H", j, t)]] for t in range(n)], axis=1)
                  for j in range(1, top + 1)], axis=1) if len(X) else np.zeros((0, top, n))
    Y = np.stack([np.stack([X[:, index[("Y", j, t)]] for t in range(n)], axis=1)
                  for j in range(1, top + 1)], axis=1) if len(X) else np.zeros((0, top, n))
    return TransitionSample(place, i, D, H, Y, X, list(model.system.variables), proposals)


# ---------------------------------------------------------------- good / bad


def t_factor(place: PlaceDatum, i: int) -> int:
    return 2 if is_middle(place, i) else 1


def bad_test(tr: HeckeTransition, alpha, i: int | None = None) -> bool:
    """Bad iff deg H_i' <= d_i - t(1 - alpha)."""
    i = tr.i if i is None else i
    alpha = Fraction(alpha)
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    place = tr.state.place
    d = sum(degree_profile(place, i))
    return tr.successor.deg(i) <= d - t_factor(place, i) * (1 - alpha)


@dataclass(frozen=True)
class LProfile:
    l: tuple[Fraction, ...]                 # per sorted sigma
    total: Fraction
    s1: tuple[int, ...] = ()
    s2: tuple[int, ...] = ()
    s1_cap: Fraction | None = None
    s1_ok: bool | None = None
    s2_total: Fraction | None = None
    s2_bound: Fraction | None = None
    s2_ok: bool | None = None
    in_open: bool | None = None


def in_open(state: FlagState, eps, eps_choices: Mapping[int, str], k: int) -> bool:
    """Is the state in U_1: deg H_{A_j} >= d_j - eps for every j != k chosen as 'eps'."""
    eps = Fraction(eps)
    heights, d = canonical_heights(state.place), max_degrees(state.place)
    for j, (A, dj) in enumerate(zip(heights, d), start=1):
        if j != k and eps_choices.get(j, "eps") == "eps" and state.deg(A) < dj - eps:
            return False
    return True


def l_sigma_profile(tr: HeckeTransition, i: int | None = None, *, eps=None,
                    eps_choices: Mapping[int, str] | None = None, alpha=None) -> LProfile:
    """Excess of the complement over its forced lower bound, per sigma.

    With ``eps`` the S_1 cap (eps for a split place, 2*eps for an inert one) is
    evaluated; with ``alpha`` as well, the S_2 lower bound is asserted on a bad
    transition (NotBad otherwise).
    """
    i = tr.i if i is None else i
    place = tr.state.place
    c = tr.complement_degrees
    if place.case == "L":
        l = tuple(c[k] - max(a - i, 0) for k, a in enumerate(place.a))
    elif is_middle(place, i):
        l = tuple(c[k] for k in range(place.f))
    else:
        l = tuple(c[k] - max(a - i, 0) for k, a in enumerate(place.a))
    prof = LProfile(l, sum(l, Fraction(0)))
    if eps is None:
        return prof
    eps = Fraction(eps)
    heights = canonical_heights(place)
    if i not in heights:
        raise IndexOutOfRange(f"{i} is not a canonical height")
    k = heights.index(i) + 1
    choices = dict(eps_choices or {})
    part = partitions(place, choices, k)
    cap = eps if place.case == "L" else 2 * eps
    s1_ok = all(l[s] <= cap for s in part.s1)
    opened = in_open(tr.state, eps, choices, k)
    prof = LProfile(l, prof.total, tuple(part.s1), tuple(part.s2), cap, s1_ok, in_open=opened)
    if alpha is None:
        return prof
    alpha = Fraction(alpha)
    if not bad_test(tr, alpha, i):
        raise NotBad("the S_2 bound concerns bad transitions only")
    s2_total = sum((l[s] for s in part.s2), Fraction(0))
    bound = 1 - alpha - place.f * cap
    return LProfile(l, prof.total, prof.s1, prof.s2, cap, s1_ok, s2_total, bound,
                    s2_total >= bound, opened)


# ---------------------------------------------------------------- norms and classicality


def inf_kappa_lambda(weight: Sequence[tuple[int, int]], sigmas: Sequence[int]) -> int:
    if not sigmas:
        raise EmptyS2("infimum over an empty set of embeddings")
    return min(weight[s][0] + weight[s][1] for s in sigmas)


def bad_norm_exponent(place: PlaceDatum, i: int, weight: Sequence[tuple[int, int]], v_alpha,
                      eps, alpha_margin, eps_choices: Mapping[int, str] | None = None) -> Fraction:
    """Exponent e with ||alpha_i^{-1} U_i^bad|| <= p^e; ``i`` is the canonical index."""
    eps, alpha = Fraction(eps), Fraction(alpha_margin)
    if not 0 < eps < Fraction(1, 2):
        raise ValueError("eps must lie in (0, 1/2)")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    heights = canonical_heights(place)
    if not 1 <= i <= len(heights):
        raise IndexOutOfRange(f"canonical index {i} outside 1..{len(heights)}")
    part = partitions(place, dict(eps_choices or {}), i)
    inf = inf_kappa_lambda(weight, part.s2)
    n = n_constant(place, heights[i - 1])
    return Fraction(v_alpha) + n - (1 - alpha - 2 * place.f * eps) * inf


def exponent_formula(v_alpha, n: int, inf: int, f: int, eps, alpha) -> Fraction:
    """The same exponent from its ingredients."""
    return Fraction(v_alpha) + n - (1 - Fraction(alpha) - 2 * f * Fraction(eps)) * inf


@dataclass(frozen=True)
class Condition:
    place: int
    k: int
    height: int
    n: int
    v_alpha: Fraction
    bound: int
    passed: bool
    closed_form: tuple[str, int] | None = None


@dataclass(frozen=True)
class ClassicalityReport:
    conditions: tuple[Condition, ...]

    @property
    def verdict(self) -> bool:
        return all(c.passed for c in self.conditions)


def closed_form(place: PlaceDatum, A: int) -> tuple[str, int] | None:
    """The explicit form of the constant in the condition at height A, when one applies.

    Ordinary places give f*a*b (split) or f*(a+b)^2/4 (inert); distinct a_sigma away
    from the boundary give one condition per embedding with a per-sigma sum.
    """
    sig, f, ab = place.signatures, place.f, place.total
    if all(s == sig[0] for s in sig):
        a, b = sig[0]
        if place.case == "L" and 0 < a < ab:
            return "f*a*b", f * a * b
        if place.case == "U" and a == b:
            return "f*(a+b)^2/4", f * ab * ab // 4
    top = ab if place.case == "L" else Fraction(ab, 2)
    if len(set(place.a)) == f and all(0 < a < top for a in place.a):
        (a_s, b_s), = [s for s in sig if s[0] == A]
        if place.case == "L":
            val = sum(min(a_s, a2) * min(b_s, b2) for a2, b2 in sig)
            return "sum_s' min(a_s,a_s')*min(b_s,b_s')", val
        return "sum_s' (a+b)*min(a_s,a_s')", sum(ab * min(a_s, a2) for a2 in place.a)
    return None


def classicality_check(datum: GlobalDatum | PlaceDatum, weight: Weight,
                       valuations: Mapping[tuple[int, int], Fraction]) -> ClassicalityReport:
    """n_{A_k} + v(alpha_k) < inf over Sigma_k of (kappa + lambda), for every place and k."""
    if isinstance(datum, PlaceDatum):
        datum = GlobalDatum((datum,))
    weight.check(datum)
    conds = []
    for p_idx, place in enumerate(datum.places):
        heights = canonical_heights(place)
        kl = [(weight.kappa(p_idx, s), weight.lam(p_idx, s)) for s in range(place.f)]
        for k, A in enumerate(heights, start=1):
            if (p_idx, k) not in valuations:
                raise MissingValuation(f"no valuation for place {p_idx}, index {k}")
            v = Fraction(valuations[(p_idx, k)])
            sigma_k = [s for s, a in enumerate(place.a) if a == A]
            bound = inf_kappa_lambda(kl, sigma_k)
            n = n_constant(place, A)
            conds.append(Condition(p_idx, k, A, n, v, bound, n + v < bound,
                                   closed_form(place, A)))
    return ClassicalityReport(tuple(conds))


def search_l_sigma_violation(place: PlaceDatum, k: int, eps, alpha, D: int = 4,
                             eps_choices: Mapping[int, str] | None = None):
    """Exhaustive search for a bad transition from U_1 whose profile breaks the S_1 cap.

    Returns None when none exists on the grid, else the offending HeckeTransition.
    """
    eps, alpha = Fraction(eps), Fraction(alpha)
    heights = canonical_heights(place)
    i = heights[k - 1]
    choices = dict(eps_choices or {})
    part = partitions(place, choices, k)
    model = transition_model(place, i)
    n = place.n_indices
    cap = eps if place.case == "L" else 2 * eps
    d = max_degrees(place)
    base = []
    for j, (A, dj) in enumerate(zip(heights, d), start=1):
        if j != k and choices.get(j, "eps") == "eps":
            base.append(total(_flag_expr(place, "H", A, t) for t in range(n)).rel(
                ">=", dj - eps, f"open:{j}"))
    di = sum(degree_profile(place, i))
    base.append(total(_flag_expr(place, "Y", i, t) for t in range(n)).rel(
        "<=", di - t_factor(place, i) * (1 - alpha), "bad"))
    for s in part.s1:
        if place.case == "L":
            comp = Expr.var(("c", "L0", s))
        elif is_middle(place, i):
            comp = Expr.var(("c", "L", s))
        else:
            comp = Expr.var(("c", "Lpi", s)) + Expr.var(("c", "LmodLpi", s))
        excess = comp - max(place.a[s] - i, 0) if not is_middle(place, i) else comp
        sysm = System(list(model.system.variables), dict(model.system.bounds),
                      list(model.system.constraints) + base + [excess.rel(">", cap, "s1-cap")],
                      list(model.system.implications))
        sol = sysm.first(D)
        if sol is not None:
            top = place.flag_length
            state = FlagState(place, tuple(tuple(sol[("H", j, t)] for t in range(n))
                                           for j in range(1, top + 1)), D)
            return _make(model, state, sol)
    return None


@dataclass(frozen=True)
class SampleReport:
    place: PlaceDatum
    i: int
    count: int
    monotone_failures: int       # some j with deg H_j' < deg H_j
    equalities: int              # samples with deg H_i' = deg H_i
    equality_failures: int       # equalities without the integrality / parity property

    @property
    def ok(self) -> bool:
        return self.monotone_failures == 0 and self.equality_failures == 0


def sample_report(sample: TransitionSample) -> SampleReport:
    """Monotonicity at every j and the equality characterization at i, in grid units."""
    import numpy as np

    place, i, D = sample.place, sample.i, sample.D
    if len(sample) == 0:
        return SampleReport(place, i, 0, 0, 0, 0)
    dH = sample.H.sum(axis=2)          # (N, flag_length), degrees times D
    dY = sample.Y.sum(axis=2)
    mono = int(np.any(dY < dH, axis=1).sum())
    eq = dY[:, i - 1] == dH[:, i - 1]
    if is_middle(place, i):
        d = sum(degree_profile(place, i)) * D
        good = (d - dH[:, i - 1]) % (2 * D) == 0
    else:
        good = dH[:, i - 1] % D == 0
    return SampleReport(place, i, len(sample), mono, int(eq.sum()), int((eq & ~good).sum()))
