"""Linear constraints over rational unknowns, checked exactly or solved on a 1/D grid.

A ``System`` is an ordered list of unknowns with box bounds, linear constraints
with integer coefficients, and conditional congruences. ``violations`` evaluates
it on exact Fractions; ``solutions`` enumerates grid points x = D * value by
depth-first search with interval propagation, in lexicographic order of the
unknowns. The search is complete, so an empty enumeration is a certificate at
that granularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterator, Mapping, Sequence

Var = Hashable

_OPS = ("<=", ">=", "==", "<", ">")


@dataclass(frozen=True)
class Linear:
    terms: tuple[tuple[Var, int], ...]
    op: str
    rhs: Fraction
    name: str

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown comparison {self.op!r}")

    def value(self, values: Mapping[Var, Fraction]) -> Fraction:
        return sum((c * values[v] for v, c in self.terms), Fraction(0))

    def holds(self, values: Mapping[Var, Fraction]) -> bool:
        x, r = self.value(values), self.rhs
        return {"<=": x <= r, ">=": x >= r, "==": x == r, "<": x < r, ">": x > r}[self.op]

    def grid_bounds(self, D: int) -> tuple[int | None, int | None]:
        """Integer bounds on sum(c * D*value) equivalent to this constraint on the grid."""
        r = Fraction(self.rhs) * D
        lo = hi = None
        if self.op in ("<=", "=="):
            hi = math.floor(r)
        if self.op in (">=", "=="):
            lo = math.ceil(r)
        if self.op == "<":
            hi = math.ceil(r) - 1
        if self.op == ">":
            lo = math.floor(r) + 1
        return lo, hi


def lin(terms, op: str, rhs, name: str) -> Linear:
    """Build a Linear from a mapping or iterable of (var, coeff), merging repeats."""
    acc: dict = {}
    items = terms.items() if isinstance(terms, Mapping) else terms
    for v, c in items:
        acc[v] = acc.get(v, 0) + c
    return Linear(tuple((v, c) for v, c in acc.items() if c), op, Fraction(rhs), name)


@dataclass(frozen=True)
class Congruence:
    """sum(c * value) - rhs lies in modulus * Z."""

    terms: tuple[tuple[Var, int], ...]
    rhs: Fraction
    modulus: int

    def holds(self, values: Mapping[Var, Fraction]) -> bool:
        x = sum((c * values[v] for v, c in self.terms), Fraction(0)) - self.rhs
        return x.denominator == 1 and x.numerator % self.modulus == 0


@dataclass(frozen=True)
class Implication:
    when: Linear
    then: tuple[Congruence, ...]
    name: str

    def vars(self) -> set:
        vs = {v for v, _ in self.when.terms}
        for c in self.then:
            vs |= {v for v, _ in c.terms}
        return vs

    def holds(self, values: Mapping[Var, Fraction]) -> bool:
        return not self.when.holds(values) or all(c.holds(values) for c in self.then)


@dataclass
class System:
    variables: list[Var] = field(default_factory=list)
    bounds: dict = field(default_factory=dict)          # var -> (lo, hi) Fractions
    constraints: list[Linear] = field(default_factory=list)
    implications: list[Implication] = field(default_factory=list)

    def add_var(self, v: Var, lo, hi) -> None:
        if v in self.bounds:
            raise ValueError(f"duplicate unknown {v!r}")
        self.variables.append(v)
        self.bounds[v] = (Fraction(lo), Fraction(hi))

    def add(self, c: Linear) -> None:
        self.constraints.append(c)

    def extend(self, cs) -> None:
        self.constraints.extend(cs)

    def violations(self, values: Mapping[Var, Fraction]) -> list[str]:
        """Names of violated constraints (box bounds included), exact arithmetic."""
        out = []
        for v in self.variables:
            lo, hi = self.bounds[v]
            if not lo <= values[v] <= hi:
                out.append(f"bounds:{v}")
        out.extend(c.name for c in self.constraints if not c.holds(values))
        out.extend(i.name for i in self.implications if not i.holds(values))
        return out

    def solutions(self, D: int, limit: int | None = None, priority=()) -> Iterator[dict]:
        """Grid solutions in lexicographic order of the branching order.

        The branching order is ``priority`` followed by the remaining unknowns in
        declaration order.
        """
        yield from _Search(self, D, priority).run(limit)

    def first(self, D: int, priority=()) -> dict | None:
        return next(self.solutions(D, 1, priority), None)

    def feasible(self, D: int) -> bool:
        return self.first(D) is not None


class _Search:
    def __init__(self, system: System, D: int, priority=()):
        if D < 1:
            raise ValueError("grid denominator must be positive")
        self.D = D
        first = [v for v in dict.fromkeys(priority) if v in system.bounds]
        seen = set(first)
        self.vars = first + [v for v in system.variables if v not in seen]
        index = {v: k for k, v in enumerate(self.vars)}
        self.lo0, self.hi0 = [], []
        for v in self.vars:
            lo, hi = system.bounds[v]
            self.lo0.append(math.ceil(lo * D))
            self.hi0.append(math.floor(hi * D))
        self.rows = []  # (idx, coeffs, lo, hi)
        self.infeasible = False
        for c in system.constraints:
            lo, hi = c.grid_bounds(D)
            if c.op == "==" and lo > hi:
                self.infeasible = True
            idx = tuple(index[v] for v, _ in c.terms)
            co = tuple(k for _, k in c.terms)
            if not idx:
                if (lo is not None and lo > 0) or (hi is not None and hi < 0):
                    self.infeasible = True
                continue
            self.rows.append((idx, co, lo, hi))
        self.watch = [[] for _ in self.vars]
        for r, (idx, _, _, _) in enumerate(self.rows):
            for k in idx:
                self.watch[k].append(r)
        # implications are checked once their last unknown is fixed
        self.impl_at = [[] for _ in self.vars]
        for imp in system.implications:
            last = max(index[v] for v in imp.vars())
            self.impl_at[last].append(imp)
        # the same implications in grid units, for early pruning
        self.impls = []
        for imp in system.implications:
            wl, wh = imp.when.grid_bounds(D)
            when = (tuple(index[v] for v, _ in imp.when.terms),
                    tuple(c for _, c in imp.when.terms), wl, wh)
            then = tuple((tuple(index[v] for v, _ in c.terms), tuple(k for _, k in c.terms),
                          Fraction(c.rhs) * D, c.modulus * D) for c in imp.then)
            self.impls.append((when, then))

    def propagate(self, lo: list[int], hi: list[int], dirty) -> bool:
        queue = list(dirty)
        queued = set(queue)
        while queue:
            r = queue.pop()
            queued.discard(r)
            idx, co, L, U = self.rows[r]
            mn = mx = 0
            for k, c in zip(idx, co):
                if c > 0:
                    mn += c * lo[k]
                    mx += c * hi[k]
                else:
                    mn += c * hi[k]
                    mx += c * lo[k]
            if (U is not None and mn > U) or (L is not None and mx < L):
                return False
            for k, c in zip(idx, co):
                if c > 0:
                    rest_mn, rest_mx = mn - c * lo[k], mx - c * hi[k]
                    nhi = (U - rest_mn) // c if U is not None else hi[k]
                    nlo = -((rest_mx - L) // c) if L is not None else lo[k]
                else:
                    rest_mn, rest_mx = mn - c * hi[k], mx - c * lo[k]
                    # c*x <= U - rest_mn  ->  x >= ceil((U - rest_mn)/c)
                    nlo = -((U - rest_mn) // -c) if U is not None else lo[k]
                    nhi = (rest_mx - L) // -c if L is not None else hi[k]
                if nlo > lo[k] or nhi < hi[k]:
                    lo[k], hi[k] = max(lo[k], nlo), min(hi[k], nhi)
                    if lo[k] > hi[k]:
                        return False
                    for r2 in self.watch[k]:
                        if r2 not in queued:
                            queued.add(r2)
                            queue.append(r2)
        return True

    def run(self, limit):
        if self.infeasible:
            return
        lo, hi = list(self.lo0), list(self.hi0)
        if any(a > b for a, b in zip(lo, hi)):
            return
        if not self.propagate(lo, hi, range(len(self.rows))):
            return
        count = 0
        for sol in self._dfs(0, lo, hi):
            yield sol
            count += 1
            if limit is not None and count >= limit:
                return

    @staticmethod
    def _range(idx, co, lo, hi):
        mn = mx = 0
        for k, c in zip(idx, co):
            if c > 0:
                mn, mx = mn + c * lo[k], mx + c * hi[k]
            else:
                mn, mx = mn + c * hi[k], mx + c * lo[k]
        return mn, mx

    def _tighten(self, lo: list[int], hi: list[int]) -> bool:
        """Apply implications whose premise is already decided by the intervals.

        A forced premise rounds single-unknown congruences onto their lattice and
        checks fully fixed ones; returns False on a contradiction.
        """
        changed = True
        while changed:
            changed = False
            for (idx, co, L, U), then in self.impls:
                mn, mx = self._range(idx, co, lo, hi)
                if (U is not None and mn > U) or (L is not None and mx < L):
                    continue
                if not ((L is None or mn >= L) and (U is None or mx <= U)):
                    continue
                dirty = []
                for cidx, cco, r, m in then:
                    if len(cidx) == 1 and cco[0] in (1, -1) and r.denominator == 1:
                        k, target = cidx[0], int(r) * cco[0]
                        nlo = lo[k] + (target - lo[k]) % m
                        nhi = hi[k] - (hi[k] - target) % m
                        if nlo > nhi:
                            return False
                        if nlo != lo[k] or nhi != hi[k]:
                            lo[k], hi[k] = nlo, nhi
                            dirty += self.watch[k]
                    elif all(lo[k] == hi[k] for k in cidx):
                        x = sum(c * lo[k] for k, c in zip(cidx, cco)) - r
                        if x.denominator != 1 or x.numerator % m:
                            return False
                if dirty:
                    if not self.propagate(lo, hi, dirty):
                        return False
                    changed = True
        return True

    def _impl_ok(self, k: int, lo: list[int]) -> bool:
        if not self.impl_at[k]:
            return True
        vals = {v: Fraction(lo[j], self.D) for j, v in enumerate(self.vars[: k + 1])}
        return all(imp.holds(vals) for imp in self.impl_at[k])

    def _dfs(self, k: int, lo: list[int], hi: list[int]):
        if k == len(self.vars):
            yield {v: Fraction(x, self.D) for v, x in zip(self.vars, lo)}
            return
        for x in range(lo[k], hi[k] + 1):
            nlo, nhi = list(lo), list(hi)
            nlo[k] = nhi[k] = x
            if not self.propagate(nlo, nhi, self.watch[k]):
                continue
            if self.impls and not self._tighten(nlo, nhi):
                continue
            # propagation may have fixed earlier-checked unknowns only; k is fixed now
            if not self._impl_ok(k, nlo):
                continue
            yield from self._dfs(k + 1, nlo, nhi)


def feasible_values(system: System, var: Var, D: int) -> list[Fraction]:
    """All grid values ``var`` takes over feasible points (exhaustive)."""
    out = []
    for x in range(math.ceil(system.bounds[var][0] * D), math.floor(system.bounds[var][1] * D) + 1):
        sub = System(list(system.variables), dict(system.bounds), list(system.constraints),
                     list(system.implications))
        sub.bounds[var] = (Fraction(x, D), Fraction(x, D))
        if sub.feasible(D):
            out.append(Fraction(x, D))
    return out


class Expr:
    """Affine expression sum(c * var) + const, used to state constraints readably."""

    __slots__ = ("terms", "const")

    def __init__(self, terms=None, const=0):
        self.terms = dict(terms or {})
        self.const = Fraction(const)

    @classmethod
    def var(cls, v: Var) -> "Expr":
        return cls({v: 1})

    def __add__(self, other) -> "Expr":
        other = other if isinstance(other, Expr) else Expr(const=other)
        terms = dict(self.terms)
        for v, c in other.terms.items():
            terms[v] = terms.get(v, 0) + c
        return Expr(terms, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "Expr":
        return Expr({v: -c for v, c in self.terms.items()}, -self.const)

    def __sub__(self, other) -> "Expr":
        return self + (-(other if isinstance(other, Expr) else Expr(const=other)))

    def __rsub__(self, other) -> "Expr":
        return (-self) + other

    def __mul__(self, k: int) -> "Expr":
        return Expr({v: c * k for v, c in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def rel(self, op: str, other, name: str) -> Linear:
        diff = self - other
        return lin(diff.terms, op, -diff.const, name)

    def value(self, values: Mapping[Var, Fraction]) -> Fraction:
        return self.const + sum((c * values[v] for v, c in self.terms.items()), Fraction(0))


def total(exprs) -> Expr:
    out = Expr()
    for e in exprs:
        out = out + e
    return out


def between(e: Expr, lo, hi, name: str) -> list[Linear]:
    return [e.rel(">=", lo, name), e.rel("<=", hi, name)]


@dataclass
class BatchChecker:
    """Vectorised feasibility test of many grid points against one System."""

    variables: list
    D: int
    A: "object"
    lo: "object"
    hi: "object"
    box_lo: "object"
    box_hi: "object"
    implications: list

    @classmethod
    def build(cls, system: System, D: int) -> "BatchChecker":
        import numpy as np

        index = {v: k for k, v in enumerate(system.variables)}
        rows, lo, hi = [], [], []
        for c in system.constraints:
            l, h = c.grid_bounds(D)
            row = np.zeros(len(index))
            for v, k in c.terms:
                row[index[v]] += k
            rows.append(row)
            lo.append(-np.inf if l is None else l)
            hi.append(np.inf if h is None else h)
        imps = []
        for imp in system.implications:
            l, h = imp.when.grid_bounds(D)
            w = np.zeros(len(index))
            for v, k in imp.when.terms:
                w[index[v]] += k
            cons = []
            for cg in imp.then:
                r = np.zeros(len(index))
                for v, k in cg.terms:
                    r[index[v]] += k
                cons.append((r, cg.rhs * D, cg.modulus * D))
            imps.append((w, -np.inf if l is None else l, np.inf if h is None else h, cons))
        box_lo = np.array([math.ceil(system.bounds[v][0] * D) for v in system.variables])
        box_hi = np.array([math.floor(system.bounds[v][1] * D) for v in system.variables])
        return cls(list(system.variables), D, np.array(rows).reshape(len(rows), len(index)),
                   np.array(lo), np.array(hi), box_lo, box_hi, imps)

    def feasible(self, X):
        """Boolean mask over the rows of X (integer grid units, one column per unknown)."""
        import numpy as np

        X = np.asarray(X, dtype=float)
        ok = np.all((X >= self.box_lo) & (X <= self.box_hi), axis=1)
        if len(self.A):
            act = X @ self.A.T
            ok &= np.all((act >= self.lo - 1e-9) & (act <= self.hi + 1e-9), axis=1)
        for w, l, h, cons in self.implications:
            a = X @ w
            trig = (a >= l - 1e-9) & (a <= h + 1e-9)
            for r, rhs, mod in cons:
                val = np.rint(X @ r - float(rhs)).astype(np.int64)
                good = (abs(float(rhs) - round(float(rhs))) < 1e-12) & (val % int(mod) == 0)
                ok &= ~trig | good
        return ok
