"""Shimura data at p: places, signatures, weights and their combinatorial invariants.

A place is either split in the CM field (case ``"L"``) or inert (case ``"U"``).
Signatures are kept sorted so that ``a_sigma`` is nondecreasing; the
permutation back to the input order is stored on the place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Iterator, Mapping, Sequence

CASES = ("L", "U")


class DatumError(ValueError):
    """Base class for malformed Shimura data."""


class ConstantSumViolation(DatumError):
    pass


class ConventionViolation(DatumError):
    pass


class EmptyDatum(DatumError):
    pass


class WrongCase(DatumError):
    pass


class BadChoice(DatumError):
    pass


class WeightError(DatumError):
    pass


@dataclass(frozen=True)
class PlaceDatum:
    case: str
    signatures: tuple[tuple[int, int], ...]
    # order[k] = input position of the k-th sorted signature
    order: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.case not in CASES:
            raise DatumError(f"unknown case {self.case!r}; expected 'L' or 'U'")
        sigs = [tuple(int(x) for x in s) for s in self.signatures]
        if not sigs:
            raise EmptyDatum("a place needs at least one embedding")
        for s in sigs:
            if len(s) != 2 or s[0] < 0 or s[1] < 0:
                raise DatumError(f"signature {s} is not a pair of nonnegative integers")
        sums = {a + b for a, b in sigs}
        if len(sums) != 1:
            raise ConstantSumViolation(
                f"a_sigma + b_sigma takes the values {sorted(sums)}; it must be constant")
        if self.case == "U":
            bad = [s for s in sigs if s[0] > s[1]]
            if bad:
                raise ConventionViolation(f"case U requires a_sigma <= b_sigma, got {bad}")
        if not self.order:
            perm = sorted(range(len(sigs)), key=lambda k: sigs[k][0])
        else:
            perm = list(self.order)
            if sorted(perm) != list(range(len(sigs))):
                raise DatumError("order is not a permutation")
        object.__setattr__(self, "signatures", tuple(sigs[k] for k in perm)
                           if not self.order else tuple(sigs))
        object.__setattr__(self, "order", tuple(perm))
        if any(x > y for x, y in zip(self.a, self.a[1:])):
            raise DatumError("signatures must be sorted by a_sigma")

    @classmethod
    def from_lists(cls, case: str, a: Sequence[int], b: Sequence[int] | None = None,
                   total: int | None = None) -> "PlaceDatum":
        """Build from a list of ``a_sigma`` and either ``b`` or the constant ``a+b``."""
        if b is None:
            if total is None:
                raise DatumError("give either b or the total a+b")
            b = [total - x for x in a]
        return cls(case, tuple(zip(a, b)))

    @property
    def f(self) -> int:
        return len(self.signatures)

    @property
    def a(self) -> tuple[int, ...]:
        return tuple(s[0] for s in self.signatures)

    @property
    def b(self) -> tuple[int, ...]:
        return tuple(s[1] for s in self.signatures)

    @property
    def total(self) -> int:
        """The constant a+b."""
        return self.signatures[0][0] + self.signatures[0][1]

    @property
    def n_indices(self) -> int:
        """Number of graded pieces of the relevant torsion: f (L) or 2f (U)."""
        return self.f if self.case == "L" else 2 * self.f

    @property
    def caps(self) -> tuple[int, ...]:
        """Per-index degrees of the ambient group A[pi^+] (L) or A[pi] (U)."""
        if self.case == "L":
            return self.a
        return tuple(alpha_sequence(self)[1:-1])

    @property
    def flag_length(self) -> int:
        """Largest stored flag index: a+b-1 (L) or floor((a+b)/2) (U)."""
        return self.total - 1 if self.case == "L" else self.total // 2

    def partner(self, tau: int) -> int:
        """Index of the conjugate embedding (case U), 0-based."""
        return self.n_indices - 1 - tau


@dataclass(frozen=True)
class GlobalDatum:
    places: tuple[PlaceDatum, ...]

    def __post_init__(self):
        places = tuple(self.places)
        if not places:
            raise EmptyDatum("a datum needs at least one place above p")
        totals = {pl.total for pl in places}
        if len(totals) != 1:
            raise ConstantSumViolation(f"places disagree on a+b: {sorted(totals)}")
        object.__setattr__(self, "places", places)

    @property
    def d(self) -> int:
        return sum(pl.f for pl in self.places)

    @property
    def total(self) -> int:
        return self.places[0].total


@dataclass(frozen=True)
class ValidationReport:
    datum: GlobalDatum
    warnings: tuple[str, ...] = ()

    @property
    def curve_case(self) -> bool:
        return any("modular-curve" in w for w in self.warnings)


def validate(datum: GlobalDatum | PlaceDatum) -> ValidationReport:
    """Check conventions; construction already raises on hard errors."""
    if isinstance(datum, PlaceDatum):
        datum = GlobalDatum((datum,))
    warnings = []
    if datum.d == 1 and datum.places[0].signatures[0] == (1, 1):
        warnings.append("d = 1 and (a,b) = (1,1): excluded modular-curve case")
    return ValidationReport(datum, tuple(warnings))


# -- weights -----------------------------------------------------------------

def _decreasing(t: Sequence[int]) -> bool:
    return all(x >= y for x, y in zip(t, t[1:]))


@dataclass(frozen=True)
class Weight:
    """Per place, per sorted embedding: (kappa tuple, lambda tuple)."""

    blocks: tuple[tuple[tuple[tuple[int, ...], tuple[int, ...]], ...], ...]

    def check(self, datum: GlobalDatum) -> None:
        if len(self.blocks) != len(datum.places):
            raise WeightError("one weight block per place is required")
        for pl, blk in zip(datum.places, self.blocks):
            if len(blk) != pl.f:
                raise WeightError(f"expected {pl.f} embeddings, got {len(blk)}")
            for (a, b), (kap, lam) in zip(pl.signatures, blk):
                if len(kap) != a or len(lam) != b:
                    raise WeightError(
                        f"kappa/lambda lengths {len(kap)}/{len(lam)} do not match ({a},{b})")
                if not (_decreasing(kap) and _decreasing(lam)):
                    raise WeightError("weight tuples must be weakly decreasing")

    @classmethod
    def from_input(cls, datum: GlobalDatum,
                   blocks: Sequence[Sequence[tuple[Sequence[int], Sequence[int]]]]) -> "Weight":
        """Blocks given in the input embedding order; reordered to match the sorted places."""
        out = []
        for pl, blk in zip(datum.places, blocks):
            blk = list(blk)
            if len(blk) != pl.f:
                raise WeightError(f"expected {pl.f} embeddings, got {len(blk)}")
            out.append(tuple((tuple(blk[k][0]), tuple(blk[k][1])) for k in pl.order))
        w = cls(tuple(out))
        w.check(datum)
        return w

    @classmethod
    def from_extremals(cls, datum: GlobalDatum,
                       extremals: Sequence[Sequence[tuple[int, int]]]) -> "Weight":
        """Parallel weights: every kappa entry equals kappa_sigma, every lambda entry lambda_sigma.

        ``extremals`` is indexed by place then by *sorted* embedding.
        """
        out = []
        for pl, ext in zip(datum.places, extremals):
            out.append(tuple(((k,) * a, (l,) * b)
                             for (a, b), (k, l) in zip(pl.signatures, ext)))
        w = cls(tuple(out))
        w.check(datum)
        return w

    @classmethod
    def zero(cls, datum: GlobalDatum) -> "Weight":
        return cls.from_extremals(datum, [[(0, 0)] * pl.f for pl in datum.places])

    def kappa(self, place: int, sigma: int) -> int:
        t = self.blocks[place][sigma][0]
        return t[-1] if t else 0

    def lam(self, place: int, sigma: int) -> int:
        t = self.blocks[place][sigma][1]
        return t[-1] if t else 0

    def kappa_lambda(self, place: int, sigma: int) -> int:
        return self.kappa(place, sigma) + self.lam(place, sigma)


# -- invariants --------------------------------------------------------------

@dataclass(frozen=True)
class CanonicalData:
    heights: tuple[int, ...]
    max_degrees: tuple[int, ...]
    alpha_seq: tuple[int, ...] | None = None

    @property
    def s(self) -> int:
        return len(self.heights)


def canonical_heights(place: PlaceDatum) -> list[int]:
    top = place.total - 1 if place.case == "L" else place.total // 2
    return sorted({x for x in place.a if 1 <= x <= top})


def alpha_sequence(place: PlaceDatum) -> list[int]:
    if place.case != "U":
        raise WrongCase("the alpha sequence is only defined in case U")
    f = place.f
    a, b = place.a, place.b
    seq = [0] + list(a) + [b[2 * f - i] for i in range(f + 1, 2 * f + 1)] + [place.total]
    return seq


def degree_profile(place: PlaceDatum, height: int) -> list[int]:
    """Per-index maximal partial degrees min(cap, height) of a subgroup of that height."""
    return [min(c, height) for c in place.caps]


def max_degree(place: PlaceDatum, height: int) -> int:
    return sum(degree_profile(place, height))


def max_degrees(place: PlaceDatum) -> list[int]:
    return [max_degree(place, A) for A in canonical_heights(place)]


def canonical_data(place: PlaceDatum) -> CanonicalData:
    return CanonicalData(
        heights=tuple(canonical_heights(place)),
        max_degrees=tuple(max_degrees(place)),
        alpha_seq=tuple(alpha_sequence(place)) if place.case == "U" else None,
    )


def _breakpoints(place: PlaceDatum) -> list[int]:
    if place.case == "L":
        return [0] + list(place.a) + [place.total]
    return alpha_sequence(place)


def decomposition_multiplicities(place: PlaceDatum) -> list[int]:
    """Exponents of every factor BT_{eps_i}, zeros included (length f+1 or 2f+1)."""
    br = _breakpoints(place)
    return [br[i + 1] - br[i] for i in range(len(br) - 1)]


def epsilon_vector(n: int, i: int) -> tuple[int, ...]:
    """eps_i of length n: 1 in positions j >= i+1 (1-based), 0 before."""
    return tuple(1 if j >= i + 1 else 0 for j in range(1, n + 1))


def mu_ordinary_decomposition(place: PlaceDatum) -> list[tuple[tuple[int, ...], int]]:
    n = place.n_indices
    return [(epsilon_vector(n, i), m)
            for i, m in enumerate(decomposition_multiplicities(place)) if m > 0]


def ordinary_exists(place: PlaceDatum) -> bool:
    if place.case == "L":
        return len(set(place.a)) == 1
    return all(2 * a == place.total and a == b for a, b in place.signatures)


@dataclass(frozen=True)
class Partitions:
    sigma_classes: tuple[frozenset[int], ...]  # Sigma_0 .. Sigma_{s+1}
    s1: frozenset[int]
    s2: frozenset[int]


def sigma_classes(place: PlaceDatum) -> list[frozenset[int]]:
    """Sigma_0, Sigma_1..Sigma_s, Sigma_{s+1} as sets of 0-based sorted embedding indices."""
    heights = canonical_heights(place)
    classes = [frozenset(k for k, a in enumerate(place.a) if a == 0)]
    classes += [frozenset(k for k, a in enumerate(place.a) if a == A) for A in heights]
    classes.append(frozenset(k for k, a in enumerate(place.a) if a == place.total))
    return classes


def partitions(place: PlaceDatum, eps_choices: Mapping[int, str], i: int) -> Partitions:
    """S_1 / S_2 split for operator index ``i`` (1-based canonical index).

    ``eps_choices[k]`` is ``"eps"`` or ``"d"`` for each canonical index k; missing
    entries default to ``"eps"``.
    """
    classes = sigma_classes(place)
    s = len(classes) - 2
    if not 1 <= i <= s:
        raise BadChoice(f"operator index {i} is not among 1..{s}")
    choices = {k: eps_choices.get(k, "eps") for k in range(1, s + 1)}
    if any(v not in ("eps", "d") for v in choices.values()):
        raise BadChoice("choices must be 'eps' or 'd'")
    if choices[i] != "eps":
        raise BadChoice(f"the choice at the operator index {i} must be eps")
    s2 = set(classes[i])
    for k, v in choices.items():
        if v == "d":
            s2 |= classes[k]
    everything = frozenset(range(place.f))
    return Partitions(tuple(classes), everything - s2, frozenset(s2))


# -- enumeration of small data -----------------------------------------------

def enumerate_places(case: str, max_f: int, max_total: int,
                     min_total: int = 1) -> Iterator[PlaceDatum]:
    """All sorted places with f <= max_f and a+b <= max_total."""
    for total in range(min_total, max_total + 1):
        top = total if case == "L" else total // 2
        for f in range(1, max_f + 1):
            for a in combinations_with_replacement(range(top + 1), f):
                yield PlaceDatum.from_lists(case, a, total=total)


def as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)
