"""Axiomatic calculus of partial degrees of subgroup configurations.

A DegreeConfig is a diagram of GroupNodes (O_F-height plus per-embedding degree)
with declared relations. The relations are compiled once into a linear System;
``check_config`` evaluates that system on exact Fractions and the searches solve
it on the 1/D grid. Search results are property tests at that granularity, not
proofs.

Over-approximation: every constraint used here is satisfied by actual finite flat
subgroups, so absence of a grid point rules out the configuration at that grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .datum import PlaceDatum, canonical_heights, max_degrees
from .gridsolve import Linear, System, lin

HALF = Fraction(1, 2)


class MalformedDiagram(ValueError):
    pass


@dataclass(frozen=True)
class GroupNode:
    label: str
    height: int
    caps: tuple[int, ...]                       # per-embedding degree of the ambient
    degrees: tuple[Fraction, ...] | None = None

    @property
    def bounds(self) -> tuple[int, ...]:
        return tuple(min(c, self.height) for c in self.caps)

    @property
    def degree(self) -> Fraction:
        return sum(self.degrees, Fraction(0))


@dataclass(frozen=True)
class Sum:
    x: str
    y: str
    s: str   # x + y
    i: str   # x ∩ y


@dataclass(frozen=True)
class Quotient:
    sub: str
    big: str
    q: str   # big / sub


@dataclass(frozen=True)
class Dual:
    g: str
    gd: str


@dataclass(frozen=True)
class Orthogonal:
    """deg_t(perp) = caps_perp[t] - ht(h) + deg_{perm[t]}(h)."""

    h: str
    perp: str
    perm: tuple[int, ...]


@dataclass(frozen=True)
class DegreeConfig:
    nodes: tuple[GroupNode, ...]
    total: int                                   # a + b, height of the ambient
    containments: tuple[tuple[str, str], ...] = ()
    sums: tuple[Sum, ...] = ()
    quotients: tuple[Quotient, ...] = ()
    duals: tuple[Dual, ...] = ()
    orthogonals: tuple[Orthogonal, ...] = ()
    conditions: tuple[Linear, ...] = ()          # extra hypotheses, on (label, t) unknowns
    fixed: tuple[str, ...] = ()                  # nodes pinned to their caps (ambients)
    grid: int = 4

    def node(self, label: str) -> GroupNode:
        for n in self.nodes:
            if n.label == label:
                return n
        raise MalformedDiagram(f"no node labelled {label!r}")

    @property
    def labels(self) -> list[str]:
        return [n.label for n in self.nodes]

    def with_degrees(self, values) -> "DegreeConfig":
        nodes = tuple(replace(n, degrees=tuple(values[(n.label, t)] for t in range(len(n.caps))))
                      for n in self.nodes)
        return replace(self, nodes=nodes)

    def without(self, label: str) -> "DegreeConfig":
        """Drop a node and every relation or condition that mentions it."""
        def ok(*labels):
            return label not in labels
        return replace(
            self,
            nodes=tuple(n for n in self.nodes if n.label != label),
            containments=tuple(c for c in self.containments if ok(*c)),
            sums=tuple(s for s in self.sums if ok(s.x, s.y, s.s, s.i)),
            quotients=tuple(q for q in self.quotients if ok(q.sub, q.big, q.q)),
            duals=tuple(d for d in self.duals if ok(d.g, d.gd)),
            orthogonals=tuple(o for o in self.orthogonals if ok(o.h, o.perp)),
            conditions=tuple(c for c in self.conditions if all(v[0] != label for v, _ in c.terms)),
            fixed=tuple(x for x in self.fixed if x != label),
        )


def _deg(label: str, n: int):
    return [((label, t), 1) for t in range(n)]


def _neg(terms):
    return [(v, -c) for v, c in terms]


def _validate(cfg: DegreeConfig) -> dict[str, GroupNode]:
    nodes = {}
    for n in cfg.nodes:
        if n.label in nodes:
            raise MalformedDiagram(f"duplicate label {n.label!r}")
        if n.height < 0:
            raise MalformedDiagram(f"negative height on {n.label!r}")
        nodes[n.label] = n
    widths = {len(n.caps) for n in cfg.nodes}
    if len(widths) > 1:
        raise MalformedDiagram("nodes disagree on the number of embeddings")
    refs = [x for c in cfg.containments for x in c]
    refs += [x for s in cfg.sums for x in (s.x, s.y, s.s, s.i)]
    refs += [x for q in cfg.quotients for x in (q.sub, q.big, q.q)]
    refs += [x for d in cfg.duals for x in (d.g, d.gd)]
    refs += [x for o in cfg.orthogonals for x in (o.h, o.perp)]
    refs += [v[0] for c in cfg.conditions for v, _ in c.terms]
    refs += list(cfg.fixed)
    missing = sorted(set(refs) - set(nodes))
    if missing:
        raise MalformedDiagram(f"relations reference missing nodes {missing}")
    return nodes


def structural_violations(cfg: DegreeConfig) -> list[str]:
    """Height-level axioms, which do not involve degrees."""
    nodes = _validate(cfg)
    ht = {k: n.height for k, n in nodes.items()}
    out = []
    for x, y in cfg.containments:
        if ht[x] > ht[y]:
            out.append(f"containment-height:{x}<={y}")
    for s in cfg.sums:
        if ht[s.s] + ht[s.i] != ht[s.x] + ht[s.y]:
            out.append(f"height-additivity:{s.x}+{s.y}")
        if ht[s.s] > cfg.total:
            out.append(f"height-additivity:{s.s}")
    for q in cfg.quotients:
        if ht[q.q] != ht[q.big] - ht[q.sub]:
            out.append(f"quotient-height:{q.big}/{q.sub}")
    for d in cfg.duals:
        if ht[d.gd] != ht[d.g]:
            out.append(f"dual-height:{d.g}")
    for o in cfg.orthogonals:
        if ht[o.h] + ht[o.perp] != cfg.total:
            out.append(f"orthogonal-height:{o.h}")
    return out


def encode(cfg: DegreeConfig) -> System:
    """Compile the axioms of a configuration into a linear System.

    Unknowns are (label, t) in lexicographic order, followed by one total per node.
    """
    nodes = _validate(cfg)
    f0 = len(cfg.nodes[0].caps) if cfg.nodes else 0
    sysm = System()
    for label in sorted(nodes):
        for t, b in enumerate(nodes[label].bounds):
            sysm.add_var((label, t), 0, b)
    for label in sorted(nodes):
        n = nodes[label]
        sysm.add_var((label, "total"), 0, sum(n.bounds))
        sysm.add(lin(_deg(label, f0) + [((label, "total"), -1)], "==", 0, f"total:{label}"))
    for label in cfg.fixed:
        for t, c in enumerate(nodes[label].caps):
            sysm.add(lin([((label, t), 1)], "==", c, f"ambient:{label}"))

    def contain(x, y, why):
        room = nodes[y].height - nodes[x].height
        for t in range(f0):
            diff = [((y, t), 1), ((x, t), -1)]
            sysm.add(lin(diff, ">=", 0, f"{why}:{x}<={y}"))
            sysm.add(lin(diff, "<=", min(nodes[y].caps[t], max(room, 0)), f"{why}:{x}<={y}"))

    for x, y in cfg.containments:
        contain(x, y, "containment")
    for s in cfg.sums:
        for small, big in ((s.i, s.x), (s.i, s.y), (s.x, s.s), (s.y, s.s)):
            contain(small, big, "containment")
        sysm.add(lin([((s.x, "total"), 1), ((s.y, "total"), 1),
                      ((s.s, "total"), -1), ((s.i, "total"), -1)], "<=", 0,
                     f"submodularity:{s.x}+{s.y}"))
    for q in cfg.quotients:
        contain(q.sub, q.big, "containment")
        for t in range(f0):
            sysm.add(lin([((q.big, t), 1), ((q.sub, t), -1), ((q.q, t), -1)], "==", 0,
                         f"quotient-additivity:{q.big}/{q.sub}"))
    for d in cfg.duals:
        h = nodes[d.g].height
        for t in range(f0):
            sysm.add(lin([((d.gd, t), 1), ((d.g, t), 1)], "==", h, f"duality:{d.g}"))
    for o in cfg.orthogonals:
        h = nodes[o.h].height
        for t in range(f0):
            sysm.add(lin([((o.perp, t), 1), ((o.h, o.perm[t]), -1)], "==",
                         nodes[o.perp].caps[t] - h, f"orthogonal:{o.h}"))
    sysm.extend(cfg.conditions)
    return sysm


@dataclass(frozen=True)
class CheckResult:
    feasible: bool
    violations: tuple[str, ...] = ()

    def __bool__(self):
        return self.feasible


def check_config(cfg: DegreeConfig) -> CheckResult:
    """Exact check of every axiom on the degrees stored in the nodes."""
    out = structural_violations(cfg)
    values = {}
    for n in cfg.nodes:
        if n.degrees is None or len(n.degrees) != len(n.caps):
            raise MalformedDiagram(f"node {n.label!r} needs one degree per embedding")
        for t, x in enumerate(n.degrees):
            x = Fraction(x)
            if (x * cfg.grid).denominator != 1:
                out.append(f"grid:{n.label}")
            values[(n.label, t)] = x
        values[(n.label, "total")] = n.degree
    out.extend(encode(cfg).violations(values))
    seen, uniq = set(), []
    for v in out:
        if v not in seen:
            seen.add(v)
            uniq.append(v)
    return CheckResult(not uniq, tuple(uniq))


def orthogonal_degrees(degrees: Sequence[Fraction], height: int, caps_perp: Sequence[int],
                       perm: Sequence[int]) -> tuple[Fraction, ...]:
    return tuple(Fraction(caps_perp[t]) - height + degrees[perm[t]] for t in range(len(caps_perp)))


def orthogonal_data(place: PlaceDatum) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
    """(caps of H, caps of H-perp, index permutation) for the place's orthogonal formula."""
    if place.case == "L":
        return tuple(place.a), tuple(place.b), tuple(range(place.f))
    n = place.n_indices
    return place.caps, place.caps, tuple(place.partner(t) for t in range(n))


# ---------------------------------------------------------------- searches


@dataclass(frozen=True)
class NoCounterexample:
    claim: str
    grid: int
    vacuous: bool = False
    templates: int = 0

    found = False


@dataclass(frozen=True)
class Witness:
    claim: str
    grid: int
    config: DegreeConfig
    kind: str = "counterexample"      # or "relaxed-feasible"

    found = True


def _first_witness(claim: str, D: int, templates, kind: str):
    count = 0
    for cfg in templates:
        count += 1
        sol = encode(cfg).first(D)
        if sol is not None:
            wit = cfg.with_degrees(sol)
            res = check_config(wit)
            if not res.feasible:
                raise AssertionError(f"solver witness fails exact check: {res.violations}")
            return Witness(claim, D, wit, kind)
    return NoCounterexample(claim, D, templates=count)


def _above(label: str, f0: int, bound: Fraction, strict: bool, name: str) -> Linear:
    return lin(_deg(label, f0), ">" if strict else ">=", bound, name)


def _pair_templates(caps, total, hx, hy, bx, by, D, strict, h_max, extra=()):
    """Two nodes X, Y of heights hx <= hy with intersection height h < h_max."""
    f0 = len(caps)
    caps = tuple(caps)
    for h in range(0, h_max):
        hs = hx + hy - h
        if hs > total:
            continue
        nodes = (GroupNode("A", total, caps), GroupNode("H1", hx, caps), GroupNode("H2", hy, caps),
                 GroupNode("I", h, caps), GroupNode("S", hs, caps))
        yield DegreeConfig(
            nodes, total,
            containments=(("S", "A"),),
            sums=(Sum("H1", "H2", "S", "I"),),
            conditions=(_above("H1", f0, bx, strict, "threshold:H1"),
                        _above("H2", f0, by, strict, "threshold:H2")) + tuple(extra),
            fixed=("A",), grid=D)


def _canonical(place: PlaceDatum, i: int) -> int | None:
    heights = canonical_heights(place)
    if not heights:
        return None
    if not 1 <= i <= len(heights):
        raise ValueError(f"canonical index {i} out of range 1..{len(heights)}")
    return heights[i - 1]


def search_uniqueness_L(place: PlaceDatum, i: int, D: int = 4, relaxed: bool = False):
    """Two distinct subgroups of height A_i both of degree > d_i - 1/2."""
    if place.case != "L":
        raise ValueError("uniqueness search for a split place")
    claim = f"uniqueness L i={i}"
    A = _canonical(place, i)
    if A is None:
        return NoCounterexample(claim, D, vacuous=True)
    d = max_degrees(place)[i - 1]
    templates = _pair_templates(place.caps, place.total, A, A, d - HALF, d - HALF, D,
                                not relaxed, A)
    return _first_witness(claim, D, templates, "relaxed-feasible" if relaxed else "counterexample")


def search_inclusion_L(place: PlaceDatum, i: int, j: int, D: int = 4, relaxed: bool = False):
    """H_i, H_j of canonical heights, both above their bounds, with H_i not inside H_j.

    ``relaxed`` lowers both degree bounds by 1.
    """
    if place.case != "L":
        raise ValueError("inclusion search for a split place")
    if i >= j:
        raise ValueError("inclusion search needs i < j")
    claim = f"inclusion L i={i} j={j}"
    Ai, Aj = _canonical(place, i), _canonical(place, j)
    if Ai is None:
        return NoCounterexample(claim, D, vacuous=True)
    d = max_degrees(place)
    drop = 1 if relaxed else 0
    templates = _pair_templates(place.caps, place.total, Ai, Aj, d[i - 1] - HALF - drop,
                                d[j - 1] - HALF - drop, D, True, Ai)
    return _first_witness(claim, D, templates, "relaxed-feasible" if relaxed else "counterexample")


def dual_bound(place: PlaceDatum, i: int) -> Fraction:
    """Degree bound forced on H-perp by deg H > d_i - 1/2 (unitary place)."""
    A = _canonical(place, i)
    B = place.total - A
    return sum((Fraction(min(B, c)) for c in place.caps), Fraction(0)) - HALF


@dataclass(frozen=True)
class UnitaryReport:
    uniqueness: NoCounterexample | Witness
    isotropy: NoCounterexample | Witness
    dual_bound: Fraction | None
    dual_bound_implied: bool

    @property
    def found(self) -> bool:
        return self.uniqueness.found or self.isotropy.found


def search_uniqueness_U(place: PlaceDatum, i: int, D: int = 4, relaxed: bool = False) -> UnitaryReport:
    """Uniqueness in A[pi] with alpha caps, and isotropy of a high-degree subgroup."""
    if place.case != "U":
        raise ValueError("unitary search for an inert place")
    A = _canonical(place, i)
    if A is None:
        empty = NoCounterexample(f"uniqueness U i={i}", D, vacuous=True)
        return UnitaryReport(empty, replace(empty, claim=f"isotropy U i={i}"), None, True)
    kind = "relaxed-feasible" if relaxed else "counterexample"
    caps, total, n = place.caps, place.total, place.n_indices
    d = max_degrees(place)[i - 1]
    uniq = _first_witness(f"uniqueness U i={i}", D,
                          _pair_templates(caps, total, A, A, d - HALF, d - HALF, D, not relaxed, A),
                          kind)
    B = total - A
    bound = dual_bound(place, i)
    perm = tuple(place.partner(t) for t in range(n))

    def iso_templates():
        for h in range(0, A):
            nodes = (GroupNode("A", total, caps), GroupNode("H", A, caps), GroupNode("Hperp", B, caps),
                     GroupNode("I", h, caps), GroupNode("S", A + B - h, caps))
            yield DegreeConfig(
                nodes, total,
                containments=(("S", "A"),),
                sums=(Sum("H", "Hperp", "S", "I"),),
                orthogonals=(Orthogonal("H", "Hperp", perm),),
                conditions=(_above("H", n, d - HALF, not relaxed, "threshold:H"),),
                fixed=("A",), grid=D)

    iso = _first_witness(f"isotropy U i={i}", D, iso_templates(), kind)
    # the orthogonal formula forces deg H-perp above the dual bound whenever H is high
    probe = DegreeConfig(
        (GroupNode("H", A, caps), GroupNode("Hperp", B, caps)), total,
        orthogonals=(Orthogonal("H", "Hperp", perm),),
        conditions=(_above("H", n, d - HALF, True, "threshold:H"),
                    lin(_deg("Hperp", n), "<=", bound, "below-dual-bound")),
        grid=D)
    implied = encode(probe).first(D) is None
    return UnitaryReport(uniq, iso, bound, implied)


def search_siegel(g: int, D: int = 4, relaxed: bool = False):
    """Single embedding, ambient of height 2g and degree g."""
    claim = f"siegel g={g}"
    if g == 0:
        return NoCounterexample(claim, D, vacuous=True)
    b = Fraction(g) - HALF
    templates = _pair_templates((g,), 2 * g, g, g, b, b, D, not relaxed, g)
    return _first_witness(claim, D, templates, "relaxed-feasible" if relaxed else "counterexample")


def check_technical(place: PlaceDatum, k: int, eps, D: int = 4):
    """Degree lower bound spreads to every embedding; and the dual upper-bound form.

    Counterexample to the first form: height A_k, total >= d_k - eps, some
    deg_t < min(cap_t, A_k) - eps. Dual form: height a+b-A_k inside the ambient,
    total <= deg(ambient) - d_k + eps, some deg_t > max(cap_t - A_k, 0) + eps.
    """
    eps = Fraction(eps)
    claim = f"technical k={k} eps={eps}"
    A = _canonical(place, k)
    if A is None:
        return NoCounterexample(claim, D, vacuous=True)
    d = max_degrees(place)[k - 1]
    caps, total, n = place.caps, place.total, place.n_indices

    def templates():
        for t in range(n):
            yield DegreeConfig(
                (GroupNode("H", A, caps),), total,
                conditions=(lin(_deg("H", n), ">=", d - eps, "hypothesis"),
                            lin([(("H", t), 1)], "<", min(caps[t], A) - eps, f"violates:{t}")),
                grid=D)
        for t in range(n):
            yield DegreeConfig(
                (GroupNode("A", total, caps), GroupNode("H", total - A, caps),
                 GroupNode("Q", A, caps)), total,
                quotients=(Quotient("H", "A", "Q"),),
                conditions=(lin(_deg("H", n), "<=", sum(caps) - d + eps, "hypothesis"),
                            lin([(("H", t), 1)], ">", max(caps[t] - A, 0) + eps, f"violates:{t}")),
                fixed=("A",), grid=D)

    # lexicographically least witness over the per-embedding disjuncts
    best = None
    for cfg in templates():
        sol = encode(cfg).first(D)
        if sol is None:
            continue
        wit = cfg.with_degrees(sol)
        if not check_config(wit).feasible:
            raise AssertionError("solver witness fails exact check")
        key = (len(wit.nodes), [x for nd in wit.nodes for x in nd.degrees])
        if best is None or key < best[0]:
            best = (key, wit)
    if best is None:
        return NoCounterexample(claim, D, templates=2 * n)
    return Witness(claim, D, best[1])


def maximal_flag_config(place: PlaceDatum, D: int = 4) -> DegreeConfig:
    """Every canonical H_k at its maximal degrees, chained by inclusion."""
    caps, total = place.caps, place.total
    heights = canonical_heights(place)
    nodes = [GroupNode("A", total, caps, tuple(Fraction(c) for c in caps))]
    for k, A in enumerate(heights, start=1):
        nodes.append(GroupNode(f"H{k}", A, caps, tuple(Fraction(min(c, A)) for c in caps)))
    chain = tuple((f"H{k}", f"H{k + 1}") for k in range(1, len(heights)))
    chain += tuple((f"H{k}", "A") for k in range(1, len(heights) + 1))
    return DegreeConfig(tuple(nodes), total, containments=chain, fixed=("A",), grid=D)


def config_to_json(cfg: DegreeConfig) -> dict:
    from .report import frac
    return {
        "grid": cfg.grid,
        "total_height": cfg.total,
        "nodes": [{"label": n.label, "height": n.height, "caps": list(n.caps),
                   "partial_degrees": None if n.degrees is None else [frac(x) for x in n.degrees]}
                  for n in cfg.nodes],
        "containments": [list(c) for c in cfg.containments],
        "sums": [[s.x, s.y, s.s, s.i] for s in cfg.sums],
        "quotients": [[q.sub, q.big, q.q] for q in cfg.quotients],
        "orthogonals": [[o.h, o.perp] for o in cfg.orthogonals],
        "conditions": [c.name for c in cfg.conditions],
    }
