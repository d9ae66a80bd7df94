"""Explicit Dieudonne modules M_eps over Z/p^n and their Frobenius-kernel subgroups.

The residue field is the prime field, so Frobenius-semilinearity is invisible and
F, V are plain integer matrices. Basis vectors e_tau are indexed by
tau in Z/f0 (0-based here); F e_{tau-1} = p^{eps_tau} e_tau and
V e_tau = p^{1-eps_tau} e_{tau-1}. The uniformizer pi acts as p.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .datum import PlaceDatum, canonical_heights, mu_ordinary_decomposition
from .zpn import Matrix, Submodule, identity, kernel, kernel_on, matmul


class BadEpsilon(ValueError):
    pass


class TruncationTooSmall(ValueError):
    pass


class Kind(str, Enum):
    MULTIPLICATIVE = "multiplicative"
    ETALE = "etale"
    BI_INFINITESIMAL = "bi-infinitesimal"


@dataclass(frozen=True)
class EpsilonModule:
    epsilon: tuple[int, ...]
    p: int
    n: int
    F: Matrix = field(compare=False, repr=False)
    V: Matrix = field(compare=False, repr=False)

    @property
    def f0(self) -> int:
        return len(self.epsilon)


def build_epsilon_module(epsilon: Sequence[int], p: int, n: int) -> EpsilonModule:
    eps = tuple(epsilon)
    if not eps:
        raise BadEpsilon("epsilon must be nonempty")
    if any(e not in (0, 1) for e in eps):
        raise BadEpsilon(f"epsilon entries must be 0 or 1, got {eps}")
    if n < 1:
        raise ValueError("truncation level n must be >= 1")
    f0 = len(eps)
    mod = p ** n
    F = [[0] * f0 for _ in range(f0)]
    V = [[0] * f0 for _ in range(f0)]
    for tau in range(f0):
        prev = (tau - 1) % f0
        F[tau][prev] = p ** eps[tau] % mod
        V[prev][tau] = p ** (1 - eps[tau]) % mod
    return EpsilonModule(eps, p, n, F, V)


def classify(epsilon: Sequence[int]) -> Kind:
    eps = tuple(epsilon)
    if all(e == 1 for e in eps):
        return Kind.MULTIPLICATIVE
    if all(e == 0 for e in eps):
        return Kind.ETALE
    return Kind.BI_INFINITESIMAL


def _invertible_mod_p(A: Matrix, p: int) -> bool:
    from .zpn import smith
    vals, _, _ = smith(A, p, 1)
    return len(vals) == len(A) and all(v == 0 for v in vals)


def classify_module(m: EpsilonModule) -> Kind:
    """Classification read off from bijectivity of F and V on M/pM."""
    if _invertible_mod_p(m.V, m.p):
        return Kind.MULTIPLICATIVE
    if _invertible_mod_p(m.F, m.p):
        return Kind.ETALE
    return Kind.BI_INFINITESIMAL


@dataclass(frozen=True)
class ProductModule:
    """Direct sum of EpsilonModules with multiplicity, graded by tau."""

    factors: tuple[tuple[EpsilonModule, int], ...]
    p: int
    n: int
    f0: int
    F: Matrix = field(compare=False, repr=False)
    V: Matrix = field(compare=False, repr=False)
    grading: tuple[int, ...] = field(compare=False, repr=False)  # tau of each basis vector

    @property
    def rank(self) -> int:
        return len(self.grading)

    def coords(self, tau: int) -> list[int]:
        return [k for k, t in enumerate(self.grading) if t == tau]

    def rank_per_tau(self) -> list[int]:
        return [len(self.coords(t)) for t in range(self.f0)]


def direct_sum(factors: Sequence[tuple[EpsilonModule, int]]) -> ProductModule:
    factors = tuple((m, k) for m, k in factors if k > 0)
    if not factors:
        raise ValueError("empty direct sum")
    p, n, f0 = factors[0][0].p, factors[0][0].n, factors[0][0].f0
    if any(m.p != p or m.n != n or m.f0 != f0 for m, _ in factors):
        raise ValueError("factors must share p, n and the number of graded lines")
    copies = [m for m, k in factors for _ in range(k)]
    r = f0 * len(copies)
    F = [[0] * r for _ in range(r)]
    V = [[0] * r for _ in range(r)]
    for c, m in enumerate(copies):
        off = c * f0
        for i in range(f0):
            for j in range(f0):
                F[off + i][off + j] = m.F[i][j]
                V[off + i][off + j] = m.V[i][j]
    grading = tuple(t for _ in copies for t in range(f0))
    return ProductModule(factors, p, n, f0, F, V, grading)


def as_product(m: EpsilonModule | ProductModule) -> ProductModule:
    return m if isinstance(m, ProductModule) else direct_sum([(m, 1)])


def fv_identity_holds(m: EpsilonModule | ProductModule) -> bool:
    """F V = V F = p on the nose."""
    pm = as_product(m)
    mod = pm.p ** pm.n
    pid = [[(pm.p * x) % mod for x in row] for row in identity(pm.rank)]
    return matmul(pm.F, pm.V, mod) == pid and matmul(pm.V, pm.F, mod) == pid


def scalar(pm: ProductModule, c: int) -> Matrix:
    mod = pm.p ** pm.n
    return [[(c * x) % mod for x in row] for row in identity(pm.rank)]


def mat_power(A: Matrix, e: int, mod: int) -> Matrix:
    out = identity(len(A))
    for _ in range(e):
        out = matmul(A, out, mod)
    return out


def p_torsion(pm: ProductModule) -> Submodule:
    return kernel(scalar(pm, pm.p), pm.p, pm.n)


def is_graded(pm: ProductModule, sub: Submodule) -> bool:
    return sum(sub.project(pm.coords(t)).length() for t in range(pm.f0)) == sub.length()


def partial_degrees(pm: ProductModule, sub: Submodule) -> list[int]:
    """deg_tau = length of (C / F C)_tau for an F-stable graded submodule C."""
    if not is_graded(pm, sub):
        raise ValueError("submodule is not graded")
    fsub = sub.image(pm.F)
    if not sub.contains(fsub):
        raise ValueError("submodule is not stable under F")
    return [sub.project(pm.coords(t)).length() - fsub.project(pm.coords(t)).length()
            for t in range(pm.f0)]


def partial_degrees_p_torsion(m: EpsilonModule | ProductModule) -> list[int]:
    pm = as_product(m)
    return partial_degrees(pm, p_torsion(pm))


def required_truncation(place: PlaceDatum) -> int:
    return place.n_indices + 1


def assemble_mu_ordinary(place: PlaceDatum, p: int, n: int | None = None) -> ProductModule:
    need = required_truncation(place)
    if n is None:
        n = need
    if n < need:
        raise TruncationTooSmall(f"kernel computations need n >= {need}, got {n}")
    return direct_sum([(build_epsilon_module(eps, p, n), k)
                       for eps, k in mu_ordinary_decomposition(place)])


@dataclass(frozen=True)
class KernelSubgroupReport:
    index: int           # i, 1-based
    order_log: int       # log_p of the order
    height: int          # O_F-height: order_log / f0
    partial_degrees: tuple[int, ...]
    submodule: Submodule = field(compare=False, repr=False)


def frobenius_kernels(pm: ProductModule, place: PlaceDatum | None = None) -> list[KernelSubgroupReport]:
    """C_i = p^{f0-i} (Ker F^{f0} cap Ker p^{f0-i+1}) for i = 1..f0."""
    f0, p, n = pm.f0, pm.p, pm.n
    if place is not None and n < required_truncation(place):
        raise TruncationTooSmall(f"need n >= {required_truncation(place)}, got {n}")
    mod = p ** n
    kerF = kernel(mat_power(pm.F, f0, mod), p, n)
    out = []
    for i in range(1, f0 + 1):
        K = kernel_on(scalar(pm, p ** (f0 - i + 1)), kerF)
        C = K.scale(p ** (f0 - i))
        L = C.length()
        if L % f0:
            raise ArithmeticError(f"C_{i} has order p^{L}, not a multiple of {f0}")
        out.append(KernelSubgroupReport(i, L, L // f0, tuple(partial_degrees(pm, C)), C))
    return out


def chain_holds(reports: Sequence[KernelSubgroupReport]) -> bool:
    return all(x.submodule <= y.submodule for x, y in zip(reports, reports[1:]))


@dataclass(frozen=True)
class CanonicalCheck:
    k: int
    r: int
    height_ok: bool
    degrees_ok: bool
    observed: tuple[int, tuple[int, ...]]
    expected: tuple[int, tuple[int, ...]]


def canonical_subgroup_checks(place: PlaceDatum, p: int, n: int | None = None) -> dict:
    """Compare C_{r(k)} with the predicted canonical subgroup for every canonical k.

    Case U additionally checks that C_i and C_{2f+1-i} have complementary heights
    and degrees related by the orthogonality formula.
    """
    pm = assemble_mu_ordinary(place, p, n)
    reps = frobenius_kernels(pm, place)
    f0 = place.n_indices
    caps = place.caps
    checks = []
    for k, A in enumerate(canonical_heights(place), start=1):
        r = min(l for l, a in enumerate(place.a, start=1) if a == A)
        rep = reps[r - 1]
        exp_deg = tuple(min(c, A) for c in caps)
        checks.append(CanonicalCheck(
            k, r, rep.order_log == f0 * A, rep.partial_degrees == exp_deg,
            (rep.order_log, rep.partial_degrees), (f0 * A, exp_deg)))
    complement = []
    if place.case == "U":
        for i in range(1, f0 + 1):
            x, y = reps[i - 1], reps[f0 - i]
            heights_ok = x.order_log + y.order_log == f0 * place.total
            # deg_tau C^perp = cap_tau - h + deg_{partner(tau)} C
            degs_ok = all(y.partial_degrees[t] == caps[t] - x.height
                          + x.partial_degrees[place.partner(t)] for t in range(f0))
            complement.append((i, heights_ok, degs_ok))
    return {
        "reports": reps,
        "chain": chain_holds(reps),
        "canonical": checks,
        "complement": complement,
        "ok": chain_holds(reps) and all(c.height_ok and c.degrees_ok for c in checks)
        and all(h and d for _, h, d in complement),
    }
