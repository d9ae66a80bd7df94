"""Finitely generated submodules of (Z/p^n)^r with exact integer arithmetic.

Vectors are tuples of ints reduced mod p^n; a submodule is stored as a list of
generators in a pivoted echelon form from which its order can be read off.
Matrices act on column vectors and are lists of rows.
"""

from __future__ import annotations

from dataclasses import dataclass

Matrix = list[list[int]]


def valuation(x: int, p: int, n: int) -> int:
    """p-adic valuation of x in Z/p^n (n for zero)."""
    x %= p ** n
    if x == 0:
        return n
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def unit_inverse(u: int, p: int, n: int) -> int:
    return pow(u, -1, p ** n)


def identity(r: int) -> Matrix:
    return [[int(i == j) for j in range(r)] for i in range(r)]


def matmul(A: Matrix, B: Matrix, mod: int) -> Matrix:
    cols = len(B[0]) if B else 0
    return [[sum(a * B[k][j] for k, a in enumerate(row)) % mod for j in range(cols)]
            for row in A]


def apply(A: Matrix, v, mod: int) -> tuple[int, ...]:
    return tuple(sum(a * x for a, x in zip(row, v)) % mod for row in A)


def smith(A: Matrix, p: int, n: int) -> tuple[list[int], Matrix, Matrix]:
    """Diagonal valuations and invertible P, Q with P A Q diagonal.

    Returns ``(vals, P, Q)`` where the k-th diagonal entry of P A Q is
    p^vals[k] (up to a unit), for k < min(rows, cols).
    """
    mod = p ** n
    rows, cols = len(A), len(A[0]) if A else 0
    M = [[x % mod for x in row] for row in A]
    P = identity(rows)
    Q = identity(cols)
    vals = []
    for t in range(min(rows, cols)):
        best = None
        for i in range(t, rows):
            for j in range(t, cols):
                if M[i][j]:
                    v = valuation(M[i][j], p, n)
                    if best is None or v < best[0]:
                        best = (v, i, j)
                        if v == 0:
                            break
            if best is not None and best[0] == 0:
                break
        if best is None:
            vals.extend([n] * (min(rows, cols) - t))
            break
        v, i, j = best
        M[t], M[i] = M[i], M[t]
        P[t], P[i] = P[i], P[t]
        for row in M:
            row[t], row[j] = row[j], row[t]
        for row in Q:
            row[t], row[j] = row[j], row[t]
        # normalise the pivot to exactly p^v
        u = unit_inverse(M[t][t] // p ** v, p, n)
        M[t] = [(x * u) % mod for x in M[t]]
        P[t] = [(x * u) % mod for x in P[t]]
        piv = p ** v
        for i2 in range(rows):
            if i2 != t and M[i2][t]:
                c = M[i2][t] // piv
                M[i2] = [(x - c * y) % mod for x, y in zip(M[i2], M[t])]
                P[i2] = [(x - c * y) % mod for x, y in zip(P[i2], P[t])]
        for j2 in range(cols):
            if j2 != t and M[t][j2]:
                c = M[t][j2] // piv
                for r in range(rows):
                    M[r][j2] = (M[r][j2] - c * M[r][t]) % mod
                for r in range(cols):
                    Q[r][j2] = (Q[r][j2] - c * Q[r][t]) % mod
        vals.append(v)
    return vals, P, Q


@dataclass(frozen=True)
class Submodule:
    """Submodule of (Z/p^n)^rank spanned by ``gens`` (kept in echelon form)."""

    p: int
    n: int
    rank: int
    gens: tuple[tuple[int, ...], ...]
    pivots: tuple[tuple[int, int], ...]  # (column, valuation) per generator

    @property
    def mod(self) -> int:
        return self.p ** self.n

    @classmethod
    def span(cls, vectors, p: int, n: int, rank: int) -> "Submodule":
        mod = p ** n
        rows = [[x % mod for x in v] for v in vectors]
        rows = [r for r in rows if any(r)]
        gens, pivots = [], []
        while rows:
            # full pivoting: entry of least valuation among all remaining rows
            best = None
            for i, r in enumerate(rows):
                for j, x in enumerate(r):
                    if x:
                        v = valuation(x, p, n)
                        if best is None or v < best[0]:
                            best = (v, i, j)
            v, i, j = best
            piv = rows.pop(i)
            u = unit_inverse(piv[j] // p ** v, p, n)
            piv = [(x * u) % mod for x in piv]
            rest = []
            for r in rows:
                if r[j]:
                    c = r[j] // p ** v
                    r = [(x - c * y) % mod for x, y in zip(r, piv)]
                if any(r):
                    rest.append(r)
            rows = rest
            gens.append(tuple(piv))
            pivots.append((j, v))
        return cls(p, n, rank, tuple(gens), tuple(pivots))

    @classmethod
    def zero(cls, p: int, n: int, rank: int) -> "Submodule":
        return cls(p, n, rank, (), ())

    @classmethod
    def whole(cls, p: int, n: int, rank: int) -> "Submodule":
        return cls.span(identity(rank), p, n, rank)

    def length(self) -> int:
        """log_p of the order."""
        return sum(self.n - v for _, v in self.pivots)

    def __add__(self, other: "Submodule") -> "Submodule":
        return Submodule.span(self.gens + other.gens, self.p, self.n, self.rank)

    def image(self, A: Matrix) -> "Submodule":
        return Submodule.span([apply(A, g, self.mod) for g in self.gens],
                              self.p, self.n, len(A))

    def scale(self, c: int) -> "Submodule":
        return Submodule.span([tuple(c * x for x in g) for g in self.gens],
                              self.p, self.n, self.rank)

    def contains(self, other: "Submodule") -> bool:
        return (self + other).length() == self.length()

    def __le__(self, other: "Submodule") -> bool:
        return other.contains(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Submodule):
            return NotImplemented
        return self.length() == other.length() and self.contains(other)

    def __hash__(self):
        return hash((self.p, self.n, self.rank, self.length()))

    def intersect(self, other: "Submodule") -> "Submodule":
        if not self.gens or not other.gens:
            return Submodule.zero(self.p, self.n, self.rank)
        # x = G a = H b  <=>  [G | -H] (a, b) = 0
        G = [list(col) for col in zip(*self.gens)]
        H = [list(col) for col in zip(*other.gens)]
        block = [g + [-h for h in hr] for g, hr in zip(G, H)]
        ker = kernel(block, self.p, self.n)
        k = len(self.gens)
        vecs = []
        for sol in ker.gens:
            a = sol[:k]
            vecs.append(tuple(sum(G[r][c] * a[c] for c in range(k)) % self.mod
                              for r in range(self.rank)))
        return Submodule.span(vecs, self.p, self.n, self.rank)

    def project(self, coords) -> "Submodule":
        coords = list(coords)
        return Submodule.span([tuple(g[c] for c in coords) for g in self.gens],
                              self.p, self.n, len(coords))


def kernel(A: Matrix, p: int, n: int) -> Submodule:
    """Kernel of A : (Z/p^n)^cols -> (Z/p^n)^rows."""
    mod = p ** n
    cols = len(A[0])
    vals, _, Q = smith(A, p, n)
    gens = []
    for k in range(cols):
        v = vals[k] if k < len(vals) else n
        if v >= n:
            y = [0] * cols
            y[k] = 1
        else:
            y = [0] * cols
            y[k] = p ** (n - v)
        gens.append(apply(Q, y, mod))
    return Submodule.span(gens, p, n, cols)


def kernel_on(A: Matrix, sub: Submodule) -> Submodule:
    """Elements of ``sub`` killed by A."""
    return sub.intersect(kernel(A, sub.p, sub.n))
