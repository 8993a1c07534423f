"""Definite quaternion algebras over Q: orders, ideals, Brandt graphs.

Everything is exact: quaternions carry Fraction coordinates, lattices are
integer matrices in Hermite normal form over the order basis, and norm
counts come from Fincke-Pohst enumeration with exact integer bounds
(vectorized over the two innermost coordinates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np
from sympy import factorint, isprime

from .padic import PAdicNumber, PrecisionError, Zp

__all__ = [
    "Quaternion",
    "QuaternionAlgebra",
    "MaximalOrder",
    "RightIdeal",
    "RightIdealClass",
    "BrandtGraph",
    "SplittingEmbedding",
    "BallParams",
    "hilbert_symbol",
    "algebra_of_discriminant",
    "maximal_order",
    "norm_enumerate",
    "norm_counts",
    "eichler_mass",
    "ideal_class_graph",
    "ideal_classes",
    "brandt_matrix",
    "brandt_matrix_from_classes",
    "split_embed",
    "hecke_returns_count",
    "divisor_count",
    "chains_equivalent",
    "chain_stabilizer_size",
    "p_neighbors",
    "left_mul_ideal",
    "scale_ideal",
]


# ---------------------------------------------------------------------------
# quaternion arithmetic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Quaternion:
    """t + x i + y j + z k in B(a, b), k = ij."""

    alg: "QuaternionAlgebra"
    t: Fraction
    x: Fraction
    y: Fraction
    z: Fraction

    def coords(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return (self.t, self.x, self.y, self.z)

    def __add__(self, o: "Quaternion") -> "Quaternion":
        return Quaternion(self.alg, self.t + o.t, self.x + o.x, self.y + o.y, self.z + o.z)

    def __sub__(self, o: "Quaternion") -> "Quaternion":
        return Quaternion(self.alg, self.t - o.t, self.x - o.x, self.y - o.y, self.z - o.z)

    def __neg__(self) -> "Quaternion":
        return Quaternion(self.alg, -self.t, -self.x, -self.y, -self.z)

    def __mul__(self, o) -> "Quaternion":
        if not isinstance(o, Quaternion):
            s = Fraction(o)
            return Quaternion(self.alg, self.t * s, self.x * s, self.y * s, self.z * s)
        a, b = self.alg.a, self.alg.b
        t1, x1, y1, z1 = self.coords()
        t2, x2, y2, z2 = o.coords()
        return Quaternion(
            self.alg,
            t1 * t2 + a * x1 * x2 + b * y1 * y2 - a * b * z1 * z2,
            t1 * x2 + x1 * t2 - b * y1 * z2 + b * z1 * y2,
            t1 * y2 + y1 * t2 + a * x1 * z2 - a * z1 * x2,
            t1 * z2 + z1 * t2 + x1 * y2 - y1 * x2,
        )

    __rmul__ = __mul__

    def conj(self) -> "Quaternion":
        return Quaternion(self.alg, self.t, -self.x, -self.y, -self.z)

    def nr(self) -> Fraction:
        a, b = self.alg.a, self.alg.b
        return self.t**2 - a * self.x**2 - b * self.y**2 + a * b * self.z**2

    def tr(self) -> Fraction:
        return 2 * self.t


@dataclass(frozen=True)
class QuaternionAlgebra:
    """B = (a, b / Q) with i^2 = a, j^2 = b, ij = -ji; definite: a, b < 0."""

    a: int
    b: int
    disc: int = field(init=False, compare=False)

    def __post_init__(self):
        if self.a >= 0 or self.b >= 0:
            raise ValueError("definite algebras need a < 0 and b < 0")
        ram = ramified_primes(self.a, self.b)
        d = 1
        for q in ram:
            d *= q
        object.__setattr__(self, "disc", d)

    def element(self, t=0, x=0, y=0, z=0) -> Quaternion:
        return Quaternion(self, Fraction(t), Fraction(x), Fraction(y), Fraction(z))

    def one(self) -> Quaternion:
        return self.element(1)

    def basis_ijk(self) -> list[Quaternion]:
        return [self.element(1), self.element(0, 1), self.element(0, 0, 1),
                self.element(0, 0, 0, 1)]


def _legendre(a: int, p: int) -> int:
    a %= p
    if a == 0:
        return 0
    return 1 if pow(a, (p - 1) // 2, p) == 1 else -1


def hilbert_symbol(a: int, b: int, p) -> int:
    """Hilbert symbol (a, b)_p over Q_p; p = -1 means the real place."""
    if a == 0 or b == 0:
        raise ValueError("arguments must be nonzero")
    if p == -1:
        return -1 if (a < 0 and b < 0) else 1
    if p == 2:
        # strip powers of 2 and use the standard epsilon/omega formula
        al, u = 0, a
        while u % 2 == 0:
            u //= 2
            al += 1
        be, v = 0, b
        while v % 2 == 0:
            v //= 2
            be += 1
        eps = lambda w: ((w - 1) // 2) % 2
        om = lambda w: ((w * w - 1) // 8) % 2
        e = eps(u) * eps(v) + al * om(v) + be * om(u)
        return -1 if e % 2 else 1
    al, u = 0, a
    while u % p == 0:
        u //= p
        al += 1
    be, v = 0, b
    while v % p == 0:
        v //= p
        be += 1
    s = _legendre(u, p) ** be * _legendre(v, p) ** al
    if (al * be) % 2 and p % 4 == 3:
        s = -s
    return s


def ramified_primes(a: int, b: int) -> list[int]:
    out = []
    cand = {2}
    for n in (abs(a), abs(b)):
        cand |= set(factorint(n).keys())
    for q in sorted(cand):
        if hilbert_symbol(a, b, q) == -1:
            out.append(q)
    # parity check against the infinite place (product formula)
    inf = hilbert_symbol(a, b, -1)
    assert (len(out) % 2 == 1) == (inf == -1), "Hilbert product formula violated"
    return out


def algebra_of_discriminant(d: int) -> QuaternionAlgebra:
    """Definite algebra ramified exactly at {d, infinity} for prime d."""
    if not isprime(d):
        raise ValueError("prime discriminants only")
    if d == 2:
        return QuaternionAlgebra(-1, -1)
    for a in (-1, -2, -3, -5, -7, -11, -13, -17, -19, -23):
        alg = QuaternionAlgebra(a, -d)
        if alg.disc == d:
            return alg
    raise RuntimeError(f"no small structure constants found for disc {d}")


# ---------------------------------------------------------------------------
# integer linear algebra helpers
# ---------------------------------------------------------------------------


def hnf(rows: list[list[int]]) -> list[list[int]]:
    """Row Hermite normal form (upper triangular, positive pivots)."""
    m = [list(map(int, r)) for r in rows if any(r)]
    n = 4
    out = []
    col = 0
    while col < n and m:
        pivots = [r for r in m if r[col] != 0]
        rest = [r for r in m if r[col] == 0]
        while len(pivots) > 1:
            pivots.sort(key=lambda r: abs(r[col]))
            r0 = pivots[0]
            newp = [r0]
            for r in pivots[1:]:
                q = r[col] // r0[col]
                r2 = [ri - q * si for ri, si in zip(r, r0)]
                if r2[col] != 0:
                    newp.append(r2)
                elif any(r2):
                    rest.append(r2)
            if len(newp) == len(pivots) and newp == pivots:
                break
            pivots = newp
        if pivots:
            r0 = pivots[0]
            if r0[col] < 0:
                r0 = [-v for v in r0]
            out.append(r0)
        m = rest
        col += 1
    # reduce above pivots; ascending order keeps earlier columns reduced
    for i in range(len(out)):
        piv_col = next(k for k, v in enumerate(out[i]) if v != 0)
        for j in range(i):
            q = out[j][piv_col] // out[i][piv_col]
            if q:
                out[j] = [a - q * b for a, b in zip(out[j], out[i])]
    return out


def integer_kernel(rows: list[list[int]]) -> list[list[int]]:
    """Basis of the left integer kernel {x : x @ rows = 0}."""
    m = len(rows)
    aug = [list(rows[i]) + [1 if j == i else 0 for j in range(m)] for i in range(m)]
    n = len(rows[0])
    r = 0
    for col in range(n):
        piv = None
        for i in range(r, m):
            if aug[i][col] != 0:
                piv = i
                break
        if piv is None:
            continue
        aug[r], aug[piv] = aug[piv], aug[r]
        changed = True
        while changed:
            changed = False
            for i in range(r + 1, m):
                if aug[i][col] == 0:
                    continue
                q = aug[i][col] // aug[r][col]
                aug[i] = [a - q * b for a, b in zip(aug[i], aug[r])]
                if aug[i][col] != 0:
                    aug[r], aug[i] = aug[i], aug[r]
                    changed = True
        r += 1
    kern = [row[n:] for row in aug if all(v == 0 for v in row[:n])]
    return kern


# ---------------------------------------------------------------------------
# maximal orders
# ---------------------------------------------------------------------------


class MaximalOrder:
    """Maximal order in a definite quaternion algebra over Q.

    basis: four quaternions; all lattices downstream are written in this
    basis, where products of basis elements have integer coordinates.
    """

    def __init__(self, alg: QuaternionAlgebra, basis: list[Quaternion]):
        self.alg = alg
        self.basis = basis
        self._coord_mat = [
            [q.t, q.x, q.y, q.z] for q in basis
        ]  # rows: basis in (1,i,j,k)-coords
        self._inv_mat = _invert4(self._coord_mat)
        self.mult_table = self._build_mult_table()
        self.gram = [
            [int((basis[i] * basis[j].conj()).tr()) for j in range(4)]
            for i in range(4)
        ]
        det = _det4(self.gram)
        if det != alg.disc**2:
            raise ValueError(f"Gram determinant {det} != disc^2 = {alg.disc ** 2}")

    # -- coordinates -----------------------------------------------------------

    def to_coords(self, q: Quaternion) -> list[Fraction]:
        # coordinates solve v = x @ C for the basis matrix C (rows = basis)
        v = [q.t, q.x, q.y, q.z]
        return [sum(v[k] * self._inv_mat[k][i] for k in range(4)) for i in range(4)]

    def from_coords(self, x) -> Quaternion:
        t = sum(Fraction(x[i]) * self._coord_mat[i][0] for i in range(4))
        xx = sum(Fraction(x[i]) * self._coord_mat[i][1] for i in range(4))
        y = sum(Fraction(x[i]) * self._coord_mat[i][2] for i in range(4))
        z = sum(Fraction(x[i]) * self._coord_mat[i][3] for i in range(4))
        return Quaternion(self.alg, t, xx, y, z)

    def _build_mult_table(self):
        tab = []
        for i in range(4):
            row = []
            for j in range(4):
                c = self.to_coords(self.basis[i] * self.basis[j])
                if any(ci.denominator != 1 for ci in c):
                    raise ValueError("basis does not span a ring")
                row.append([int(ci) for ci in c])
            tab.append(row)
        return tab

    def contains(self, q: Quaternion) -> bool:
        return all(c.denominator == 1 for c in self.to_coords(q))

    def nr_coords(self, x) -> Fraction:
        """Reduced norm of sum x_i e_i: (1/2) x^T Gram x."""
        acc = Fraction(0)
        for i in range(4):
            for j in range(4):
                acc += Fraction(x[i]) * Fraction(x[j]) * self.gram[i][j]
        return acc / 2

    def left_mul_matrix(self, x) -> list[list[Fraction]]:
        """Matrix (columns) of left multiplication by sum x_i e_i in the basis."""
        cols = []
        for j in range(4):
            col = [Fraction(0)] * 4
            for i in range(4):
                if x[i] == 0:
                    continue
                for k in range(4):
                    col[k] += Fraction(x[i]) * self.mult_table[i][j][k]
            cols.append(col)
        # entry [k][j] = coefficient of e_k in (x * e_j)
        return [[cols[j][k] for j in range(4)] for k in range(4)]

    def conj_coords(self, x) -> list[Fraction]:
        q = self.from_coords(x).conj()
        return self.to_coords(q)

    def units_count(self) -> int:
        return len(norm_enumerate(self, 1))


def _det4(m) -> int:
    a = np.array(m, dtype=object)

    def det(mm):
        if len(mm) == 1:
            return mm[0][0]
        tot = 0
        for j in range(len(mm)):
            minor = [row[:j] + row[j + 1 :] for row in mm[1:]]
            tot += (-1) ** j * mm[0][j] * det(minor)
        return tot

    return det([list(r) for r in m])


def _invert4(m):
    """Exact inverse of a 4x4 Fraction matrix (Gauss-Jordan)."""
    n = 4
    a = [[Fraction(m[i][j]) for j in range(n)] + [Fraction(int(i == j)) for j in range(n)]
         for i in range(n)]
    for col in range(n):
        piv = next(i for i in range(col, n) if a[i][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        pv = a[col][col]
        a[col] = [v / pv for v in a[col]]
        for i in range(n):
            if i != col and a[i][col] != 0:
                f = a[i][col]
                a[i] = [v - f * w for v, w in zip(a[i], a[col])]
    return [row[n:] for row in a]


@lru_cache(maxsize=None)
def maximal_order(d: int) -> MaximalOrder:
    """Maximal order of the discriminant-d algebra, found by saturation.

    Starting from Z<1,i,j,k>, integral elements with denominator dividing
    2d are adjoined while the enlarged lattice stays a ring, until the
    Gram determinant reaches d^2.
    """
    alg = algebra_of_discriminant(d)
    basis = alg.basis_ijk()
    lat = [[Fraction(int(i == j)) for j in range(4)] for i in range(4)]  # in ijk-coords

    def lat_to_quats(l):
        return [Quaternion(alg, *row) for row in l]

    def gram_det(l):
        qs = lat_to_quats(l)
        g = [[(qs[i] * qs[j].conj()).tr() for j in range(4)] for i in range(4)]
        return _det4(g)

    target = d * d
    denoms = sorted({2} | set(factorint(2 * d).keys()))
    while gram_det(lat) != target:
        improved = False
        for mden in denoms:
            for v0 in range(mden):
                for v1 in range(mden):
                    for v2 in range(mden):
                        for v3 in range(mden):
                            if (v0, v1, v2, v3) == (0, 0, 0, 0):
                                continue
                            cand = [
                                sum(Fraction(c, mden) * lat[i][k] for i, c in
                                    enumerate((v0, v1, v2, v3)))
                                for k in range(4)
                            ]
                            q = Quaternion(alg, *cand)
                            if q.tr().denominator != 1 or q.nr().denominator != 1:
                                continue
                            new = _ring_closure(alg, lat + [cand])
                            if new is None:
                                continue
                            if abs(gram_det(new)) < abs(gram_det(lat)):
                                lat = new
                                improved = True
        if not improved:
            raise RuntimeError("saturation stalled before reaching a maximal order")
    return MaximalOrder(alg, lat_to_quats(lat))


def _ring_closure(alg, gens) -> Optional[list[list[Fraction]]]:
    """HNF basis of the ring generated; None if it fails to be an order."""
    den = 1
    for row in gens:
        for c in row:
            den = den * Fraction(c).denominator // math.gcd(den, Fraction(c).denominator)
    rows = [[int(Fraction(c) * den) for c in row] for row in gens]
    basis = hnf(rows)
    if len(basis) != 4:
        return None
    for _ in range(6):
        qs = [Quaternion(alg, *[Fraction(c, den) for c in row]) for row in basis]
        prods = []
        closed = True
        for qi in qs:
            for qj in qs:
                pr = qi * qj
                if pr.tr().denominator != 1 or pr.nr().denominator != 1:
                    return None
                prods.append([int(v * den) if (v * den).denominator == 1 else None
                              for v in (pr.t, pr.x, pr.y, pr.z)])
                if any(v is None for v in prods[-1]):
                    return None
        new = hnf(basis + prods)
        if len(new) != 4:
            return None
        if new == basis:
            # integral closure reached; check all products stayed inside
            return [[Fraction(c, den) for c in row] for row in basis]
        basis = new
    return None


# ---------------------------------------------------------------------------
# norm-form enumeration (Fincke-Pohst with exact bounds)
# ---------------------------------------------------------------------------


def _ldl(q: list[list[Fraction]]):
    """LDL^T of a symmetric positive definite Fraction matrix."""
    n = len(q)
    L = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    D = [Fraction(0)] * n
    a = [row[:] for row in q]
    for k in range(n):
        D[k] = a[k][k]
        if D[k] <= 0:
            raise ValueError("form is not positive definite")
        for i in range(k + 1, n):
            L[i][k] = a[i][k] / D[k]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] -= L[i][k] * L[j][k] * D[k]
    return L, D


def _floor_sqrt_frac(x: Fraction) -> int:
    if x < 0:
        return -1
    num, den = x.numerator, x.denominator
    return math.isqrt(num * den) // den


def _int_window(shift: Fraction, t: Fraction) -> tuple[int, int]:
    """Exact integer range of x with (x + shift)^2 <= t (empty when lo > hi)."""
    if t < 0:
        return 1, 0
    shift = Fraction(shift)
    a, b = shift.numerator, shift.denominator
    T = t * b * b
    M = math.isqrt(T.numerator * T.denominator) // T.denominator
    lo = -((M + a) // b)
    hi = (M - a) // b
    return lo, hi


def norm_enumerate(order: MaximalOrder, n: int) -> list[tuple[int, int, int, int]]:
    """All coordinate vectors with reduced norm exactly n (n >= 1)."""
    return _lattice_vectors_of_norm(_gram_key(order), n)


def _gram_key(order: MaximalOrder):
    return tuple(tuple(int(v) for v in row) for row in order.gram)


@lru_cache(maxsize=64)
def _ldl_cached(gram_key):
    q = [[Fraction(v, 2) for v in row] for row in gram_key]
    return _ldl(q)


def _lattice_vectors_of_norm(gram_key, n: int) -> list[tuple[int, int, int, int]]:
    L, D = _ldl_cached(gram_key)
    out: list[tuple[int, int, int, int]] = []
    target = Fraction(n)

    def rec(level, rem, partial):
        # Q(x) = sum_k D[k] (x_k + sum_{j>k} L[j][k] x_j)^2, levels from 3 down
        k = level
        shift = Fraction(sum(L[j][k] * partial[j] for j in range(k + 1, 4)))
        lo, hi = _int_window(shift, rem / D[k])
        for xk in range(lo, hi + 1):
            val = D[k] * (Fraction(xk) + shift) ** 2
            if val > rem:
                continue
            if k == 0:
                if val == rem:
                    out.append((xk, partial[1], partial[2], partial[3]))
            else:
                partial[k] = xk
                rec(k - 1, rem - val, partial)
                partial[k] = 0

    partial = [0, 0, 0, 0]
    rec(3, target, partial)
    return [v for v in out if v != (0, 0, 0, 0)]


def norm_counts(order_or_gram, bound: int) -> np.ndarray:
    """counts[n] = #{v in lattice : nr(v) = n} for 0 <= n <= bound.

    Outer two coordinates enumerated exactly, inner two vectorized.
    """
    gram_key = (
        _gram_key(order_or_gram)
        if isinstance(order_or_gram, MaximalOrder)
        else tuple(tuple(int(v) for v in r) for r in order_or_gram)
    )
    return _norm_counts_cached(gram_key, bound)


@lru_cache(maxsize=128)
def _norm_counts_cached(gram_key, bound: int) -> np.ndarray:
    G = np.array(gram_key, dtype=np.int64)
    Q2 = G  # 2*nr(x) = x^T G x; work with even target 2*bound
    L, D = _ldl_cached(gram_key)
    counts = np.zeros(bound + 1, dtype=np.int64)
    # exact coordinate windows from the LDL decomposition
    lo3, hi3 = _int_window(Fraction(0), Fraction(bound) / D[3])
    for x3 in range(lo3, hi3 + 1):
        rem3 = Fraction(bound) - D[3] * Fraction(x3) ** 2
        if rem3 < 0:
            continue
        sh2 = Fraction(L[3][2] * x3)
        lo2, hi2 = _int_window(sh2, rem3 / D[2])
        for x2 in range(lo2, hi2 + 1):
            rem2 = rem3 - D[2] * (Fraction(x2) + sh2) ** 2
            if rem2 < 0:
                continue
            # inner pair (x0, x1) vectorized; the x0 window must cover the
            # shifted range for every admissible x1, so widen by the
            # off-diagonal spread before masking exactly
            sh1 = Fraction(L[3][1] * x3 + L[2][1] * x2)
            lo1, hi1 = _int_window(sh1, rem2 / D[1])
            if lo1 > hi1:
                continue
            sh0c = Fraction(L[3][0] * x3 + L[2][0] * x2)
            w0 = _floor_sqrt_frac(rem2 / D[0]) + 1
            l01 = abs(Fraction(L[1][0]))
            spread = (
                int(l01 * max(abs(lo1), abs(hi1)))
                + int(abs(sh0c))
                + w0
                + 2
            )
            lo0, hi0 = -spread, spread
            xs0 = np.arange(lo0, hi0 + 1, dtype=np.int64)
            xs1 = np.arange(lo1, hi1 + 1, dtype=np.int64)
            if len(xs0) == 0 or len(xs1) == 0:
                continue
            X0, X1 = np.meshgrid(xs0, xs1, indexing="ij")
            v2, v3v = x2, x3
            # 2*nr = sum_{ij} G_ij x_i x_j
            tot = (
                G[0, 0] * X0 * X0
                + G[1, 1] * X1 * X1
                + 2 * G[0, 1] * X0 * X1
                + 2 * X0 * (G[0, 2] * v2 + G[0, 3] * v3v)
                + 2 * X1 * (G[1, 2] * v2 + G[1, 3] * v3v)
                + G[2, 2] * v2 * v2
                + G[3, 3] * v3v * v3v
                + 2 * G[2, 3] * v2 * v3v
            )
            vals = tot // 2
            good = (tot >= 0) & (tot % 2 == 0) & (vals <= bound)
            np.add.at(counts, vals[good], 1)
    counts[0] -= 1  # drop the zero vector
    counts[0] = max(counts[0], 0)
    return counts


def eichler_mass(d: int) -> Fraction:
    """Eichler mass sum 1/#O_i^x = (d-1)/24 for prime discriminant d."""
    if not isprime(d):
        raise ValueError("prime discriminants only")
    return Fraction(d - 1, 24)


def divisor_count(n: int) -> int:
    out = 1
    for _, k in factorint(n).items():
        out *= k + 1
    return out


# ---------------------------------------------------------------------------
# right ideals and their classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RightIdeal:
    """Lattice basis (rows, integers over the order basis) / den."""

    order: MaximalOrder
    rows: tuple[tuple[int, int, int, int], ...]
    den: int = 1

    @staticmethod
    def unit_ideal(order: MaximalOrder) -> "RightIdeal":
        return RightIdeal(order, tuple(tuple(int(i == j) for j in range(4)) for i in range(4)), 1)

    def basis_coords(self) -> list[list[Fraction]]:
        return [[Fraction(v, self.den) for v in row] for row in self.rows]

    def index_in_order(self) -> Fraction:
        det = abs(_det4([list(r) for r in self.rows]))
        return Fraction(det, self.den**4)

    def nr(self) -> Fraction:
        idx = self.index_in_order()
        num = math.isqrt(idx.numerator)
        den = math.isqrt(idx.denominator)
        if num * num != idx.numerator or den * den != idx.denominator:
            raise ValueError("ideal index is not a perfect square")
        return Fraction(num, den)

    def gram(self) -> list[list[Fraction]]:
        o = self.order
        qs = [o.from_coords(c) for c in self.basis_coords()]
        return [[(qs[i] * qs[j].conj()).tr() for j in range(4)] for i in range(4)]

    def scaled_gram_int(self) -> tuple[tuple[int, ...], ...]:
        """Gram of the norm form divided by nr(I): integral, det = disc^2."""
        nrm = self.nr()
        g = self.gram()
        out = []
        for row in g:
            r = []
            for v in row:
                q = Fraction(v) / nrm
                if q.denominator != 1:
                    raise ValueError("non-integral reduced Gram")
                r.append(int(q))
            out.append(tuple(r))
        return tuple(out)

    def theta_prefix(self, length: int = 12) -> tuple[int, ...]:
        counts = norm_counts(self.scaled_gram_int(), length)
        return tuple(int(c) for c in counts[1 : length + 1])

    def contains_coords(self, x: list[Fraction]) -> bool:
        # forward-substitute: pivot columns are ascending, and only the
        # first remaining row touches each pivot column
        v = [Fraction(c) * self.den for c in x]
        rows = [list(r) for r in self.rows]
        coeffs = [Fraction(0)] * 4
        vv = v[:]
        for i in range(4):
            piv = next((k for k in range(4) if rows[i][k] != 0), None)
            if piv is None:
                continue
            c = vv[piv] / rows[i][piv]
            coeffs[i] = c
            vv = [a - c * b for a, b in zip(vv, rows[i])]
        return all(x == 0 for x in vv) and all(c.denominator == 1 for c in coeffs)


def _ideal_from_rows(order, frac_rows, primitive: bool = True) -> RightIdeal:
    """Lattice spanned by the rows; primitive=True strips rational content
    (only safe where the ideal is considered up to scalars)."""
    den = 1
    for row in frac_rows:
        for c in row:
            c = Fraction(c)
            den = den * c.denominator // math.gcd(den, c.denominator)
    rows = [[int(Fraction(c) * den) for c in row] for row in frac_rows]
    h = hnf(rows)
    if len(h) != 4:
        raise ValueError("rank-deficient ideal basis")
    if primitive:
        g = 0
        for row in h:
            for v in row:
                g = math.gcd(g, v)
        g = math.gcd(g, den)
        if g > 1:
            h = [[v // g for v in row] for row in h]
            den //= g
    else:
        g = math.gcd(den, math.gcd(*[math.gcd(*row) for row in h]) if h else den)
        if g > 1:
            h = [[v // g for v in row] for row in h]
            den //= g
    return RightIdeal(order, tuple(tuple(r) for r in h), den)


def ideal_product_hom(I: RightIdeal, J: RightIdeal) -> list[list[Fraction]]:
    """Basis of {alpha : alpha J subset I} = I * conj(J) / nr(J)."""
    o = I.order
    nrj = J.nr()
    gens = []
    for bi in I.basis_coords():
        qi = o.from_coords(bi)
        for bj in J.basis_coords():
            qj = o.from_coords(bj).conj()
            pr = qi * qj
            gens.append([c / nrj for c in o.to_coords(pr)])
    den = 1
    for row in gens:
        for c in row:
            den = den * c.denominator // math.gcd(den, c.denominator)
    rows = [[int(c * den) for c in row] for row in gens]
    h = hnf(rows)
    return [[Fraction(v, den) for v in row] for row in h]


def lattice_intersection(b1: list[list[Fraction]], b2: list[list[Fraction]]):
    """Intersection of two full lattices given by Fraction row bases."""
    den = 1
    for rows in (b1, b2):
        for row in rows:
            for c in row:
                c = Fraction(c)
                den = den * c.denominator // math.gcd(den, c.denominator)
    r1 = [[int(Fraction(c) * den) for c in row] for row in b1]
    r2 = [[int(Fraction(c) * den) for c in row] for row in b2]
    stacked = r1 + [[-v for v in row] for row in r2]
    kern = integer_kernel(stacked)
    vecs = []
    for k in kern:
        v = [sum(k[i] * r1[i][c] for i in range(4)) for c in range(4)]
        vecs.append(v)
    h = hnf(vecs)
    return [[Fraction(v, den) for v in row] for row in h]


def _gram_of_coords(order, rows) -> list[list[Fraction]]:
    qs = [order.from_coords(r) for r in rows]
    return [[(qs[i] * qs[j].conj()).tr() for j in range(4)] for i in range(4)]


def _scaled_gram_target(g, target: Fraction):
    """(integer gram key, integer target) after one joint scaling, or None.

    The scaling must keep the quadratic form even-integral in the sense
    x^T G x in 2Z is not required, only G integral and the target integral.
    """
    den = 1
    for row in g:
        for c in row:
            c = Fraction(c)
            den = den * c.denominator // math.gcd(den, c.denominator)
    t = Fraction(target) * den
    if t.denominator != 1:
        den *= t.denominator
        t = Fraction(target) * den
    gk = tuple(tuple(int(Fraction(v) * den) for v in row) for row in g)
    if t.denominator != 1:
        return None
    return gk, int(t)


def _find_norm_vector(order, rows, target: Fraction):
    """A lattice vector of given reduced norm in the span of rows, or None."""
    g = _gram_of_coords(order, rows)
    st = _scaled_gram_target(g, target)
    if st is None:
        return None
    gk, t = st
    vecs = _lattice_vectors_of_norm(gk, t)
    if not vecs:
        return None
    x = vecs[0]
    return [sum(Fraction(x[i]) * rows[i][c] for i in range(4)) for c in range(4)]


def chains_equivalent(
    c1: list[RightIdeal], c2: list[RightIdeal]
) -> Optional[list[Fraction]]:
    """alpha with alpha * c1[k] = c2[k] for all k, or None.

    nr(alpha) is forced to nr(c2[0])/nr(c1[0]); existence in the
    intersected Hom-lattices is decided by exact norm enumeration.
    """
    if len(c1) != len(c2):
        return None
    order = c1[0].order
    target = c2[0].nr() / c1[0].nr()
    for a, b in zip(c1, c2):
        if b.nr() / a.nr() != target:
            return None
    hom = ideal_product_hom(c2[0], c1[0])
    for a, b in zip(c1[1:], c2[1:]):
        hom = lattice_intersection(hom, ideal_product_hom(b, a))
    return _find_norm_vector(order, hom, target)


def chain_stabilizer_size(chain: list[RightIdeal]) -> int:
    """#{alpha : alpha I_k = I_k for all k} (includes +-1)."""
    order = chain[0].order
    hom = ideal_product_hom(chain[0], chain[0])
    for a in chain[1:]:
        hom = lattice_intersection(hom, ideal_product_hom(a, a))
    g = _gram_of_coords(order, hom)
    st = _scaled_gram_target(g, Fraction(1))
    if st is None:
        return 0
    gk, t = st
    return len(_lattice_vectors_of_norm(gk, t))


def left_mul_ideal(order, alpha_coords, I: RightIdeal) -> RightIdeal:
    qa = order.from_coords(alpha_coords)
    rows = []
    for b in I.basis_coords():
        qb = order.from_coords(b)
        rows.append(order.to_coords(qa * qb))
    return _ideal_from_rows(order, rows, primitive=False)


def scale_ideal(I: RightIdeal, s: Fraction) -> RightIdeal:
    return _ideal_from_rows(
        I.order, [[c * s for c in row] for row in I.basis_coords()], primitive=False
    )


# ---------------------------------------------------------------------------
# p-neighbors and the Brandt graph
# ---------------------------------------------------------------------------


def p_neighbors(I: RightIdeal, p: int) -> list[RightIdeal]:
    """The p+1 right-stable index-p^2 sublattices J with nr(J) = p nr(I)."""
    o = I.order
    basis = I.basis_coords()
    # right multiplication matrices on I/pI in the coordinates of I's basis
    mats = []
    inv = _invert4([[Fraction(v) for v in row] for row in basis])
    for k in range(4):
        cols = []
        for b in basis:
            q = o.from_coords(b) * o.basis[k]
            c = o.to_coords(q)
            # express in I-basis: coordinates solve c = cb @ basis-matrix
            cb = [sum(c[t] * inv[t][i] for t in range(4)) for i in range(4)]
            cols.append(cb)
        mats.append(cols)  # mats[k][row r of I] = coords of b_r e_k in I-basis

    found: list[tuple] = []
    seen = set()
    for seed in range(1, p**4):
        v = ((seed // p**3) % p, (seed // p**2) % p, (seed // p) % p, seed % p)
        if all(x == 0 for x in v):
            continue
        # submodule generated by v under right multiplication
        gens = [list(v)]
        for k in range(4):
            w = [0, 0, 0, 0]
            for r in range(4):
                if v[r] == 0:
                    continue
                for c in range(4):
                    num = mats[k][r][c]
                    if num.denominator != 1:
                        raise ArithmeticError("right action not integral on I")
                    w[c] = (w[c] + v[r] * int(num)) % p
            gens.append(w)
        basis_mod = _row_reduce_mod_p(gens, p)
        if len(basis_mod) != 2:
            continue
        key = tuple(map(tuple, basis_mod))
        if key in seen:
            continue
        seen.add(key)
        found.append(basis_mod)
        if len(found) == p + 1:
            break
    if len(found) != p + 1:
        raise ArithmeticError(f"expected {p + 1} neighbors, found {len(found)}")
    out = []
    for bm in found:
        rows = [[Fraction(p) * Fraction(c) for c in row] for row in basis]
        for w in bm:
            rows.append([sum(Fraction(w[r]) * Fraction(basis[r][c]) for r in range(4))
                         for c in range(4)])
        J = _ideal_from_rows(o, rows, primitive=False)
        assert J.nr() == I.nr() * p, "neighbor norm mismatch"
        out.append(J)
    return out


def _row_reduce_mod_p(rows, p):
    """Canonical RREF mod p (rows sorted by pivot, columns fully cleared)."""
    m = [list(r) for r in rows]
    out = []
    for col in range(4):
        piv = None
        for r in m:
            if r[col] % p != 0:
                piv = r
                break
        if piv is None:
            continue
        inv = pow(piv[col], -1, p)
        piv = [(v * inv) % p for v in piv]
        m = [[(r[c] - r[col] * piv[c]) % p for c in range(4)] for r in m if r is not piv]
        out = [[(r[c] - r[col] * piv[c]) % p for c in range(4)] for r in out]
        out.append(piv)
    return out


@dataclass
class RightIdealClass:
    ideal: RightIdeal
    weight: Fraction  # #(left-order units)/2
    units: int        # full unit count of the left order
    theta: tuple[int, ...]


@dataclass
class BrandtGraph:
    """Ideal-class graph at p: vertices, weights, directed edges + reversal."""

    disc: int
    prime: int
    classes: list[RightIdealClass]
    edges: list[dict]  # {id, from, to, reverse_id}

    @property
    def class_number(self) -> int:
        return len(self.classes)

    def mass(self) -> Fraction:
        return sum(Fraction(1, c.units) for c in self.classes)

    def weighted_adjacency(self) -> np.ndarray:
        h = len(self.classes)
        A = np.zeros((h, h), dtype=np.int64)
        for e in self.edges:
            A[e["from"], e["to"]] += 1
        return A


def _classify_chain(chain, reps, theta_cache) -> Optional[int]:
    key = tuple(i.theta_prefix() for i in chain)
    for idx, (rep_chain, rep_key) in enumerate(zip(reps, theta_cache)):
        if rep_key != key:
            continue
        if chains_equivalent(chain, rep_chain) is not None:
            return idx
    return None


def ideal_classes(order: MaximalOrder, p: int) -> list[RightIdealClass]:
    """Right ideal classes by BFS over p-neighbors from the unit ideal."""
    if order.alg.disc % p == 0:
        raise ValueError("p must not divide the discriminant")
    start = RightIdeal.unit_ideal(order)
    reps = [[start]]
    keys = [(start.theta_prefix(),)]
    frontier = [start]
    while frontier:
        new_frontier = []
        for I in frontier:
            for J in p_neighbors(I, p):
                Jn = _normalize_ideal(J)
                c = _classify_chain([Jn], reps, keys)
                if c is None:
                    reps.append([Jn])
                    keys.append((Jn.theta_prefix(),))
                    new_frontier.append(Jn)
        frontier = new_frontier
    out = []
    for (I,) in reps:
        stab = chain_stabilizer_size([I])
        out.append(
            RightIdealClass(I, Fraction(stab, 2), stab, I.theta_prefix())
        )
    return out


def _normalize_ideal(I: RightIdeal) -> RightIdeal:
    """Scale by a rational to make the ideal integral and primitive."""
    rows = [list(r) for r in I.rows]
    g = 0
    for row in rows:
        for v in row:
            g = math.gcd(g, v)
    # divide by content, keep denominator 1 if possible
    return _ideal_from_rows(I.order, [[Fraction(v, g if g else 1) for v in row]
                                      for row in rows])


def ideal_class_graph(order: MaximalOrder, p: int) -> BrandtGraph:
    """Vertices + directed edge classes (length-1 chains) with reversal."""
    classes = ideal_classes(order, p)
    reps = [[c.ideal] for c in classes]
    keys = [(c.ideal.theta_prefix(),) for c in classes]

    # edge classes: chains (I, J) up to equivalence
    echains = []
    ekeys = []
    eweights = []
    for ci, c in enumerate(classes):
        for J in p_neighbors(c.ideal, p):
            ch = [c.ideal, J]
            key = tuple(i.theta_prefix() for i in ch)
            idx = None
            for k, (rc, rk) in enumerate(zip(echains, ekeys)):
                if rk == key and chains_equivalent(ch, rc) is not None:
                    idx = k
                    break
            if idx is None:
                echains.append(ch)
                ekeys.append(key)
    edges = []
    for eid, ch in enumerate(echains):
        frm = _classify_chain([ch[0]], reps, keys)
        to = _classify_chain([_normalize_ideal(ch[1])], reps, keys)
        edges.append({"id": eid, "from": frm, "to": to, "reverse_id": None})
    # reversal: (I > J) -> (J > pI); chains compare up to one global scalar,
    # so the pair must not be rescaled ideal-by-ideal
    for eid, ch in enumerate(echains):
        rev = [ch[1], scale_ideal(ch[0], Fraction(p))]
        ridx = None
        rkey = tuple(i.theta_prefix() for i in rev)
        for k, (rc, rk) in enumerate(zip(echains, ekeys)):
            if rkey == rk and chains_equivalent(rev, rc) is not None:
                ridx = k
                break
        if ridx is None:
            raise ArithmeticError("edge reversal failed to classify")
        edges[eid]["reverse_id"] = ridx
    g = BrandtGraph(order.alg.disc, p, classes, edges)
    _check_weighted_degree(g)
    return g


def _check_weighted_degree(g: BrandtGraph):
    b = brandt_matrix_from_classes(g.classes, g.prime)
    for i in range(len(g.classes)):
        if int(b[i].sum()) != g.prime + 1:
            raise ArithmeticError("weighted degree != p + 1")


# ---------------------------------------------------------------------------
# Brandt matrices
# ---------------------------------------------------------------------------


def brandt_matrix(order: MaximalOrder, p: int, n: int) -> np.ndarray:
    """B(n) on the ideal classes at p (rows act: (B f)_i = sum_j B_ij f_j)."""
    classes = ideal_classes(order, p)
    return brandt_matrix_from_classes(classes, n)


def brandt_matrix_from_classes(classes: list[RightIdealClass], n: int) -> np.ndarray:
    h = len(classes)
    B = np.zeros((h, h), dtype=np.int64)
    max_needed = n
    for i in range(h):
        for j in range(h):
            hom = ideal_product_hom(classes[i].ideal, classes[j].ideal)
            target = Fraction(n) * classes[i].ideal.nr() / classes[j].ideal.nr()
            g = _gram_of_coords(classes[i].ideal.order, hom)
            st = _scaled_gram_target(g, target)
            if st is None:
                count = 0
            else:
                gk, t = st
                cnts = norm_counts(gk, t)
                count = int(cnts[t]) if t <= len(cnts) - 1 else 0
            B[i, j] = count // classes[j].units
            if count % classes[j].units:
                raise ArithmeticError("unit action not free on Hom set")
    return B


# ---------------------------------------------------------------------------
# splitting embedding B -> M_2(Q_p)
# ---------------------------------------------------------------------------


@dataclass
class SplittingEmbedding:
    order: MaximalOrder
    prime: int
    precision: int
    images: list[np.ndarray]  # 2x2 integer matrices mod p^M for each basis elt

    def matrix_of_coords(self, coords) -> np.ndarray:
        M = self.prime**self.precision
        out = np.zeros((2, 2), dtype=object)
        for i, c in enumerate(coords):
            c = Fraction(c)
            if c.denominator % self.prime == 0:
                raise ValueError("p in denominator; scale first")
            ci = c.numerator * pow(c.denominator, -1, M) % M
            out = (out + ci * self.images[i]) % M
        return out

    def matrix_of(self, q: Quaternion) -> np.ndarray:
        return self.matrix_of_coords(self.order.to_coords(q))


def split_embed(order: MaximalOrder, p: int, precision: int = 12) -> SplittingEmbedding:
    """Embedding R tensor Z_p -> M_2(Z_p) mod p^precision by Hensel lifting.

    Finds alpha in R with split reduced characteristic polynomial, lifts a
    root, forms the rank-one idempotent e, and represents left
    multiplication on the free rank-2 module R_p e.
    """
    if order.alg.disc % p == 0:
        raise ValueError("p ramifies; no splitting")
    M = p**precision
    alpha = _find_split_element(order, p)
    t, n = int(alpha_tr := order.from_coords(alpha).tr()), int(order.from_coords(alpha).nr())
    lam = _hensel_root_quadratic(t, n, p, precision)
    lam2 = (t - lam) % M
    dinv = pow((lam2 - lam) % M, -1, M)
    # e = (alpha - lam) * dinv in R tensor Z/p^M (coords in order basis)
    e = [(c * dinv) % M for c in _sub_scalar(order, alpha, lam, M)]
    # module R e: generators e_i * e
    gens = []
    for i in range(4):
        g = [0, 0, 0, 0]
        for r in range(4):
            if e[r] == 0:
                continue
            for c in range(4):
                g[c] = (g[c] + e[r] * order.mult_table[i][r][c]) % M
        gens.append(g)
    v1, v2, piv = _two_pivot_basis(gens, p, M)
    images = []
    for k in range(4):
        cols = []
        for v in (v1, v2):
            w = [0, 0, 0, 0]
            for r in range(4):
                if v[r] == 0:
                    continue
                for c in range(4):
                    w[c] = (w[c] + v[r] * order.mult_table[k][r][c]) % M
            cols.append(_solve_in_basis(w, v1, v2, piv, p, M))
        img = np.array([[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]],
                       dtype=object)
        images.append(img % M)
    emb = SplittingEmbedding(order, p, precision, images)
    _verify_embedding(emb)
    return emb


def _sub_scalar(order, coords, lam, M):
    one = order.to_coords(order.alg.one())
    return [(int(coords[i]) - lam * int(one[i])) % M for i in range(4)]


def _find_split_element(order, p):
    rng = range(-3, 4)
    for c0 in range(0, 3):
        for c1 in rng:
            for c2 in rng:
                for c3 in rng:
                    coords = [c0, c1, c2, c3]
                    q = order.from_coords(coords)
                    t, n = q.tr(), q.nr()
                    if t.denominator != 1 or n.denominator != 1:
                        continue
                    disc = int(t) ** 2 - 4 * int(n)
                    if disc == 0:
                        continue
                    if p == 2:
                        if disc % 2 == 1 and disc % 8 == 1:
                            return coords
                    elif disc % p != 0 and _legendre(disc, p) == 1:
                        return coords
    raise RuntimeError("no split element found")


def _hensel_root_quadratic(t: int, n: int, p: int, precision: int) -> int:
    M = p**precision
    f = lambda x: (x * x - t * x + n) % M
    root = None
    start_mod = 8 if p == 2 else p
    for r in range(start_mod):
        if (r * r - t * r + n) % start_mod == 0 and (2 * r - t) % p != 0:
            root = r
            break
    if root is None:
        raise ArithmeticError("no simple root mod p")
    x = root
    for _ in range(precision.bit_length() + 3):
        fx = f(x)
        if fx == 0:
            break
        x = (x - fx * pow((2 * x - t) % M, -1, M)) % M
    assert f(x) == 0, "Hensel lift failed"
    return x


def _two_pivot_basis(gens, p, M):
    rows = [list(g) for g in gens]
    basis = []
    pivots = []
    for row in rows:
        r = row[:]
        for b, piv in zip(basis, pivots):
            f = r[piv] * pow(b[piv], -1, M) % M
            r = [(x - f * y) % M for x, y in zip(r, b)]
        unit_cols = [c for c, v in enumerate(r) if v % p != 0]
        if unit_cols:
            basis.append(r)
            pivots.append(unit_cols[0])
        if len(basis) == 2:
            break
    if len(basis) != 2:
        raise ArithmeticError("idempotent module is not free of rank 2 mod p")
    return basis[0], basis[1], pivots


def _solve_in_basis(w, v1, v2, piv, p, M):
    p1, p2 = piv
    a = w[p1] * pow(v1[p1], -1, M) % M
    w2 = [(x - a * y) % M for x, y in zip(w, v1)]
    b = w2[p2] * pow(v2[p2], -1, M) % M
    w3 = [(x - b * y) % M for x, y in zip(w2, v2)]
    if any(v % M != 0 for v in w3):
        raise ArithmeticError("vector outside the rank-2 module")
    return [a, b]


def _verify_embedding(emb: SplittingEmbedding):
    o = emb.order
    M = emb.prime**emb.precision
    import random

    rng = random.Random(8128)
    for _ in range(24):
        x = [rng.randrange(-9, 10) for _ in range(4)]
        y = [rng.randrange(-9, 10) for _ in range(4)]
        qx, qy = o.from_coords(x), o.from_coords(y)
        mx, my = emb.matrix_of_coords(x), emb.matrix_of_coords(y)
        mxy = emb.matrix_of(qx * qy)
        if ((mx @ my - mxy) % M).any():
            raise ArithmeticError("embedding is not multiplicative")
        det = (mx[0, 0] * mx[1, 1] - mx[0, 1] * mx[1, 0]) % M
        if (det - int(qx.nr())) % M:
            raise ArithmeticError("det does not match the reduced norm")
        trc = (mx[0, 0] + mx[1, 1]) % M
        if (trc - int(qx.tr())) % M:
            raise ArithmeticError("trace does not match the reduced trace")


# ---------------------------------------------------------------------------
# Hecke returns: S = M_n cap z(m) x B(C, eps) x^{-1}
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BallParams:
    """B(C, eps): diagonal in C, off-diagonal of absolute value <= eps.

    C is the congruence unit subgroup 1 + p^c_depth Z_p (full units for
    c_depth = 0); eps = p^{-eps_exp} must be admissible (a power of p).
    """

    prime: int
    c_depth: int
    eps_exp: int
    omega: tuple = ()  # conjugating elements x as exact rational 2x2 rows

    def __post_init__(self):
        if self.eps_exp < 0:
            raise ValueError("eps must be <= 1")
        for x in self.omega:
            if not _conjugate_stays_in_k(self.prime, x, self.c_depth, self.eps_exp):
                raise ValueError("x B(C,eps) x^{-1} not contained in K for some x")

    @property
    def eps(self) -> Fraction:
        return Fraction(1, self.prime**self.eps_exp)


def _mat_val_bounds(p: int, x) -> list[list[int]]:
    out = []
    for row in x:
        r = []
        for c in row:
            c = Fraction(c)
            r.append(_frac_val(p, c) if c != 0 else 10**6)
        out.append(r)
    return out


def _frac_val(p: int, q: Fraction) -> int:
    v = 0
    n = q.numerator
    while n % p == 0:
        n //= p
        v += 1
    if v:
        return v
    d = q.denominator
    while d % p == 0:
        d //= p
        v -= 1
    return v


def _conjugate_stays_in_k(p: int, x, c_depth: int, eps_exp: int) -> bool:
    """Valuation interval arithmetic for x B(C,eps) x^{-1} subset M_2(Z_p)."""
    xm = [[Fraction(v) for v in row] for row in x]
    det = xm[0][0] * xm[1][1] - xm[0][1] * xm[1][0]
    xinv = [[xm[1][1] / det, -xm[0][1] / det], [-xm[1][0] / det, xm[0][0] / det]]
    vx = _mat_val_bounds(p, xm)
    vxi = _mat_val_bounds(p, xinv)
    # entry valuation floors of g in B(C, eps)
    vg = [[0, eps_exp], [eps_exp, 0]]
    for r in range(2):
        for s in range(2):
            worst = min(
                vx[r][a] + vg[a][b] + vxi[b][s] for a in range(2) for b in range(2)
            )
            if worst < 0:
                return False
    return True


def hecke_returns_count(
    order: MaximalOrder,
    emb: SplittingEmbedding,
    x,
    ball: BallParams,
    n: int,
    m: Fraction = Fraction(1),
) -> int:
    """#(M_n cap z(m) x B(C,eps) x^{-1}) via exact enumeration of R(n).

    S is contained in R(n) = {alpha in R : nr(alpha) = n}; membership of
    each candidate is decided through the splitting embedding at the
    stored precision, failing loudly when undecidable.
    """
    p = ball.prime
    if n % p == 0:
        raise ValueError("n must be coprime to p")
    if n * n * 2 >= p ** (2 * ball.eps_exp):
        raise ValueError("need n < sqrt(1/2) eps^{-1}")
    m = Fraction(m)
    if m.numerator % p == 0 or m.denominator % p == 0:
        raise ValueError("m must have numerator and denominator coprime to p")
    M = p**emb.precision
    xm = [[Fraction(v) for v in row] for row in x]
    det = xm[0][0] * xm[1][1] - xm[0][1] * xm[1][0]
    xinv = [[xm[1][1] / det, -xm[0][1] / det], [-xm[1][0] / det, xm[0][0] / det]]

    def to_mod(q: Fraction) -> int:
        if q.denominator % p == 0:
            raise PrecisionError("p-power denominator in conjugation data")
        return q.numerator * pow(q.denominator, -1, M) % M

    xmod = np.array([[to_mod(v) for v in row] for row in xm], dtype=object)
    ximod = np.array([[to_mod(v) for v in row] for row in xinv], dtype=object)
    minv = to_mod(1 / m)

    count = 0
    for vec in norm_enumerate(order, n):
        g = emb.matrix_of_coords(list(vec))
        h = (ximod @ ((minv * g) % M) @ xmod) % M
        if _in_ball(h, p, M, ball):
            count += 1
    bound = 6 * divisor_count(n)
    assert count <= bound, f"Hecke-return bound violated: {count} > {bound}"
    return count


def _in_ball(h, p: int, M: int, ball: BallParams) -> bool:
    e = ball.eps_exp

    def val_of(residue: int, need: int) -> bool:
        residue %= M
        if residue == 0:
            if need <= math.floor(math.log(M, p) + 0.5):
                return True
            raise PrecisionError("ball membership undecidable at this precision")
        v = 0
        while residue % p == 0:
            residue //= p
            v += 1
        return v >= need

    a, b, c, d = int(h[0, 0]), int(h[0, 1]), int(h[1, 0]), int(h[1, 1])
    if a % p == 0 or d % p == 0:
        return False
    if ball.c_depth > 0:
        if not val_of((a - 1) % M, ball.c_depth):
            return False
        if not val_of((d - 1) % M, ball.c_depth):
            return False
    return val_of(b, e) and val_of(c, e)
