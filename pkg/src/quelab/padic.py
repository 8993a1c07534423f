"""Exact finite-precision arithmetic in Q_p, characters, and Gauss sums.

Numbers are stored as p^v * u with the unit residue u known modulo p^M.
Whenever a number was built from an exact rational we keep that rational
around, so chains of exact inputs never lose digits; truncated inputs fail
loudly instead of silently reading digits past their precision.

Character values are unimodular complex numbers tracked as exact rational
angles (value = e^{2 pi i angle}) for as long as possible.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import Iterable, Optional, Union

import numpy as np

__all__ = [
    "PrecisionError",
    "PAdicNumber",
    "Zp",
    "UnitCharacter",
    "MultCharacter",
    "AdditiveCharacter",
    "OpenUnitSubgroup",
    "frac_part",
    "psi_eval",
    "psi_angle",
    "char_eval",
    "conductor_product_bound",
    "gauss_sum",
    "gauss_sum_shell",
    "root_of_unity",
    "unit_reps",
    "primitive_root",
]

TWO_PI = 2.0 * cmath.pi

Rat = Union[int, Fraction]


class PrecisionError(ArithmeticError):
    """An operation would need p-adic digits beyond the stored precision."""


def root_of_unity(angle: Fraction) -> complex:
    """e^{2 pi i angle} for a rational (or float) angle."""
    a = float(angle) % 1.0
    if a == 0.0:
        return 1.0 + 0.0j
    if a == 0.5:
        return -1.0 + 0.0j
    if a == 0.25:
        return 1.0j
    if a == 0.75:
        return -1.0j
    return cmath.exp(1j * TWO_PI * a)


def _val_of_int(n: int, p: int) -> int:
    if n == 0:
        raise ValueError("valuation of 0 is +infinity")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


@dataclass(frozen=True)
class PAdicNumber:
    """Element of Q_p: p^val * unit with unit known mod p^prec.

    ``exact`` carries the defining rational when available; arithmetic on
    exact values stays exact.  The canonical zero has val = 0, unit = 0.
    """

    prime: int
    val: int
    unit: int
    prec: int
    is_zero: bool = False
    exact: Optional[Fraction] = field(default=None, compare=False)

    def __post_init__(self):
        p = self.prime
        if p < 2:
            raise ValueError("prime must be >= 2")
        if self.is_zero:
            object.__setattr__(self, "val", 0)
            object.__setattr__(self, "unit", 0)
        else:
            if self.prec < 1:
                raise ValueError("precision must be >= 1")
            u = self.unit % p**self.prec
            if u % p == 0:
                raise ValueError("unit residue must be coprime to p")
            object.__setattr__(self, "unit", u)

    # -- constructors ----------------------------------------------------

    @staticmethod
    def zero(p: int, prec: int = 1) -> "PAdicNumber":
        return PAdicNumber(p, 0, 0, max(prec, 1), is_zero=True, exact=Fraction(0))

    @staticmethod
    def from_rational(p: int, q: Rat, prec: int = 20) -> "PAdicNumber":
        q = Fraction(q)
        if q == 0:
            return PAdicNumber.zero(p, prec)
        vnum = _val_of_int(q.numerator, p) if q.numerator % p == 0 else 0
        vden = _val_of_int(q.denominator, p) if q.denominator % p == 0 else 0
        v = vnum - vden
        num = q.numerator // p**vnum
        den = q.denominator // p**vden
        u = num * pow(den, -1, p**prec) % p**prec
        return PAdicNumber(p, v, u, prec, exact=q)

    # -- basic queries ----------------------------------------------------

    def valuation(self) -> int:
        if self.is_zero:
            raise ValueError("valuation of 0 is +infinity")
        return self.val

    def abs_val(self) -> float:
        """Normalized absolute value |x| = p^{-v}."""
        if self.is_zero:
            return 0.0
        return float(self.prime) ** (-self.val)

    def unit_mod(self, k: int) -> int:
        """Unit residue mod p^k; fails loudly past stored precision."""
        if self.is_zero:
            raise ZeroDivisionError("zero has no unit part")
        if k > self.prec:
            if self.exact is not None:
                return PAdicNumber.from_rational(self.prime, self.exact, k).unit
            raise PrecisionError(
                f"need unit mod p^{k} but only p^{self.prec} digits stored"
            )
        return self.unit % self.prime**k

    def __bool__(self) -> bool:
        return not self.is_zero

    def __eq__(self, other) -> bool:
        if not isinstance(other, PAdicNumber):
            return NotImplemented
        if self.prime != other.prime:
            return False
        if self.is_zero or other.is_zero:
            return self.is_zero and other.is_zero
        if self.val != other.val:
            return False
        k = min(self.prec, other.prec)
        pk = self.prime**k
        return self.unit % pk == other.unit % pk

    def __hash__(self):
        return hash((self.prime, self.is_zero, self.val))

    def __repr__(self):
        if self.is_zero:
            return f"0 (p={self.prime})"
        return f"{self.prime}^{self.val}*{self.unit} (mod {self.prime}^{self.val + self.prec})"

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other) -> "PAdicNumber":
        if isinstance(other, PAdicNumber):
            if other.prime != self.prime:
                raise ValueError("mixed primes")
            return other
        return PAdicNumber.from_rational(self.prime, other, self.prec)

    def __mul__(self, other) -> "PAdicNumber":
        other = self._coerce(other)
        p = self.prime
        if self.is_zero or other.is_zero:
            return PAdicNumber.zero(p)
        prec = min(self.prec, other.prec)
        ex = None
        if self.exact is not None and other.exact is not None:
            ex = self.exact * other.exact
        return PAdicNumber(
            p, self.val + other.val, self.unit * other.unit % p**prec, prec, exact=ex
        )

    __rmul__ = __mul__

    def inverse(self) -> "PAdicNumber":
        if self.is_zero:
            raise ZeroDivisionError("inverse of 0")
        p = self.prime
        ex = 1 / self.exact if self.exact is not None else None
        return PAdicNumber(
            p, -self.val, pow(self.unit, -1, p**self.prec), self.prec, exact=ex
        )

    def __truediv__(self, other) -> "PAdicNumber":
        return self * self._coerce(other).inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def __neg__(self) -> "PAdicNumber":
        if self.is_zero:
            return self
        p = self.prime
        ex = -self.exact if self.exact is not None else None
        return PAdicNumber(p, self.val, (-self.unit) % p**self.prec, self.prec, exact=ex)

    def __add__(self, other) -> "PAdicNumber":
        other = self._coerce(other)
        p = self.prime
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.exact is not None and other.exact is not None:
            # absolute precision of the inputs still caps the result
            abs_prec = min(self.val + self.prec, other.val + other.prec)
            s = self.exact + other.exact
            if s == 0:
                return PAdicNumber.zero(p)
            res = PAdicNumber.from_rational(p, s, 1)
            prec = abs_prec - res.val
            if prec < 1:
                raise PrecisionError("cancellation exhausted stored precision")
            return PAdicNumber.from_rational(p, s, prec)
        v = min(self.val, other.val)
        abs_prec = min(self.val + self.prec, other.val + other.prec)
        avail = abs_prec - v
        pk = p**avail
        s = (self.unit * p ** (self.val - v) + other.unit * p ** (other.val - v)) % pk
        if s == 0:
            raise PrecisionError("cancellation exhausted stored precision")
        w = _val_of_int(s, p)
        if avail - w < 1:
            raise PrecisionError("cancellation exhausted stored precision")
        return PAdicNumber(p, v + w, s // p**w, avail - w)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)


def Zp(p: int, q: Rat, prec: int = 20) -> PAdicNumber:
    """Shorthand constructor from a rational."""
    return PAdicNumber.from_rational(p, q, prec)


# ---------------------------------------------------------------------------
# fractional part and the unramified additive character
# ---------------------------------------------------------------------------


def frac_part(x: PAdicNumber) -> Fraction:
    """p-adic fractional part: the rational r in [0,1) with x - r in Z_p."""
    if x.is_zero or x.val >= 0:
        return Fraction(0)
    e = -x.val
    pe = x.prime**e
    return Fraction(x.unit_mod(e) % pe, pe)


def psi_angle(x: PAdicNumber) -> Fraction:
    return frac_part(x)


def psi_eval(x: PAdicNumber) -> complex:
    """Canonical unramified additive character psi(x) = e^{2 pi i {x}_p}."""
    return root_of_unity(frac_part(x))


@dataclass(frozen=True)
class AdditiveCharacter:
    """The canonical unramified psi: trivial on Z_p, nontrivial on p^{-1}Z_p."""

    prime: int

    def __call__(self, x: PAdicNumber) -> complex:
        if x.prime != self.prime:
            raise ValueError("prime mismatch")
        return psi_eval(x)

    def angle(self, x: PAdicNumber) -> Fraction:
        return frac_part(x)


# ---------------------------------------------------------------------------
# unit-group structure tables
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def primitive_root(p: int) -> int:
    """Smallest primitive root mod p^2 (hence mod p^c for every c >= 1)."""
    if p == 2:
        raise ValueError("p = 2 has no primitive root for c >= 3")
    m = p * p
    order = p * (p - 1)
    for g in range(2, m):
        if g % p == 0:
            continue
        ok = True
        for q in _prime_divisors(order):
            if pow(g, order // q, m) == 1:
                ok = False
                break
        if ok:
            return g
    raise RuntimeError("no primitive root found")


def _prime_divisors(n: int) -> list[int]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


@lru_cache(maxsize=None)
def unit_reps(p: int, d: int) -> np.ndarray:
    """Sorted units mod p^d (all of Z/p^d for d = 0 -> just [1])."""
    if d <= 0:
        return np.array([1], dtype=np.int64)
    m = p**d
    a = np.arange(m, dtype=np.int64)
    return a[a % p != 0]


@lru_cache(maxsize=None)
def dlog_table(p: int, c: int) -> np.ndarray:
    """Discrete logs base primitive_root(p) for units mod p^c (-1 elsewhere)."""
    if p == 2:
        raise ValueError("use two_adic_logs for p = 2")
    if c < 1:
        raise ValueError("c >= 1 required")
    m = p**c
    g = primitive_root(p) % m
    tbl = np.full(m, -1, dtype=np.int64)
    x = 1
    for k in range(p ** (c - 1) * (p - 1)):
        tbl[x] = k
        x = x * g % m
    return tbl


@lru_cache(maxsize=None)
def two_adic_logs(c: int) -> tuple[np.ndarray, np.ndarray]:
    """(s, t) with u = (-1)^s 5^t mod 2^c for odd u; c >= 3."""
    if c < 3:
        raise ValueError("c >= 3 required")
    m = 2**c
    s_tbl = np.full(m, -1, dtype=np.int64)
    t_tbl = np.full(m, -1, dtype=np.int64)
    x = 1
    for t in range(2 ** (c - 2)):
        s_tbl[x] = 0
        t_tbl[x] = t
        s_tbl[(-x) % m] = 1
        t_tbl[(-x) % m] = t
        x = x * 5 % m
    return s_tbl, t_tbl


@lru_cache(maxsize=None)
def inverse_table(p: int, d: int) -> np.ndarray:
    """Modular inverses mod p^d indexed by residue (0 at non-units)."""
    m = p**d
    tbl = np.zeros(m, dtype=np.int64)
    units = unit_reps(p, d)
    # batched Newton lift from inverses mod p
    inv_p = np.zeros(p, dtype=np.int64)
    for u in range(1, p):
        inv_p[u] = pow(u, -1, p)
    x = inv_p[units % p]
    mod = p
    while mod < m:
        mod = min(mod * mod, m)
        x = x * (2 - units % mod * x % mod) % mod
    tbl[units] = x % m
    return tbl


# ---------------------------------------------------------------------------
# characters of Z_p^* and Q_p^*
# ---------------------------------------------------------------------------


def _angle_conductor_odd(p: int, angle: Fraction) -> int:
    c = 0
    while True:
        phi = 1 if c == 0 else p ** (c - 1) * (p - 1)
        if (angle * phi).denominator == 1:
            return c
        c += 1


def _angle_conductor_two(angle_minus: Fraction, angle_five: Fraction) -> int:
    c_minus = 0 if angle_minus.denominator == 1 else 2
    if angle_five.denominator == 1:
        c_five = 0
    else:
        c = 2
        while (angle_five * 2 ** (c - 2)).denominator != 1:
            c += 1
        c_five = c
    return max(c_minus, c_five)


@dataclass(frozen=True)
class UnitCharacter:
    """Character of Z_p^* of exact conductor ``cond``.

    p odd: determined by the angle on the fixed generator primitive_root(p).
    p = 2: pair of angles on the generators -1 and 5 of (Z/2^c)^*.
    """

    prime: int
    cond: int
    angle: Fraction = Fraction(0)        # on primitive_root(p), resp. on 5
    angle_minus: Fraction = Fraction(0)  # p = 2 only, on -1

    def __post_init__(self):
        p, c = self.prime, self.cond
        object.__setattr__(self, "angle", Fraction(self.angle) % 1)
        object.__setattr__(self, "angle_minus", Fraction(self.angle_minus) % 1)
        if p == 2:
            if self.angle_minus not in (Fraction(0), Fraction(1, 2)):
                raise ValueError("angle on -1 must be 0 or 1/2")
            actual = _angle_conductor_two(self.angle_minus, self.angle)
        else:
            if self.angle_minus != 0:
                raise ValueError("angle_minus only meaningful for p = 2")
            actual = _angle_conductor_odd(p, self.angle)
        if actual != c:
            raise ValueError(f"character data has conductor {actual}, declared {c}")
        if c >= 1:
            phi = (p - 1) * p ** (c - 1) if p != 2 else 2 ** max(c - 1, 0)
            if (self.angle * phi).denominator != 1:
                raise ValueError("angle order does not divide the unit group order")

    @staticmethod
    def trivial(p: int) -> "UnitCharacter":
        return UnitCharacter(p, 0)

    @staticmethod
    def from_index(p: int, c: int, index: int, minus: int = 0) -> "UnitCharacter":
        """Character sending the generator to e^{2 pi i index / ord}."""
        if c == 0:
            return UnitCharacter.trivial(p)
        if p == 2:
            ordr = 2 ** (c - 2) if c >= 3 else 1
            return UnitCharacter(
                2, c, Fraction(index, ordr) if ordr > 1 else Fraction(0),
                Fraction(minus % 2, 2) * 1,
            )
        ordr = (p - 1) * p ** (c - 1)
        return UnitCharacter(p, c, Fraction(index, ordr))

    def is_trivial(self) -> bool:
        return self.cond == 0

    def angle_of(self, u: int) -> Fraction:
        """Exact angle of the value at the unit u (integer coprime to p)."""
        p, c = self.prime, self.cond
        if c == 0:
            return Fraction(0)
        m = p**c
        u %= m
        if u % p == 0:
            raise ValueError("argument must be a unit")
        if p == 2:
            if c == 2:
                s = 0 if u % 4 == 1 else 1
                return (self.angle_minus * s) % 1
            s_tbl, t_tbl = two_adic_logs(c)
            return (self.angle_minus * int(s_tbl[u]) + self.angle * int(t_tbl[u])) % 1
        k = int(dlog_table(p, c)[u])
        return (self.angle * k) % 1

    def __call__(self, u) -> complex:
        if isinstance(u, PAdicNumber):
            if u.is_zero:
                raise ZeroDivisionError("unit character at 0")
            u = u.unit_mod(max(self.cond, 1))
        return root_of_unity(self.angle_of(int(u)))

    def values_on(self, units: np.ndarray, modulus_exp: int) -> np.ndarray:
        """Vectorized values on an array of units given mod p^modulus_exp."""
        p, c = self.prime, self.cond
        if c == 0:
            return np.ones(len(units), dtype=np.complex128)
        if modulus_exp < c:
            raise PrecisionError("units known to insufficient depth for character")
        m = p**c
        u = units % m
        if p == 2:
            if c == 2:
                s = (u % 4 != 1).astype(np.int64)
                return np.where(s == 1, root_of_unity(self.angle_minus), 1.0 + 0j)
            s_tbl, t_tbl = two_adic_logs(c)
            ang = (
                float(self.angle_minus) * s_tbl[u] + float(self.angle) * t_tbl[u]
            )
        else:
            ang = float(self.angle) * dlog_table(p, c)[u]
        return np.exp(1j * TWO_PI * np.mod(ang, 1.0))

    def __mul__(self, other: "UnitCharacter") -> "UnitCharacter":
        if self.prime != other.prime:
            raise ValueError("mixed primes")
        p = self.prime
        a = (self.angle + other.angle) % 1
        am = (self.angle_minus + other.angle_minus) % 1
        if p == 2:
            c = _angle_conductor_two(am, a)
        else:
            c = _angle_conductor_odd(p, a)
        return UnitCharacter(p, c, a, am)

    def inverse(self) -> "UnitCharacter":
        return UnitCharacter(
            self.prime, self.cond, (-self.angle) % 1, (-self.angle_minus) % 1
        )

    def conjugate(self) -> "UnitCharacter":
        return self.inverse()


@dataclass(frozen=True)
class MultCharacter:
    """Character of Q_p^*: unit part times a unimodular value at p."""

    unit_part: UnitCharacter
    at_p: complex = 1.0 + 0.0j
    at_p_angle: Optional[Fraction] = field(default=None, compare=False)

    def __post_init__(self):
        if self.at_p_angle is not None:
            object.__setattr__(self, "at_p", root_of_unity(self.at_p_angle))
        if abs(abs(self.at_p) - 1.0) > 1e-12:
            raise ValueError("value at p must be unimodular")

    @staticmethod
    def from_angles(
        p: int, cond: int, angle: Rat, at_p_angle: Rat = 0, angle_minus: Rat = 0
    ) -> "MultCharacter":
        return MultCharacter(
            UnitCharacter(p, cond, Fraction(angle), Fraction(angle_minus)),
            at_p_angle=Fraction(at_p_angle),
        )

    @staticmethod
    def unramified(p: int, at_p_angle: Rat = 0) -> "MultCharacter":
        return MultCharacter(UnitCharacter.trivial(p), at_p_angle=Fraction(at_p_angle))

    @property
    def prime(self) -> int:
        return self.unit_part.prime

    @property
    def cond(self) -> int:
        return self.unit_part.cond

    def is_unitary(self) -> bool:
        return abs(abs(self.at_p) - 1.0) <= 1e-12

    def __call__(self, x) -> complex:
        if isinstance(x, PAdicNumber):
            if x.is_zero:
                raise ZeroDivisionError("character at 0")
            v = x.val
            u = x.unit_mod(max(self.cond, 1))
        else:
            x = Fraction(x)
            pn = PAdicNumber.from_rational(self.prime, x, max(self.cond, 1))
            return self(pn)
        return self.at_p**v * self.unit_part(u)

    def value_shell_unit(self, v: int, u: int) -> complex:
        """Value at p^v * u for an integer unit u."""
        return self.at_p**v * self.unit_part(u)

    def __mul__(self, other: "MultCharacter") -> "MultCharacter":
        ang = None
        if self.at_p_angle is not None and other.at_p_angle is not None:
            ang = (self.at_p_angle + other.at_p_angle) % 1
        return MultCharacter(
            self.unit_part * other.unit_part,
            at_p=self.at_p * other.at_p,
            at_p_angle=ang,
        )

    def inverse(self) -> "MultCharacter":
        ang = (-self.at_p_angle) % 1 if self.at_p_angle is not None else None
        return MultCharacter(
            self.unit_part.inverse(), at_p=1.0 / self.at_p, at_p_angle=ang
        )

    def conjugate(self) -> "MultCharacter":
        ang = (-self.at_p_angle) % 1 if self.at_p_angle is not None else None
        return MultCharacter(
            self.unit_part.conjugate(), at_p=self.at_p.conjugate(), at_p_angle=ang
        )

    def ratio(self, other: "MultCharacter") -> "MultCharacter":
        return self * other.inverse()

    def descriptor(self) -> dict:
        """JSON-ready description {p, c, angles: [num, den]}."""
        d = {
            "p": self.prime,
            "c": self.cond,
            "angle": [self.unit_part.angle.numerator, self.unit_part.angle.denominator],
        }
        if self.prime == 2:
            d["angle_minus"] = [
                self.unit_part.angle_minus.numerator,
                self.unit_part.angle_minus.denominator,
            ]
        if self.at_p_angle is not None:
            d["at_p_angle"] = [self.at_p_angle.numerator, self.at_p_angle.denominator]
        else:
            d["at_p"] = [self.at_p.real, self.at_p.imag]
        return d


def char_eval(chi: MultCharacter, x: PAdicNumber) -> complex:
    """chi(p^v u) = chi(p)^v * omega(u); fails loudly if u is too shallow."""
    return chi(x)


def conductor_product_bound(chi1: MultCharacter, chi2: MultCharacter) -> int:
    """Conductor of chi1*chi2, asserting subadditivity c <= c1 + c2."""
    c = (chi1 * chi2).cond
    assert c <= chi1.cond + chi2.cond, "conductor subadditivity violated"
    return c


# ---------------------------------------------------------------------------
# open unit subgroups and Gauss sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OpenUnitSubgroup:
    """U_1 = 1 + p^depth Z_p for depth >= 1, or all of Z_p^* for depth 0."""

    prime: int
    depth: int

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be >= 0")

    def index_in_units(self) -> int:
        p, m = self.prime, self.depth
        return 1 if m == 0 else (p - 1) * p ** (m - 1)

    def reps_mod(self, d: int) -> np.ndarray:
        """Representatives of U_1 / (1 + p^d Z_p) as integers mod p^d."""
        p, m = self.prime, self.depth
        if d < max(m, 1):
            d = max(m, 1)
        if m == 0:
            return unit_reps(p, d)
        step = p**m
        ks = np.arange(p ** (d - m), dtype=np.int64)
        return 1 + step * ks

    def contains_rep(self, u: int, d: int) -> bool:
        if self.depth == 0:
            return u % self.prime != 0
        return u % self.prime**min(self.depth, d) == 1


def gauss_sum(
    t: PAdicNumber, omega: UnitCharacter, u1: OpenUnitSubgroup
) -> complex:
    """H(t, omega, U_1) = average of omega(u t) psi(u t) over u in U_1.

    The integrand is constant on cosets of 1 + p^d Z_p at
    d = max(c(omega), -v(t), depth(U_1)) + 1, so the average over
    representatives at that depth is exact.
    """
    if t.is_zero:
        raise ZeroDivisionError("t must be nonzero")
    p = t.prime
    if p != omega.prime or p != u1.prime:
        raise ValueError("prime mismatch")
    c = omega.cond
    e = -t.val
    need = max(c, e) + 1
    if t.exact is None and t.prec < max(c, e, 1):
        raise PrecisionError("t stored to insufficient precision for this Gauss sum")
    d = max(c, e, u1.depth) + 1
    reps = u1.reps_mod(d)
    ut_unit = reps * np.int64(t.unit_mod(d) % p**d) % p**d
    vals = omega.values_on(ut_unit, d)
    if e > 0:
        pe = p**e
        frac = (ut_unit % pe).astype(np.float64) / pe
        vals = vals * np.exp(1j * TWO_PI * frac)
    return complex(vals.mean())


@lru_cache(maxsize=None)
def _gauss_shell_cached(
    omega: UnitCharacter, depth_u1: int, j: int, sign: int
) -> complex:
    p = omega.prime
    u1 = OpenUnitSubgroup(p, depth_u1)
    t = PAdicNumber.from_rational(p, Fraction(sign * p**j) if j >= 0 else Fraction(sign, p**-j), max(-j, 1) + 1)
    return gauss_sum(t, omega, u1)


def gauss_sum_shell(
    omega: UnitCharacter, u1: OpenUnitSubgroup, j: int, sign: int = 1
) -> complex:
    """H(sign * p^j, omega, U_1), cached."""
    return _gauss_shell_cached(omega, u1.depth, j, sign)
