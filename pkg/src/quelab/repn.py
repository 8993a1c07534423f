"""Principal-series vectors of GL_2(Q_p) and their Whittaker realizations.

Vectors are carried in the induced model.  Compactly supported line-model
data is stored as a list of disjoint ball/shell pieces; the second
microlocal lift (whose line-model function is not compactly supported)
is evaluated through its closed induced-model formula instead.  Right
translates are tracked exactly as a trailing group element, so the full
GL_2-action used by the invariance tests never needs new function types.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .padic import (
    MultCharacter,
    OpenUnitSubgroup,
    PAdicNumber,
    PrecisionError,
    UnitCharacter,
    Zp,
    psi_eval,
    root_of_unity,
    unit_reps,
)

__all__ = [
    "GL2Element",
    "BallFunction",
    "ConstBall",
    "CharShell",
    "PrincipalSeries",
    "InducedVector",
    "SphericalWhittaker",
    "SphericalTranslates",
    "KirillovCompact",
    "WhittakerLift",
    "SingularEvaluation",
    "NonStabilizingIntegral",
    "build_microlocal",
    "build_newvector",
    "newvector_dimension",
    "induced_eval",
    "whittaker_intertwine",
    "spherical_whittaker",
    "full_whittaker_at",
    "partition_n1",
    "indicator_ball",
    "shell_char",
    "n_upper",
    "n_lower",
    "diag",
    "a_elt",
    "z_elt",
    "w_elt",
    "chart_point",
]

Rat = Union[int, Fraction]


class SingularEvaluation(ArithmeticError):
    """No applicable induced-model formula at this group element."""


class NonStabilizingIntegral(ArithmeticError):
    """A shell expansion failed to stabilize within its analytic cutoff."""


def partition_n1(n: int) -> tuple[int, int]:
    """Fixed partition N = N1 + N2 with N1 = floor(N/2)."""
    return n // 2, n - n // 2


# ---------------------------------------------------------------------------
# group elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GL2Element:
    """2x2 invertible matrix over Q_p with cached determinant."""

    a: PAdicNumber
    b: PAdicNumber
    c: PAdicNumber
    d: PAdicNumber
    det: PAdicNumber = field(init=False, compare=False)

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if det.is_zero:
            raise ValueError("matrix must be invertible")
        object.__setattr__(self, "det", det)

    @property
    def prime(self) -> int:
        return self.a.prime

    @staticmethod
    def from_rationals(p: int, rows, prec: int = 24) -> "GL2Element":
        (a, b), (c, d) = rows
        return GL2Element(Zp(p, a, prec), Zp(p, b, prec), Zp(p, c, prec), Zp(p, d, prec))

    def __matmul__(self, other: "GL2Element") -> "GL2Element":
        return GL2Element(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "GL2Element":
        idet = self.det.inverse()
        return GL2Element(self.d * idet, -self.b * idet, -self.c * idet, self.a * idet)


def n_upper(p: int, x: Rat, prec: int = 24) -> GL2Element:
    return GL2Element.from_rationals(p, [[1, x], [0, 1]], prec)


def n_lower(p: int, x: Rat, prec: int = 24) -> GL2Element:
    return GL2Element.from_rationals(p, [[1, 0], [x, 1]], prec)


def diag(p: int, y1: Rat, y2: Rat, prec: int = 24) -> GL2Element:
    return GL2Element.from_rationals(p, [[y1, 0], [0, y2]], prec)


def a_elt(p: int, y: Rat, prec: int = 24) -> GL2Element:
    return diag(p, y, 1, prec)


def z_elt(p: int, y: Rat, prec: int = 24) -> GL2Element:
    return diag(p, y, y, prec)


def w_elt(p: int, prec: int = 24) -> GL2Element:
    return GL2Element.from_rationals(p, [[0, -1], [1, 0]], prec)


def chart_point(p: int, y: Rat, x: Rat, prec: int = 24) -> GL2Element:
    """a(y) n'(x): the coordinates saturating the Haar formula on ZU\\G."""
    return GL2Element.from_rationals(p, [[y, 0], [x, 1]], prec)


# ---------------------------------------------------------------------------
# line-model functions: finite unions of disjoint balls / character shells
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstBall:
    """Constant value on the ball center + p^radius_exp Z_p."""

    center: Fraction
    radius_exp: int
    value: complex

    def contains(self, p: int, x: Fraction) -> bool:
        d = x - self.center
        if d == 0:
            return True
        return _rat_val(p, d) >= self.radius_exp


@dataclass(frozen=True)
class CharShell:
    """x -> scale * chi(x) on the shell {v(x) = shell}, 0 elsewhere."""

    shell: int
    chi: MultCharacter
    scale: complex


Piece = Union[ConstBall, CharShell]


def _rat_val(p: int, q: Fraction) -> int:
    if q == 0:
        raise ValueError("valuation of 0")
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


@dataclass(frozen=True)
class BallFunction:
    """Compactly supported locally constant function on Q_p."""

    prime: int
    pieces: tuple[Piece, ...]

    def __post_init__(self):
        self._check_disjoint()

    def _check_disjoint(self):
        p = self.prime
        for i, pi in enumerate(self.pieces):
            for pj in self.pieces[i + 1 :]:
                if not _pieces_disjoint(p, pi, pj):
                    raise ValueError("ball pieces overlap")

    # -- evaluation --------------------------------------------------------

    def value(self, x: Union[Fraction, int, PAdicNumber]) -> complex:
        p = self.prime
        if isinstance(x, PAdicNumber):
            return self._value_padic(x)
        x = Fraction(x)
        for piece in self.pieces:
            if isinstance(piece, ConstBall):
                if piece.contains(p, x):
                    return piece.value
            else:
                if x != 0 and _rat_val(p, x) == piece.shell:
                    return piece.scale * piece.chi(Zp(p, x, piece.chi.cond + 1))
        return 0.0 + 0.0j

    def _value_padic(self, x: PAdicNumber) -> complex:
        p = self.prime
        for piece in self.pieces:
            if isinstance(piece, ConstBall):
                if piece.center == 0:
                    if x.is_zero or x.val >= piece.radius_exp:
                        return piece.value
                else:
                    if x.is_zero:
                        if _rat_val(p, piece.center) >= piece.radius_exp:
                            return piece.value
                        continue
                    d = x - Zp(p, piece.center, x.prec)
                    if d.is_zero or d.val >= piece.radius_exp:
                        return piece.value
            else:
                if not x.is_zero and x.val == piece.shell:
                    return piece.scale * piece.chi(x)
        return 0.0 + 0.0j

    def __call__(self, x) -> complex:
        return self.value(x)

    # -- geometry ------------------------------------------------------------

    def constancy_depth(self) -> int:
        """Absolute depth D: f is constant on every coset x + p^D Z_p."""
        depth = -(10**6)
        for piece in self.pieces:
            if isinstance(piece, ConstBall):
                depth = max(depth, piece.radius_exp)
            else:
                depth = max(depth, piece.shell + max(piece.chi.cond, 1))
        return depth

    def support_min_val(self) -> int:
        """Least valuation occurring in the support."""
        vals = []
        for piece in self.pieces:
            if isinstance(piece, ConstBall):
                if piece.center == 0:
                    vals.append(piece.radius_exp)
                else:
                    vals.append(min(_rat_val(self.prime, piece.center), piece.radius_exp))
            else:
                vals.append(piece.shell)
        return min(vals)

    def l2_norm_sq(self) -> float:
        p = self.prime
        total = 0.0
        for piece in self.pieces:
            if isinstance(piece, ConstBall):
                total += float(p) ** (-piece.radius_exp) * abs(piece.value) ** 2
            else:
                vol = float(p) ** (-piece.shell) * (1 - 1 / p)
                total += vol * abs(piece.scale) ** 2
        return total

    # -- algebra ---------------------------------------------------------------

    def scaled(self, s: complex) -> "BallFunction":
        out = []
        for piece in self.pieces:
            if isinstance(piece, ConstBall):
                out.append(replace(piece, value=piece.value * s))
            else:
                out.append(replace(piece, scale=piece.scale * s))
        return BallFunction(self.prime, tuple(out))

    def arg_scaled_by_p_power(self, j: int) -> "BallFunction":
        """Return x -> f(x * p^j)."""
        p = self.prime
        out = []
        for piece in self.pieces:
            if isinstance(piece, ConstBall):
                out.append(
                    ConstBall(piece.center / Fraction(p) ** j, piece.radius_exp - j, piece.value)
                )
            else:
                fac = piece.chi.at_p**j
                out.append(CharShell(piece.shell - j, piece.chi, piece.scale * fac))
        return BallFunction(p, tuple(out))

    def arg_scaled_by_unit(self, u: Fraction) -> "BallFunction":
        """Return x -> f(x * u) for a unit u."""
        p = self.prime
        if _rat_val(p, Fraction(u)) != 0:
            raise ValueError("scaling factor must be a unit")
        out = []
        for piece in self.pieces:
            if isinstance(piece, ConstBall):
                out.append(ConstBall(piece.center / u, piece.radius_exp, piece.value))
            else:
                fac = piece.chi(Zp(p, Fraction(u), piece.chi.cond + 1))
                out.append(CharShell(piece.shell, piece.chi, piece.scale * fac))
        return BallFunction(p, tuple(out))

    def arg_shifted(self, s: Fraction) -> "BallFunction":
        """Return x -> f(x + s); character shells require v(s) past their
        constancy depth (then the piece is unchanged)."""
        p = self.prime
        s = Fraction(s)
        out = []
        for piece in self.pieces:
            if isinstance(piece, ConstBall):
                c = piece.center - s
                if c != 0 and _rat_val(p, c) >= piece.radius_exp:
                    c = Fraction(0)
                out.append(ConstBall(c, piece.radius_exp, piece.value))
            else:
                depth = piece.shell + max(piece.chi.cond, 1)
                if s != 0 and _rat_val(p, s) < depth:
                    raise NotImplementedError(
                        "shifting a character shell below its constancy depth"
                    )
                out.append(piece)
        return BallFunction(p, tuple(out))


def _pieces_disjoint(p: int, x: Piece, y: Piece) -> bool:
    if isinstance(x, CharShell) and isinstance(y, CharShell):
        return x.shell != y.shell
    if isinstance(x, ConstBall) and isinstance(y, ConstBall):
        d = x.center - y.center
        if d == 0:
            return False
        return _rat_val(p, d) < min(x.radius_exp, y.radius_exp)
    ball, shell = (x, y) if isinstance(x, ConstBall) else (y, x)
    if ball.center == 0:
        return ball.radius_exp > shell.shell
    cv = _rat_val(p, ball.center)
    if cv < ball.radius_exp:
        return cv != shell.shell
    return ball.radius_exp > shell.shell


def indicator_ball(p: int, r: int) -> BallFunction:
    return BallFunction(p, (ConstBall(Fraction(0), r, 1.0 + 0j),))


def shell_char(p: int, shell: int, chi: MultCharacter, scale: complex = 1.0) -> BallFunction:
    return BallFunction(p, (CharShell(shell, chi, scale),))


# ---------------------------------------------------------------------------
# principal series and induced-model vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrincipalSeries:
    """Unitary principal series attached to the character pair (chi1, chi2)."""

    chi1: MultCharacter
    chi2: MultCharacter

    def __post_init__(self):
        if self.chi1.prime != self.chi2.prime:
            raise ValueError("mixed primes")
        if not (self.chi1.is_unitary() and self.chi2.is_unitary()):
            raise ValueError("inducing characters must be unitary")
        if self.ratio_cond == 0:
            raise ValueError("c(chi1/chi2) = 0: reducibility guard rejects this pair")

    @property
    def prime(self) -> int:
        return self.chi1.prime

    @property
    def ratio_cond(self) -> int:
        return self.chi1.ratio(self.chi2).cond

    @property
    def log_conductor(self) -> int:
        return self.chi1.cond + self.chi2.cond

    @property
    def central(self) -> MultCharacter:
        return self.chi1 * self.chi2

    @property
    def partition(self) -> tuple[int, int]:
        return partition_n1(self.ratio_cond)


@dataclass(frozen=True)
class InducedVector:
    """Vector in the induced model, optionally right-translated.

    kind "line": v(g) = f(c/d) |det/d^2|^{1/2} chi1(det/d) chi2(d).
    kind "v2":   v(g) = 1_{p^{n1}}(d/c) |det/c^2|^{1/2} chi1(det/c) chi2(c),
    the closed form of the second microlocal lift, whose line-model
    function has non-compact support.
    """

    rep: PrincipalSeries
    kind: str
    f: Optional[BallFunction] = None
    n1: int = 0
    rho: Optional[GL2Element] = None
    scalar: complex = 1.0 + 0.0j
    tag: str = "custom"

    def __post_init__(self):
        if self.kind not in ("line", "v2"):
            raise ValueError("kind must be 'line' or 'v2'")
        if self.kind == "line" and self.f is None:
            raise ValueError("line kind needs a ball function")

    # -- evaluation ----------------------------------------------------------

    def value(self, g: GL2Element) -> complex:
        if self.rho is not None:
            g = g @ self.rho
        return self.scalar * self._base_value(g)

    def _base_value(self, g: GL2Element) -> complex:
        p = self.rep.prime
        chi1, chi2 = self.rep.chi1, self.rep.chi2
        if self.kind == "line":
            if g.d.is_zero:
                return 0.0 + 0.0j  # compact support: value at c/d = infinity
            fv = self.f.value(g.c / g.d)
            if fv == 0:
                return 0.0 + 0.0j
            y = g.det / (g.d * g.d)
            return fv * float(p) ** (-y.val / 2) * chi1(g.det / g.d) * chi2(g.d)
        # v2 closed form
        if g.c.is_zero:
            return 0.0 + 0.0j  # d/c = infinity lies outside p^{n1}
        ratio = g.d / g.c
        if not (ratio.is_zero or ratio.val >= self.n1):
            return 0.0 + 0.0j
        y = g.det / (g.c * g.c)
        return float(p) ** (-y.val / 2) * chi1(g.det / g.c) * chi2(g.c)

    def __call__(self, g: GL2Element) -> complex:
        return self.value(g)

    # -- group action ----------------------------------------------------------

    def translated(self, g0: GL2Element) -> "InducedVector":
        """pi(g0) applied to this vector (exact, via trailing translation)."""
        rho = g0 if self.rho is None else g0 @ self.rho
        return replace(self, rho=rho)

    def translated_a_power(self, j: int) -> "InducedVector":
        """pi(a(p^j)) folded into the line-model data when possible."""
        p = self.rep.prime
        if self.kind != "line" or self.rho is not None:
            return self.translated(a_elt(p, Fraction(p) ** j))
        fac = float(p) ** (-j / 2) * self.rep.chi1.at_p**j
        return replace(self, f=self.f.arg_scaled_by_p_power(j), scalar=self.scalar * fac)

    def fold_diag(self, u1: Fraction, u2: Fraction) -> "InducedVector":
        """pi(diag(u1, u2)) for units u1, u2, folded exactly into f."""
        p = self.rep.prime
        if self.kind != "line" or self.rho is not None:
            return self.translated(diag(p, u1, u2))
        prec = self.rep.log_conductor + 2
        fac = self.rep.chi1(Zp(p, Fraction(u1), prec)) * self.rep.chi2(
            Zp(p, Fraction(u2), prec)
        )
        f = self.f.arg_scaled_by_unit(Fraction(u1) / Fraction(u2))
        return replace(self, f=f, scalar=self.scalar * fac)

    def fold_nprime(self, s: Fraction) -> "InducedVector":
        """pi(n'(s)) folded exactly into f (ball shifts)."""
        if self.kind != "line" or self.rho is not None:
            return self.translated(n_lower(self.rep.prime, s))
        return replace(self, f=self.f.arg_shifted(Fraction(s)))

    def fold_z(self, c: Fraction) -> "InducedVector":
        """pi(z(c)): scalar action by the central character."""
        p = self.rep.prime
        prec = self.rep.log_conductor + 2
        fac = self.rep.central(Zp(p, Fraction(c), prec))
        return replace(self, scalar=self.scalar * fac)

    # -- norms ------------------------------------------------------------------

    def norm_sq(self) -> float:
        p = self.rep.prime
        if self.kind == "line":
            base = self.f.l2_norm_sq()
        else:
            base = float(p) ** (-self.n1)  # integral of |f_2|^2 in closed form
        return abs(self.scalar) ** 2 * base

    def normalized(self) -> "InducedVector":
        """Unit norm with the leading piece's coefficient positive real."""
        ns = self.norm_sq()
        if ns == 0:
            raise ValueError("cannot normalize the zero vector")
        s = 1.0 / math.sqrt(ns)
        lead = self.scalar
        if self.kind == "line" and self.f.pieces:
            piece = self.f.pieces[0]
            lead = self.scalar * (
                piece.value if isinstance(piece, ConstBall) else piece.scale
            )
        phase = lead / abs(lead) if lead != 0 else 1.0
        return replace(self, scalar=self.scalar * s / phase)


def induced_eval(v: InducedVector, g: GL2Element) -> complex:
    return v.value(g)


# ---------------------------------------------------------------------------
# microlocal lifts and newvectors
# ---------------------------------------------------------------------------


def build_microlocal(rep: PrincipalSeries, which: int) -> InducedVector:
    """The two microlocal-lift lines, oriented (w1,w2) resp. (w2,w1)."""
    n = rep.ratio_cond
    if n < 1:
        raise ValueError("microlocal lifts need c(chi1/chi2) >= 1")
    n1, n2 = partition_n1(n)
    if which == 1:
        return InducedVector(
            rep, "line", f=indicator_ball(rep.prime, n2), tag="microlocal-1"
        )
    if which == 2:
        return InducedVector(rep, "v2", n1=n1, tag="microlocal-2")
    raise ValueError("which must be 1 or 2")


def build_newvector(rep: PrincipalSeries, m: int, mp: int) -> InducedVector:
    """Unit newvector of support m..m' (requires m' - m = c(pi)).

    With chi1 unramified the line-model function is the indicator of a
    fractional ideal; with chi1 ramified it is a character pattern on a
    single shell.  Other supports come from the exact a(p)-translation,
    which maps support m..m' to m-1..m'-1.
    """
    c_pi = rep.log_conductor
    if mp - m != c_pi:
        raise ValueError(f"support length {mp - m} != c(pi) = {c_pi}")
    if rep.chi1.cond == 0 and rep.chi2.cond == 0:
        raise ValueError("at least one inducing character must be ramified")
    p = rep.prime
    if rep.chi1.cond == 0:
        f = indicator_ball(p, c_pi + m)
    else:
        chi = MultCharacter(rep.chi1.unit_part.inverse(), at_p_angle=Fraction(0))
        f = shell_char(p, rep.chi2.cond + m, chi)
    v = InducedVector(rep, "line", f=f, tag=f"newvector[{m}..{mp}]")
    return v.normalized()


def newvector_dimension(c_pi: int, m: int, mp: int) -> int:
    """Dimension of the space of vectors supported on m..m'."""
    if m > mp:
        raise ValueError("need m <= m'")
    return max(0, 1 + (mp - m) - c_pi)


# ---------------------------------------------------------------------------
# Whittaker evaluators
# ---------------------------------------------------------------------------


class SphericalWhittaker:
    """Spherical Whittaker function for trivial central character.

    Normalized by W(1) = 1; W(a(p^n)) = p^{-n/2} sum_{i<=n} alpha^i beta^{n-i}
    for n >= 0.  Requires alpha*beta = 1 and |alpha| = 1 (tempered).
    """

    def __init__(self, p: int, alpha: complex, beta: Optional[complex] = None):
        if beta is None:
            beta = 1.0 / alpha
        if abs(alpha * beta - 1.0) > 1e-9:
            raise ValueError("trivial central character needs alpha*beta = 1")
        if abs(abs(alpha) - 1.0) > 1e-9 or abs(abs(beta) - 1.0) > 1e-9:
            raise ValueError("tempered Satake parameters must be unimodular")
        self.p = p
        self.alpha = complex(alpha)
        self.beta = complex(beta)

    def hecke_eigenvalue(self) -> complex:
        return self.alpha + self.beta

    def kirillov(self, n: int) -> complex:
        """W(a(p^n)): homogeneous symmetric sum, regular at alpha = beta."""
        if n < 0:
            return 0.0 + 0.0j
        h = sum(self.alpha**i * self.beta ** (n - i) for i in range(n + 1))
        return float(self.p) ** (-n / 2) * h

    def kirillov_at(self, y: PAdicNumber) -> complex:
        if y.is_zero:
            raise ZeroDivisionError("Kirillov model evaluated at 0")
        return self.kirillov(y.val)

    def value(self, g: GL2Element) -> complex:
        """W at an arbitrary group element via the Iwasawa decomposition."""
        psi_arg, shell = _iwasawa_whittaker_data(g)
        return psi_eval(psi_arg) * self.kirillov(shell) if psi_arg is not None else self.kirillov(shell)

    def integral_kirillov(self, tail: int = 400) -> complex:
        """int_{k^*} W(y) d^x y (each shell has multiplicative volume 1)."""
        return sum(self.kirillov(n) for n in range(tail + 1))


def _iwasawa_whittaker_data(g: GL2Element):
    """(psi-argument, Kirillov shell) for a spherical PGL_2 Whittaker value."""
    if g.d.is_zero or (not g.c.is_zero and g.c.val < g.d.val):
        # g = (det/c, a; 0, c) w n(d/c) with w n(d/c) in K
        shell = g.det.val - 2 * g.c.val
        arg = g.a / g.c
    else:
        # g n'(-c/d) upper triangular; n'(c/d) in K
        shell = g.det.val - 2 * g.d.val
        arg = g.b / g.d if not g.b.is_zero else None
    if arg is not None and (arg.is_zero or arg.val >= 0):
        arg = None
    return arg, shell


class KirillovCompact:
    """sigma-vector with unit-invariant compact Kirillov data.

    coeffs[j] is the value on the shell v(y) = j; off-shell evaluation
    expands each shell indicator into three a(p^k)-translates of the
    spherical vector, so the function is defined on all of GL_2.
    """

    def __init__(self, sigma: SphericalWhittaker, coeffs: dict[int, complex]):
        self.sigma = sigma
        self.coeffs = {j: complex(c) for j, c in coeffs.items() if c != 0}

    @property
    def p(self) -> int:
        return self.sigma.p

    def kirillov(self, n: int) -> complex:
        return self.coeffs.get(n, 0.0 + 0.0j)

    def kirillov_at(self, y: PAdicNumber) -> complex:
        return self.kirillov(y.val)

    def translate_terms(self) -> list[tuple[int, complex]]:
        """(k, weight) pairs with W = sum weight * [g -> W_sph(g a(p^k))]."""
        p, lam = self.p, self.sigma.hecke_eigenvalue()
        acc: dict[int, complex] = {}
        for j, cj in self.coeffs.items():
            for k, w in (
                (-j - 2, cj / p),
                (-j - 1, -cj * lam / math.sqrt(p)),
                (-j, cj),
            ):
                acc[k] = acc.get(k, 0.0 + 0.0j) + w
        return sorted(acc.items())

    def value(self, g: GL2Element) -> complex:
        p = self.p
        total = 0.0 + 0.0j
        for k, wgt in self.translate_terms():
            total += wgt * self.sigma.value(g @ a_elt(p, Fraction(p) ** k))
        return total

    def integral_kirillov(self) -> complex:
        return sum(self.coeffs.values())

    def norm_sq(self) -> float:
        return sum(abs(c) ** 2 for c in self.coeffs.values())


class SphericalTranslates:
    """Finite combination sum_k w_k [g -> W_sph(g a(p^k))] in spherical sigma."""

    def __init__(self, sigma: SphericalWhittaker, terms):
        self.sigma = sigma
        self.terms = sorted((int(k), complex(w)) for k, w in terms if w != 0)

    @property
    def p(self) -> int:
        return self.sigma.p

    def translate_terms(self) -> list[tuple[int, complex]]:
        return list(self.terms)

    def kirillov(self, n: int) -> complex:
        return sum(w * self.sigma.kirillov(n + k) for k, w in self.terms)

    def value(self, g: GL2Element) -> complex:
        p = self.p
        return sum(
            w * self.sigma.value(g @ a_elt(p, Fraction(p) ** k)) for k, w in self.terms
        )

    def integral_kirillov(self, tail: int = 300) -> complex:
        base = self.sigma.integral_kirillov(tail)
        return sum(w for _, w in self.terms) * base

    def translated_a_power(self, j: int) -> "SphericalTranslates":
        return SphericalTranslates(self.sigma, [(k + j, w) for k, w in self.terms])


class WhittakerLift:
    """W_v(g) = int v(w n(t) g) psi(-t) dt as a stabilized shell expansion."""

    def __init__(self, v: InducedVector, tol: float = 1e-12):
        n = v.rep.ratio_cond
        if n < 1:
            raise NonStabilizingIntegral(
                "intertwiner offered only for c(chi1/chi2) >= 1; "
                "use the spherical evaluator in the unramified case"
            )
        self.v = v
        self.tol = tol
        depth = 2
        if v.kind == "line":
            depth = max(2, v.f.constancy_depth() - v.f.support_min_val())
        self.max_neg_shell = n + depth + 2

    def value(self, g: GL2Element) -> complex:
        p = self.v.rep.prime
        w = w_elt(p)
        # deep positive shells: integrand equals v(w g) psi-free on p^J
        J = self._deep_cutoff(g)
        total = float(p) ** (-J) * self.v.value(w @ g)
        scale = max(1.0, math.sqrt(self.v.norm_sq()))
        # sum the whole window down to the analytic cutoff; shells beyond it
        # vanish by character cancellation, certified by the trailing pair
        tail = []
        for j in range(J - 1, -self.max_neg_shell - 1, -1):
            contrib = self._shell_integral(g, j)
            total += contrib
            tail.append(abs(contrib))
        if tail and max(tail[-2:]) > 1e-9 * scale:
            raise NonStabilizingIntegral(
                "shell expansion still active at the analytic cutoff"
            )
        return total

    def _deep_cutoff(self, g: GL2Element) -> int:
        # find J with v(w n(t) g) constant for t in p^J, certified by refinement
        p = self.v.rep.prime
        w = w_elt(p)
        ref = self.v.value(w @ g)
        J = 1
        while J < 40:
            probes = [Fraction(p) ** J, Fraction(p) ** J * (p + 1), Fraction(p) ** (J + 1)]
            if all(
                abs(self.v.value(w @ n_upper(p, t) @ g) - ref) <= 1e-13 * (1 + abs(ref))
                for t in probes
            ):
                return J
            J += 1
        raise NonStabilizingIntegral("no deep cutoff found for the intertwiner")

    def _shell_integral(self, g: GL2Element, j: int) -> complex:
        """Exact integral over v(t) = j by refinement to stability."""
        p = self.v.rep.prime
        w = w_elt(p)
        vol = float(p) ** (-j) * (1 - 1 / p)
        prev = None
        agree = 0
        d = max(1, -j)
        while d <= max(-j, 0) + 22:
            us = unit_reps(p, d)
            acc = 0.0 + 0.0j
            for u in us:
                t = Fraction(int(u) * p**j) if j >= 0 else Fraction(int(u), p**-j)
                psi_neg_t = root_of_unity(Fraction(-t) % 1) if j < 0 else 1.0
                acc += self.v.value(w @ n_upper(p, t) @ g) * psi_neg_t
            mean = acc / len(us)
            if prev is not None and abs(mean - prev) <= 1e-13 * (1 + abs(mean)):
                agree += 1
                if agree >= 2:
                    return vol * mean
            else:
                agree = 0
            prev = mean
            d += 1
        raise NonStabilizingIntegral("shell refinement did not stabilize")

    def kirillov_at(self, y: PAdicNumber) -> complex:
        p = self.v.rep.prime
        if y.exact is None:
            raise PrecisionError("need exact y for the scalar Kirillov path")
        return self.value(a_elt(p, y.exact))


WhittakerVector = Union[SphericalWhittaker, KirillovCompact, WhittakerLift]


def whittaker_intertwine(v: InducedVector, g: GL2Element) -> complex:
    return WhittakerLift(v).value(g)


def spherical_whittaker(p: int, alpha: complex, beta: complex, y: PAdicNumber) -> complex:
    """Closed-form spherical Whittaker value at a(y)."""
    return SphericalWhittaker(p, alpha, beta).kirillov_at(y)


def full_whittaker_at(W, y: PAdicNumber, x: PAdicNumber) -> complex:
    """W(a(y) n'(x)), delegating to the vector's full evaluator."""
    if y.is_zero:
        raise ZeroDivisionError("need y != 0")
    p = y.prime
    yq = y.exact
    xq = x.exact if not x.is_zero else Fraction(0)
    if yq is None or xq is None:
        raise PrecisionError("chart evaluation needs exact coordinates")
    return W.value(chart_point(p, yq, xq))
