"""Haar integration on ZU\\G and the local Rankin-Selberg trilinear form.

Two independent integration routes are provided and cross-checked:

* the direct route integrates W1 * conj(W_{v2}) * v3 over the (y, x)
  chart, with the Whittaker lift W_{v2} expanded as a shell sum in t;
* the diagonal-invariance route computes the unfolded (x, y, t) triple
  integral whose inner unit average is a Gauss-type sum.

All integrals are finite sums: every factor is locally constant at a
depth computable from conductors and ball data, and each shell is
sampled exactly at that depth.  Certificates (window enlargement and
depth refinement) are exposed for the property tests.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np

from .padic import (
    MultCharacter,
    OpenUnitSubgroup,
    PAdicNumber,
    UnitCharacter,
    Zp,
    gauss_sum_shell,
    inverse_table,
    root_of_unity,
    unit_reps,
)
from .repn import (
    BallFunction,
    CharShell,
    ConstBall,
    GL2Element,
    InducedVector,
    KirillovCompact,
    NonStabilizingIntegral,
    PrincipalSeries,
    SphericalTranslates,
    SphericalWhittaker,
    WhittakerLift,
    a_elt,
    build_microlocal,
    build_newvector,
    chart_point,
    partition_n1,
)

__all__ = [
    "HaarGrid",
    "integrate_ZUG",
    "ell_RS",
    "ell_RS_via_diag_invariance",
    "rs_constant_c",
    "verify_local_rs_I",
    "verify_local_rs_II",
    "verify_local_rs_III",
    "mv_epic_identity_check",
    "RSReport",
    "whittaker_kirillov_integral",
]

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# small vector kernels
# ---------------------------------------------------------------------------


def _psi_units(p: int, j: int, units: np.ndarray, sign: int = 1) -> np.ndarray:
    """psi(sign * p^j * u) for an array of units (given mod p^{>= -j})."""
    if j >= 0:
        return np.ones(len(units), dtype=np.complex128)
    pe = p**-j
    r = (sign * units) % pe
    return np.exp((1j * TWO_PI / pe) * r)


def _inv_units(p: int, units: np.ndarray, d: int) -> np.ndarray:
    """Inverses mod p^d of an array of units."""
    if d <= 0:
        return np.ones_like(units)
    return inverse_table(p, d)[units % p**d]


@lru_cache(maxsize=None)
def _partial_gauss(
    omega: UnitCharacter, j: int, h: int, sign: int
) -> np.ndarray:
    """Partial Gauss sums: index w in (Z/p^h)^* ->
    (1/#U) sum_{u = w mod p^h} omega(u) psi(sign p^j u), U = units mod p^dt."""
    p = omega.prime
    dt = max(omega.cond, -j, h, 1)
    us = unit_reps(p, dt)
    vals = omega.values_on(us, dt) * _psi_units(p, j, us, sign)
    out = np.zeros(p**h if h > 0 else 1, dtype=np.complex128)
    if h > 0:
        np.add.at(out, us % p**h, vals)
    else:
        out[0] = vals.sum()
    return out / len(us)


def _gauss_mean(omega: UnitCharacter, j: int, sign: int = 1) -> complex:
    """E_{units}[omega(u) psi(sign p^j u)]."""
    return complex(_partial_gauss(omega, j, 0, sign)[0])


def _val_units_split(p: int, arr: np.ndarray, depth: int):
    """(valuation, unit) split of nonnegative residues mod p^depth.

    Entries equal to 0 mod p^depth get valuation ``depth`` and unit 0.
    """
    a = arr % p**depth
    v = np.zeros(a.shape, dtype=np.int64)
    alive = a != 0
    work = a.copy()
    for _ in range(depth):
        div = alive & (work % p == 0)
        if not div.any():
            break
        work[div] //= p
        v[div] += 1
    v[~alive] = depth
    return v, work


# ---------------------------------------------------------------------------
# Haar grid and the generic (scalar, adaptive) integrator
# ---------------------------------------------------------------------------


@dataclass
class HaarGrid:
    """Truncation window and coset depth for the measure on ZU\\G.

    The chart is phi |-> int int phi(a(y) n'(x)) d^x y / |y| dx, with
    d^x y giving each shell of k^* volume 1 and dx(Z_p) = 1.
    """

    prime: int
    j1: int = 8          # y-shells v(y) >= -j1
    j2: int = 8          # y-shells v(y) <= j2
    x_lo: int = -8       # x-shells v(x) >= x_lo
    x_hi: int = 8        # x interior ball p^{x_hi} collapsed to one cell
    depth: int = 6       # maximal unit-coset refinement per shell
    tol: float = 1e-11

    def enlarged(self) -> "HaarGrid":
        return HaarGrid(
            self.prime, self.j1 + 2, self.j2 + 2, self.x_lo - 2,
            self.x_hi + 2, self.depth + 1, self.tol,
        )


def _shell_mean_adaptive(p, fn, tol, max_depth, d0=0):
    """Mean of fn over units of a shell, refining until two stable steps."""
    prev = None
    agree = 0
    for d in range(max(d0, 1), max_depth + 1):
        us = unit_reps(p, d)
        m = sum(fn(int(u), d) for u in us) / len(us)
        if prev is not None and abs(m - prev) <= max(tol, 1e-13 * (1 + abs(m))):
            agree += 1
            if agree >= 2:
                return m
        else:
            agree = 0
        prev = m
    return prev


def integrate_ZUG(
    phi: Callable[[Fraction, Fraction], complex], grid: HaarGrid
) -> complex:
    """Integral over ZU\\G of a locally constant chart function phi(y, x).

    Pure scalar reference path: each (y-shell, x-shell) cell is refined
    until two consecutive coset depths agree; the x-interior ball is one
    cell.  Fails loudly (NonStabilizingIntegral) if enlarging the window
    by 2 and the depth by 1 moves the result more than the tolerance.
    """
    val = _integrate_zug_once(phi, grid)
    big = _integrate_zug_once(phi, grid.enlarged())
    if abs(val - big) > grid.tol * max(1.0, abs(val)):
        raise NonStabilizingIntegral(
            f"window certificate failed: {val} vs {big} after enlargement"
        )
    return big


def _integrate_zug_once(phi, grid: HaarGrid) -> complex:
    p = grid.prime
    total = 0.0 + 0.0j
    for ry in range(-grid.j1, grid.j2 + 1):
        yrow = 0.0 + 0.0j
        # x interior ball: p^{x_hi} Z_p, including x = 0
        def cell0(uy, d, _ry=ry):
            y = Fraction(int(uy) * p**_ry) if _ry >= 0 else Fraction(int(uy), p**-_ry)
            return phi(y, Fraction(0))
        v0 = _shell_mean_adaptive(p, cell0, grid.tol, grid.depth)
        yrow += float(p) ** (-grid.x_hi) * v0
        for rx in range(grid.x_lo, grid.x_hi):
            def cell(uy, d, _ry=ry, _rx=rx):
                y = Fraction(int(uy) * p**_ry) if _ry >= 0 else Fraction(int(uy), p**-_ry)

                def inner(ux, dd):
                    x = (
                        Fraction(int(ux) * p**_rx)
                        if _rx >= 0
                        else Fraction(int(ux), p**-_rx)
                    )
                    return phi(y, x)

                return _shell_mean_adaptive(p, inner, grid.tol, grid.depth)

            m = _shell_mean_adaptive(p, cell, grid.tol, grid.depth)
            yrow += float(p) ** (-rx) * (1 - 1 / p) * m
        total += yrow  # d^x y volume of each shell is 1
    return total


# ---------------------------------------------------------------------------
# Whittaker transform of a line-model vector on a chart cell (fast path)
# ---------------------------------------------------------------------------
#
#   W_{v_f}(a(y) n'(x)) = |y|^{1/2} chi1(y) T_f(x, y),
#   T_f(x, y) = sum_j (1-1/p) chi_r(p)^j E_{u}[w_r(u) psi(-p^j u) f(x + y/t)],
#
# with t = p^j u and chi_r = chi2/chi1.  The chi1(y) twist cancels against
# the v3 factor in the trilinear integrand, so only T enters the fast path.


def _single_piece(f: BallFunction):
    if len(f.pieces) != 1:
        raise NotImplementedError("fast path supports single-piece line data")
    piece = f.pieces[0]
    if isinstance(piece, CharShell) and abs(piece.chi.at_p - 1.0) > 1e-14:
        raise NotImplementedError("shell characters must have at_p = 1")
    return piece


def _ball_center_val(p: int, piece: ConstBall):
    """Valuation of the center, or None for balls centered at 0."""
    if piece.center == 0 or _fraction_val(p, piece.center) >= piece.radius_exp:
        return None
    return _fraction_val(p, piece.center)


def _on_support_shell(p: int, piece, rx) -> bool:
    """Whether the x-shell rx lies inside the support of the piece."""
    if isinstance(piece, CharShell):
        return rx == piece.shell
    cv = _ball_center_val(p, piece)
    if cv is None:
        return rx is None or rx >= piece.radius_exp
    return rx == cv


@dataclass
class _TCellSpec:
    """Unit depths required by T_f on the cell (ry, rx)."""

    dy: int
    dx: int


def _t_depths(p: int, piece, ry: int, rx: Optional[int]) -> _TCellSpec:
    if isinstance(piece, ConstBall):
        cv = _ball_center_val(p, piece)
        if cv is not None:
            # only the support shell matters; the mask needs R - rx digits
            dx = piece.radius_exp - rx if rx is not None else 0
            return _TCellSpec(0, max(dx, 0))
        if rx is None or rx >= piece.radius_exp:
            return _TCellSpec(0, 0)
        return _TCellSpec(piece.radius_exp - rx, piece.radius_exp - rx)
    cf = max(piece.chi.cond, 1)
    if rx is None or rx > piece.shell:
        return _TCellSpec(cf, cf)
    if rx == piece.shell:
        return _TCellSpec(cf, cf)
    return _TCellSpec(piece.shell - rx + cf, piece.shell - rx + cf)


def _t_transform_cell(
    rep: PrincipalSeries,
    f: BallFunction,
    ry: int,
    uy: np.ndarray,
    rx: Optional[int],
    ux: np.ndarray,
) -> np.ndarray:
    """T_f(x, y) on the unit grid of one cell; shape (len(uy), len(ux)).

    rx None means x = 0 (interior point).
    """
    p = rep.prime
    piece = _single_piece(f)
    chi_r = rep.chi2.ratio(rep.chi1)
    w_r = chi_r.unit_part
    res = np.zeros((len(uy), len(ux)), dtype=np.complex128)

    def gauss_tail(j_max: int) -> complex:
        # sum over shells j <= j_max of (1-1/p) chi_r(p)^j E[w_r psi(-p^j u)];
        # w_r is ramified so only j = -c(w_r) survives
        jstar = -w_r.cond
        if jstar > j_max:
            return 0.0 + 0.0j
        return (
            (1 - 1 / p)
            * chi_r.at_p**jstar
            * _gauss_mean(w_r, jstar, sign=-1)
        )

    if isinstance(piece, ConstBall):
        R, val = piece.radius_exp, piece.value
        cv = _ball_center_val(p, piece)
        if cv is not None:
            # centered ball: correct on the support coset, where the
            # membership condition collapses to s in p^R; elsewhere the
            # f3-factor of the cell vanishes
            if rx != cv:
                return res
            res += val * gauss_tail(ry - R) * _center_mask(p, piece, rx, ux)[None, :]
            return res
        if rx is None or rx >= R:
            res += val * gauss_tail(ry - R)
            return res
        # x outside the ball: s = y/t must hit the coset -x + p^R
        j0 = ry - rx
        h = R - rx
        pg = _partial_gauss(w_r, j0, h, -1)
        ph = p**h
        inv_ux = _inv_units(p, ux, h)
        w_idx = (-(uy[:, None] * inv_ux[None, :])) % ph
        res += val * (1 - 1 / p) * chi_r.at_p**j0 * pg[w_idx]
        return res

    # character pattern on a single shell
    n, w_f, scale = piece.shell, piece.chi.unit_part, piece.scale
    cf = max(w_f.cond, 1)
    pcf = p**cf

    def w_f_vals(units_mod: np.ndarray) -> np.ndarray:
        flat = units_mod.reshape(-1)
        ok = flat % p != 0
        out = np.zeros(flat.shape, dtype=np.complex128)
        if ok.any():
            out[ok] = w_f.values_on(flat[ok], cf)
        return out.reshape(units_mod.shape)

    if rx is None or rx > n:
        # s must land exactly on the shell; x perturbs the unit slightly
        j0 = ry - n
        pg = _partial_gauss(w_r, j0, cf, -1)
        winv = _inv_units(p, unit_reps(p, cf), cf)
        wres = unit_reps(p, cf)
        # u_s = uy * w^{-1} mod p^cf, shifted by p^{rx-n} ux when x != 0
        us = uy[:, None] % pcf * winv[None, :] % pcf
        if rx is not None:
            shift = (ux % pcf) * pow(p, rx - n, pcf) % pcf
            arg = (us[:, None, :] + shift[None, :, None]) % pcf
        else:
            arg = np.repeat(us[:, None, :], len(ux), axis=1)
        fv = w_f_vals(arg)
        res += (
            scale
            * (1 - 1 / p)
            * chi_r.at_p**j0
            * np.tensordot(fv, pg[wres], axes=([2], [0]))
        )
        return res

    if rx == n:
        # collision shell: e = v(s) - n ranges over [0, cf) plus a Gauss tail
        res += scale * w_f_vals(ux % pcf)[None, :] * gauss_tail(ry - n - cf)
        for e in range(cf - 1, -1, -1):
            j0 = ry - n - e
            h = cf - e
            pg = _partial_gauss(w_r, j0, h, -1)
            wres = unit_reps(p, h)
            winv = _inv_units(p, wres, h)
            us = uy[:, None] % p**h * winv[None, :] % p**h  # (uy, w)
            arg = (
                ux[None, :, None] % pcf
                + us[:, None, :] * pow(p, e, pcf)
            ) % pcf
            fv = w_f_vals(arg)
            res += (
                scale
                * (1 - 1 / p)
                * chi_r.at_p**j0
                * np.tensordot(fv, pg[wres], axes=([2], [0]))
            )
        return res

    # rx < n: s must cancel x to depth n - rx, then match the pattern
    j0 = ry - rx
    h = (n - rx) + cf
    ph = p**h
    pg = _partial_gauss(w_r, j0, h, -1)
    wres = unit_reps(p, h)
    winv = _inv_units(p, wres, h)
    us = uy[:, None] % ph * winv[None, :] % ph
    m = (ux[None, :, None] % ph + us[:, None, :]) % ph  # (uy, ux, w)
    v, unit = _val_units_split(p, m, h)
    good = v == (n - rx)
    fv = np.zeros(m.shape, dtype=np.complex128)
    if good.any():
        fv[good] = w_f_vals(unit[good] % pcf)
    res += (
        scale
        * (1 - 1 / p)
        * chi_r.at_p**j0
        * np.tensordot(fv, pg[wres], axes=([2], [0]))
    )
    return res


# ---------------------------------------------------------------------------
# sigma-side factor on a cell
# ---------------------------------------------------------------------------


def _whittaker_terms(W1) -> tuple[list[tuple[int, complex]], Callable[[int], complex]]:
    """(translate terms, Casselman-Shalika evaluator) for the sigma vector."""
    if isinstance(W1, SphericalWhittaker):
        return [(0, 1.0 + 0.0j)], W1.kirillov
    if isinstance(W1, (KirillovCompact, SphericalTranslates)):
        return W1.translate_terms(), W1.sigma.kirillov
    raise NotImplementedError("fast path needs a spherical-type sigma vector")


def _w1_cell(
    W1, p: int, ry: int, uy: np.ndarray, rx: Optional[int], ux: np.ndarray
) -> np.ndarray:
    """W1(a(y) n'(x)) on the cell grid; shape (len(uy), len(ux))."""
    terms, kcs = _whittaker_terms(W1)
    b1 = sum(w * kcs(ry + k) for k, w in terms if rx is None or rx + k >= 0)
    res = np.full((len(uy), len(ux)), complex(b1), dtype=np.complex128)
    if rx is None:
        return res
    b2 = sum(w * kcs(ry - 2 * rx - k) for k, w in terms if rx + k < 0)
    if b2 != 0:
        e = rx - ry
        if e <= 0:
            res += complex(b2)
        else:
            pe = p**e
            inv_x = _inv_units(p, ux, e)
            r = uy[:, None] % pe * inv_x[None, :] % pe
            res += b2 * np.exp((1j * TWO_PI / pe) * r)
    return res


def _w1_depths(W1, ry: int, rx: Optional[int]) -> int:
    terms, _ = _whittaker_terms(W1)
    if rx is None:
        return 0
    if any(rx + k < 0 for k, _ in terms):
        return max(0, rx - ry)
    return 0


def _w1_row_floor(W1, rx_min: int) -> int:
    """Provable floor: W1-factor vanishes for v(y) below this."""
    terms, _ = _whittaker_terms(W1)
    ks = [k for k, _ in terms]
    floor_b1 = -max(ks)
    floor_b2 = 2 * rx_min + min(ks)
    return min(floor_b1, floor_b2)


# ---------------------------------------------------------------------------
# direct route
# ---------------------------------------------------------------------------


def _fast_eligible(v: InducedVector) -> bool:
    if v.kind != "line" or v.rho is not None:
        return False
    try:
        _single_piece(v.f)
    except NotImplementedError:
        return False
    return True


def _center_mask(p: int, piece: ConstBall, rx: int, ux: np.ndarray) -> np.ndarray:
    """Indicator of x = p^rx ux lying in the (centered) ball."""
    h = piece.radius_exp - rx
    if h <= 0:
        return np.ones(len(ux))
    c = piece.center / Fraction(p) ** rx
    ph = p**h
    target = c.numerator * pow(c.denominator, -1, ph) % ph
    return (ux % ph == target).astype(np.float64)


def _f_values_on_units(piece, p: int, rx: Optional[int], ux: np.ndarray) -> np.ndarray:
    """f(x) for x = p^rx ux (or x = 0) on the support shell of the piece."""
    if isinstance(piece, ConstBall):
        vals = np.full(len(ux), piece.value, dtype=np.complex128)
        if _ball_center_val(p, piece) is not None and rx is not None:
            vals = vals * _center_mask(p, piece, rx, ux)
        return vals
    cf = max(piece.chi.cond, 1)
    return piece.scale * piece.chi.unit_part.values_on(ux % p**cf, cf)


def _x_regions(p: int, piece, extra_depth: int):
    """x-shells carrying the v3 factor: (list of shells, interior radius or None)."""
    if isinstance(piece, ConstBall):
        cv = _ball_center_val(p, piece)
        if cv is not None:
            return [cv], None
        R = piece.radius_exp
        hi = R + extra_depth
        return list(range(R, hi)), hi
    return [piece.shell], None


def ell_RS(
    W1,
    v2: InducedVector,
    v3: InducedVector,
    tol: float = 1e-11,
    extra_window: int = 0,
) -> complex:
    """Direct route: int over ZU\\G of W1 * conj(W_{v2}) * v3.

    Requires v2, v3 in a common principal series.  Vectors in fast form
    (untranslated single-piece line data, spherical-type W1) use the
    vectorized cell kernels; anything else falls back to the scalar
    adaptive integrator with the shell-expansion Whittaker lift.
    """
    if v2.rep is not v3.rep and v2.rep != v3.rep:
        raise ValueError("v2 and v3 must live in the same principal series")
    fast = _fast_eligible(v2) and _fast_eligible(v3)
    try:
        _whittaker_terms(W1)
    except NotImplementedError:
        fast = False
    if fast:
        return _ell_rs_fast(W1, v2, v3, tol, extra_window)
    return _ell_rs_scalar(W1, v2, v3, tol)


def _ell_rs_fast(W1, v2, v3, tol, extra_window) -> complex:
    rep = v2.rep
    p = rep.prime
    f2, f3 = v2.f, v3.f
    pc2, pc3 = _single_piece(f2), _single_piece(f3)
    for pc in (pc2, pc3):
        if (
            isinstance(pc, ConstBall)
            and _ball_center_val(p, pc) is not None
            and pc2 != pc3
        ):
            raise NotImplementedError("centered balls need matching v2 = v3 data")
    pref = np.conj(v2.scalar) * v3.scalar

    n = rep.ratio_cond
    terms, _ = _whittaker_terms(W1)
    ks = [k for k, _ in terms]
    extra = 2 + extra_window
    xdepth = max(
        f2.constancy_depth() - f3.support_min_val(),
        -min(ks) - f3.support_min_val(),
        0,
    )
    shells, interior = _x_regions(p, pc3, xdepth + extra)

    rx_min = min(shells)
    ry_floor = min(_w1_row_floor(W1, rx_min), -partition_n1(n)[0] - abs(min(ks))) - 2 - extra
    # rows decay like p^{-ry/2} beyond the window; run until the trailing
    # triple is negligible, with a generous hard cap as a safety net
    ry_cap = n + max(abs(k) for k in ks) + int(100 / math.log10(p)) + 2 * extra

    total = 0.0 + 0.0j
    tail_rows = []
    scale_ref = max(math.sqrt(v2.norm_sq() * v3.norm_sq()), 1e-30)
    for ry in range(ry_floor, ry_cap + 1):
        row = 0.0 + 0.0j
        for rx in shells:
            row += _rs_cell(W1, rep, f2, pc2, pc3, ry, rx, p)
        if interior is not None:
            row += _rs_cell(W1, rep, f2, pc2, pc3, ry, None, p) * float(p) ** (
                -interior
            )
        total += row
        tail_rows.append(abs(row))
        if ry > n + max(ks) + 4 and len(tail_rows) >= 3:
            if max(tail_rows[-3:]) < 1e-14 * max(scale_ref, abs(total)):
                break
    return pref * total


def _rs_cell(W1, rep, f2, pc2, pc3, ry, rx, p) -> complex:
    """One (y-shell, x-shell) cell of the direct-route integrand.

    Returns the full cell integral against d^x y dx except that the
    x-interior volume factor (rx None) is applied by the caller.
    """
    spec = _t_depths(p, pc2, ry, rx)
    dy = max(spec.dy, _w1_depths(W1, ry, rx), 0)
    dx = spec.dx
    if rx is not None and isinstance(pc3, CharShell):
        dx = max(dx, pc3.chi.cond)
    dx = max(dx, _w1_depths(W1, ry, rx))
    uy = unit_reps(p, max(dy, 1)) if dy > 0 else np.array([1], dtype=np.int64)
    ux = unit_reps(p, max(dx, 1)) if dx > 0 else np.array([1], dtype=np.int64)

    w1v = _w1_cell(W1, p, ry, uy, rx, ux)
    if not w1v.any():
        return 0.0 + 0.0j
    tv = _t_transform_cell(rep, f2, ry, uy, rx, ux)
    f3v = _f_values_on_units(pc3, p, rx, ux)
    cell = (w1v * np.conj(tv) * f3v[None, :]).mean()
    if rx is None:
        return complex(cell)
    return complex(cell) * float(p) ** (-rx) * (1 - 1 / p)


def _ell_rs_scalar(W1, v2, v3, tol) -> complex:
    """Reference route: adaptive chart integration with the lifted W_{v2}."""
    p = v2.rep.prime
    lift = WhittakerLift(v2)
    cache: dict[tuple, complex] = {}

    def phi(y: Fraction, x: Fraction) -> complex:
        g = chart_point(p, y, x)
        key = (y, x)
        if key not in cache:
            cache[key] = lift.value(g)
        wv = cache[key]
        w1 = W1.value(g)
        if w1 == 0 and wv == 0:
            return 0.0 + 0.0j
        yv = 0 if y == 0 else _fraction_val(p, y)
        return w1 * np.conj(wv) * v3.value(g) * float(p) ** yv  # divide by |y|

    n = v2.rep.ratio_cond
    grid = HaarGrid(p, j1=n + 6, j2=n + 8, x_lo=-(n + 4), x_hi=n + 4,
                    depth=n + 6, tol=tol)
    return integrate_ZUG(phi, grid)


def _fraction_val(p: int, q: Fraction) -> int:
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


# ---------------------------------------------------------------------------
# diagonal-invariance route
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _h0_shell_table(
    omega: UnitCharacter, u1_depth: int, sigma: int
) -> np.ndarray:
    """H0(p^sigma w) = E_{u in U1}[omega(u) psi(u p^sigma w)] indexed by w.

    Table over w mod p^{dH}; entries at non-units are 0 (never looked up).
    """
    p = omega.prime
    u1 = OpenUnitSubgroup(p, u1_depth)
    dH = max(omega.cond, -sigma, 1)
    dU = max(omega.cond, -sigma, u1_depth, 1) + 1
    ws = unit_reps(p, dH)
    us = u1.reps_mod(dU).astype(np.int64)
    if omega.cond > 0:
        uvals = omega.values_on(us % p**max(omega.cond, 1), max(omega.cond, 1))
    else:
        uvals = np.ones(len(us), dtype=np.complex128)
    out = np.zeros(p**dH, dtype=np.complex128)
    if sigma >= 0:
        out[ws] = uvals.mean()
        return out
    pe = p**-sigma
    prod = us[None, :] * ws[:, None] % pe
    phase = np.exp((1j * TWO_PI / pe) * prod)
    out[ws] = (uvals[None, :] * phase).mean(axis=1)
    return out


def _h0_support_floor(omega: UnitCharacter, u1: OpenUnitSubgroup) -> int:
    """H0(s) = 0 once -v(s) >= max(c, depth) + 1 (inner coset cancellation)."""
    return -(max(omega.cond, u1.depth) + 1)


def _h0_at(omega: UnitCharacter, u1: OpenUnitSubgroup, sigma: int, w: int) -> complex:
    if sigma < _h0_support_floor(omega, u1) - 0:
        return 0.0 + 0.0j
    tab = _h0_shell_table(omega, u1.depth, sigma)
    dH = max(omega.cond, -sigma, 1)
    return complex(tab[w % omega.prime**dH if dH > 0 else 0])


def ell_RS_via_diag_invariance(
    W1,
    f: BallFunction,
    rep: PrincipalSeries,
    u1: Optional[OpenUnitSubgroup] = None,
    tol: float = 1e-11,
    extra_window: int = 0,
) -> complex:
    """Unfolded route: triple integral of f(x) conj(f)(x + y/t) F(x,y,t).

    F(x,y,t) = E_{u in U1} W1(a(y) n'(x/u)) chi_t(u t) psi(u t), with
    chi_t = chi1/chi2.  U1 defaults to the full unit group, where H0(s)
    := E_u[w_t(u) psi(u s)] is supported on the single shell v(s) = -N
    and the t-integral collapses to closed Gauss strata.  The invariance
    precondition on conj(f) x f holds by construction for ball and
    character-shell data.
    """
    p = rep.prime
    if u1 is None:
        u1 = OpenUnitSubgroup(p, 0)
    piece = _single_piece(f)
    chi_t = rep.chi1.ratio(rep.chi2)
    w_t = chi_t.unit_part
    if w_t.cond < 1:
        raise ValueError("needs c(chi1/chi2) >= 1")

    terms, kcs = _whittaker_terms(W1)
    ks = [k for k, _ in terms]
    extra = 2 + extra_window

    if isinstance(piece, ConstBall):
        cv = _ball_center_val(p, piece)
        if cv is not None:
            shells, interior = [cv], None
        else:
            R = piece.radius_exp
            xdepth = max(R, -min(ks)) + extra
            shells, interior = list(range(R, xdepth)), xdepth
    else:
        shells, interior = [piece.shell], None
    if u1.depth > 0 and not isinstance(piece, ConstBall):
        raise NotImplementedError(
            "proper U1 subgroups are supported for ball data only"
        )

    rx_min = min(shells)
    ry_floor = _w1_row_floor(W1, rx_min) - 2 - extra
    ry_cap = (
        rep.ratio_cond
        + max(abs(k) for k in ks)
        + int(100 / math.log10(p))
        + 2 * extra
    )

    total = 0.0 + 0.0j
    rows = []
    for ry in range(ry_floor, ry_cap + 1):
        row = 0.0 + 0.0j
        for rx in shells:
            row += _diag_cell(W1, rep, piece, u1, chi_t, ry, rx, p)
        if interior is not None:
            row += _diag_cell(W1, rep, piece, u1, chi_t, ry, None, p) * float(
                p
            ) ** (-interior)
        total += row
        rows.append(abs(row))
        if ry > rep.ratio_cond + max(ks) + 4 and len(rows) >= 3:
            if max(rows[-3:]) < 1e-14 * max(1e-30, abs(total)):
                break
    return total


def _diag_cell(W1, rep, piece, u1, chi_t, ry, rx, p) -> complex:
    """One (y-shell, x-region) cell of the triple integral.

    The inner unit average over U1 and the t-integral are evaluated in
    closed form against the Gauss support of H0; what remains are plain
    unit averages of the conj(f)-factor (independent of the y-unit).
    """
    terms, kcs = _whittaker_terms(W1)
    b1 = sum(w * kcs(ry + k) for k, w in terms if rx is None or rx + k >= 0)
    b2 = (
        0.0
        if rx is None
        else sum(w * kcs(ry - 2 * rx - k) for k, w in terms if rx + k < 0)
    )
    if b1 == 0 and b2 == 0:
        return 0.0 + 0.0j
    w_t = chi_t.unit_part

    dx = 0
    if rx is not None:
        if isinstance(piece, CharShell):
            dx = max(piece.chi.cond, _t_depths(p, piece, ry, rx).dx)
        else:
            dx = _t_depths(p, piece, ry, rx).dx
        if b2 != 0:
            dx = max(dx, w_t.cond, rx - ry + w_t.cond)
    ux = unit_reps(p, dx) if dx > 0 else np.array([1], dtype=np.int64)
    fx = _f_values_on_units(piece, p, rx, ux)

    if u1.depth == 0:
        cell = _diag_tsum_full_units(rep, piece, chi_t, ry, rx, ux, b1, b2, p)
    else:
        cell = _diag_tsum_proper_u1(rep, piece, u1, chi_t, ry, rx, ux, b1, b2, p)
    val = (cell * fx).mean()
    if rx is None:
        return complex(val)
    return complex(val) * float(p) ** (-rx) * (1 - 1 / p)


def _fbar_shell_avg(
    piece, p: int, rx: Optional[int], ux: np.ndarray, vs: int,
    weight: Optional[UnitCharacter] = None,
) -> np.ndarray:
    """E_{v in units}[conj f(x + p^vs v) * weight(v)^{-1}] on the x-units.

    weight None means the plain average.
    """
    dv = max(_fbar_v_depth(p, piece, rx, vs), weight.cond if weight else 0, 1)
    vs_units = unit_reps(p, dv)
    fb = _fbar_on_v(piece, p, rx, ux, vs, vs_units)  # (ux, v)
    if weight is not None and weight.cond > 0:
        wv = np.conj(weight.values_on(vs_units, dv))
        fb = fb * wv[None, :]
    return fb.mean(axis=1)


def _fbar_v_depth(p: int, piece, rx: Optional[int], vs: int) -> int:
    if isinstance(piece, ConstBall):
        if _on_support_shell(p, piece, rx):
            return 0
        return piece.radius_exp - rx
    cf = max(piece.chi.cond, 1)
    n = piece.shell
    if rx is None or rx > n:
        return cf
    if rx == n:
        e = vs - n
        return 0 if e < 0 else max(cf - e, 0) if e < cf else 0
    return (n - rx) + cf


def _fbar_on_v(piece, p, rx, ux, vs, v_units) -> np.ndarray:
    """conj(f)(x + p^vs v) as an (ux, v) array."""
    nx, nv = len(ux), len(v_units)
    if isinstance(piece, ConstBall):
        R, val = piece.radius_exp, np.conj(piece.value)
        out = np.zeros((nx, nv), dtype=np.complex128)
        if _on_support_shell(p, piece, rx):
            # for x in the support, x + s in the ball iff v(s) >= R;
            # off-support x on the same shell is killed by the f(x) factor
            if vs >= R:
                out[:] = val
            return out
        if vs != rx:
            return out
        h = R - rx
        ph = p**h
        cond = (ux[:, None] % ph + v_units[None, :] % ph) % ph == 0
        out[cond] = val
        return out
    n, cf = piece.shell, max(piece.chi.cond, 1)
    pcf = p**cf
    w_f = piece.chi.unit_part
    scale = np.conj(piece.scale)

    def wbar(units_mod: np.ndarray) -> np.ndarray:
        flat = units_mod.reshape(-1)
        ok = flat % p != 0
        vals = np.zeros(flat.shape, dtype=np.complex128)
        if ok.any():
            vals[ok] = np.conj(w_f.values_on(flat[ok], cf))
        return vals.reshape(units_mod.shape)

    out = np.zeros((nx, nv), dtype=np.complex128)
    if rx is None or rx > n:
        if vs != n:
            return out
        if rx is None:
            arg = np.broadcast_to(v_units[None, :] % pcf, (nx, nv)).copy()
        else:
            shift = ux % pcf * pow(p, rx - n, pcf) % pcf
            arg = (shift[:, None] + v_units[None, :] % pcf) % pcf
        return scale * wbar(arg)
    if rx == n:
        e = vs - n
        if e < 0:
            return out
        if e >= cf:
            out[:] = (scale * wbar(ux % pcf))[:, None]
            return out
        arg = (ux[:, None] % pcf + v_units[None, :] * pow(p, e, pcf)) % pcf
        if e > 0:
            return scale * wbar(arg)
        v, unit = _val_units_split(p, arg, cf)
        vals = np.zeros(arg.shape, dtype=np.complex128)
        good = v == 0
        if good.any():
            vals[good] = scale * wbar(unit % pcf)[good]
        return vals
    # rx < n
    if vs != rx:
        return out
    h = (n - rx) + cf
    ph = p**h
    m = (ux[:, None] % ph + v_units[None, :] % ph) % ph
    v, unit = _val_units_split(p, m, h)
    vals = np.zeros(m.shape, dtype=np.complex128)
    good = v == (n - rx)
    if good.any():
        vals[good] = scale * wbar(unit % pcf)[good]
    return vals


def _diag_tsum_full_units(rep, piece, chi_t, ry, rx, ux, b1, b2, p) -> np.ndarray:
    """t-integral of the diag-route inner factor for U1 = full units.

    H0(s) = w_t^{-1}(unit s) G(-N) 1[v(s) = -N], so only a handful of
    (j, valuation) strata survive; each is a unit average of conj(f)
    weighted by characters, with no y-unit dependence left.
    """
    w_t = chi_t.unit_part
    c = w_t.cond
    G = _gauss_mean(w_t, -c, sign=1)
    out = np.zeros(len(ux), dtype=np.complex128)

    def jrange():
        # conj(f)(x + y/t) localizes v(s) = ry - j exactly as in T
        if isinstance(piece, ConstBall):
            R = piece.radius_exp
            if _on_support_shell(p, piece, rx):
                return range(-10 * (c + 4), ry - R + 1)
            return range(ry - rx, ry - rx + 1)
        n = piece.shell
        if rx is None or rx > n:
            return range(ry - n, ry - n + 1)
        if rx == n:
            return range(-10 * (c + 4), ry - n + 1)
        return range(ry - rx, ry - rx + 1)

    # part 1: b1 * sum_j chi_t(p)^j (1-1/p) G 1[j = -c] E_v[conj f(x + p^{ry+c} v)]
    if b1 != 0 and (-c) in jrange():
        favg = _fbar_shell_avg(piece, p, rx, ux, ry + c)
        out += b1 * (1 - 1 / p) * chi_t.at_p ** (-c) * G * favg
    # part 2: H0(p^j v^{-1} + p^rho u_x^{-1}) with rho = ry - rx
    if b2 != 0 and rx is not None:
        rho = ry - rx
        for j in jrange():
            vs = ry - j
            contrib = _diag_part2_shell(
                piece, w_t, chi_t, G, p, ry, rx, rho, j, vs, ux
            )
            if contrib is not None:
                out += b2 * (1 - 1 / p) * chi_t.at_p**j * contrib
    return out


def _diag_part2_shell(piece, w_t, chi_t, G, p, ry, rx, rho, j, vs, ux):
    """E_v[conj f(x + p^vs v) w_t(v)^{-1} H0(p^j v^{-1} + p^rho u_x^{-1})].

    Returns None when the H0 support condition cannot hold on this shell.
    """
    c = w_t.cond
    if j < rho:
        if j != -c:
            return None
        # H0-argument unit: v^{-1} + p^{rho-j} u_x^{-1} at depth c
        dv = max(_fbar_v_depth(p, piece, rx, vs), c, 1)
        v_units = unit_reps(p, dv)
        fb = _fbar_on_v(piece, p, rx, ux, vs, v_units)
        pe = p**c
        inv_v = _inv_units(p, v_units, c)
        inv_x = _inv_units(p, ux, c)
        shift = pow(p, rho - j, pe)
        arg = (inv_v[None, :] + shift * inv_x[:, None]) % pe
        wvals = np.conj(w_t.values_on(arg.reshape(-1) % pe, c)).reshape(arg.shape)
        wv = np.conj(w_t.values_on(v_units, dv))
        return G * (fb * wv[None, :] * wvals).mean(axis=1)
    if j > rho:
        if rho != -c:
            return None
        dv = max(_fbar_v_depth(p, piece, rx, vs), c, 1)
        v_units = unit_reps(p, dv)
        fb = _fbar_on_v(piece, p, rx, ux, vs, v_units)
        pe = p**c
        inv_v = _inv_units(p, v_units, c)
        inv_x = _inv_units(p, ux, c)
        shift = pow(p, j - rho, pe)
        arg = (inv_x[:, None] + shift * inv_v[None, :]) % pe
        wvals = np.conj(w_t.values_on(arg.reshape(-1) % pe, c)).reshape(arg.shape)
        wv = np.conj(w_t.values_on(v_units, dv))
        return G * (fb * wv[None, :] * wvals).mean(axis=1)
    # j == rho: v(arg) = j + v(v + u_x), need v(v + u_x) = -c - j exactly
    dcan = -c - j
    if dcan < 0:
        return None
    depth = max(_fbar_v_depth(p, piece, rx, vs), dcan + c + 1, 1)
    v_units = unit_reps(p, depth)
    fb = _fbar_on_v(piece, p, rx, ux, vs, v_units)
    pe = p**depth
    s = (v_units[None, :] + ux[:, None] % pe) % pe
    v, unit = _val_units_split(p, s, depth)
    mask = v == dcan
    if not mask.any():
        return np.zeros(len(ux), dtype=np.complex128)
    # unit((v^{-1} + ux^{-1})) = unit(v + ux) * (v ux)^{-1}
    inv_v = _inv_units(p, v_units, c)
    inv_x = _inv_units(p, ux, c)
    pc = p**c
    uu = (unit % pc) * inv_v[None, :] % pc * inv_x[:, None] % pc
    wvals = np.zeros(s.shape, dtype=np.complex128)
    wvals[mask] = np.conj(w_t.values_on(uu[mask], c))
    wv = np.conj(w_t.values_on(v_units, depth))
    return G * (fb * wv[None, :] * wvals * mask).mean(axis=1)


def _diag_tsum_proper_u1(rep, piece, u1, chi_t, ry, rx, ux, b1, b2, p) -> np.ndarray:
    """t-integral for a proper U1 < units: ball data, b1-branch only.

    With ball data the conj(f)-factor is unit-independent inside the ball
    and localizes to a single coset outside it, so only the H0 tables and
    the w_t(u_t)-weight enter; the b2-branch does not arise for the
    configurations exercised with proper U1 (spherical sigma, ball inside
    the region where all x-translates stay in K).
    """
    if not isinstance(piece, ConstBall):
        raise NotImplementedError("proper U1 supported for ball data only")
    if b2 != 0:
        raise NotImplementedError("proper U1 supported on the b1-branch only")
    w_t = chi_t.unit_part
    floor = _h0_support_floor(w_t, u1)
    R, val = piece.radius_exp, np.conj(piece.value)
    out = np.zeros(len(ux), dtype=np.complex128)
    if not _on_support_shell(p, piece, rx):
        jays = [ry - rx]
    else:
        jays = list(range(floor - 1, ry - R + 1))
    for j in jays:
        vs = ry - j
        dt = max(w_t.cond, -j, u1.depth, 1) + 1
        ut = unit_reps(p, dt)
        wt_vals = w_t.values_on(ut, dt)
        if _on_support_shell(p, piece, rx):
            if vs < R:
                continue
            fb = np.full((len(ux), len(ut)), val, dtype=np.complex128)
        else:
            # s = y/t must cancel x: u_y u_t^{-1} = -u_x mod p^{R-rx}; the
            # average over the y-unit turns the indicator into its measure
            h = R - rx
            frac = 1.0 / len(unit_reps(p, h))
            fb = np.full((len(ux), len(ut)), val * frac, dtype=np.complex128)
        h1 = _h0_vector(w_t, u1, j, ut, p)
        out += (
            (1 - 1 / p)
            * chi_t.at_p**j
            * (fb * (b1 * h1[None, :]) * wt_vals[None, :]).mean(axis=1)
        )
    return out


def _h0_vector(w_t, u1, j, ut, p) -> np.ndarray:
    if j < _h0_support_floor(w_t, u1):
        return np.zeros(len(ut), dtype=np.complex128)
    tab = _h0_shell_table(w_t, u1.depth, j)
    dH = max(w_t.cond, -j, 1)
    return tab[ut % p**dH]


# ---------------------------------------------------------------------------
# the constant c and the theorem reports
# ---------------------------------------------------------------------------


def rs_constant_c(chi1: MultCharacter, chi2: MultCharacter) -> complex:
    """c = q^{N/2} int chi1 chi2^{-1}(t) psi(t) dt/|t|, |c| = 1.

    The integrand vanishes off the shell v(t) = -N, so the integral is a
    single Gauss average times the shell volume (1 - 1/q).
    """
    chi_t = chi1.ratio(chi2)
    n = chi_t.cond
    if n < 1:
        raise ValueError("needs c(chi1/chi2) >= 1")
    p = chi1.prime
    g = _gauss_mean(chi_t.unit_part, -n, sign=1)
    c = float(p) ** (n / 2) * (1 - 1 / p) * chi_t.at_p ** (-n) * g
    assert abs(abs(c) - 1.0) < 1e-10, f"|c| = {abs(c)} should be 1"
    return c


def whittaker_kirillov_integral(W1, tail: int = 300) -> complex:
    """int_{k^x} W1(y) d^x y via the Kirillov expansion."""
    if isinstance(W1, KirillovCompact):
        return W1.integral_kirillov()
    return W1.integral_kirillov(tail)


@dataclass
class RSReport:
    """One verification record, JSON-ready via vars()."""

    experiment: str
    config: dict
    lhs: complex
    rhs: complex
    ratio: Optional[complex]
    abs_error: float
    passed: Optional[bool]
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def enc(z):
            if isinstance(z, complex):
                return [z.real, z.imag]
            return z

        return {
            "experiment": self.experiment,
            "config": self.config,
            "lhs": enc(self.lhs),
            "rhs": enc(self.rhs),
            "ratio": enc(self.ratio) if self.ratio is not None else None,
            "abs_error": self.abs_error,
            "pass": self.passed,
            "details": {k: enc(v) for k, v in self.details.items()},
        }


def _microlocal_pair(p: int, n: int, seed_angles=(1, 1)) -> PrincipalSeries:
    """A principal series with c(chi1/chi2) = n: chi1 unramified, chi2 of
    conductor n, with deterministic at-p angles."""
    a1, a2 = seed_angles
    chi1 = MultCharacter.unramified(p, Fraction(a1, 7))
    if p == 2 and n == 1:
        raise ValueError("p = 2 has no conductor-1 characters")
    chi2 = MultCharacter.from_angles(
        p, n, _primitive_angle(p, n), at_p_angle=Fraction(a2, 9)
    )
    return PrincipalSeries(chi1, chi2)


def _primitive_angle(p: int, c: int) -> Fraction:
    """Angle giving exact conductor c on the standard generator."""
    if c == 0:
        return Fraction(0)
    if p == 2:
        if c < 2:
            raise ValueError("p=2 conductors are 0 or >= 2")
        if c == 2:
            return Fraction(0)  # the minus part carries the ramification
        return Fraction(1, 2 ** (c - 2))
    return Fraction(1, (p - 1) * p ** (c - 1))


def _conductor_c_char(p: int, c: int, at_p=Fraction(0)) -> MultCharacter:
    if p == 2 and c == 2:
        return MultCharacter.from_angles(p, 2, Fraction(0), at_p, Fraction(1, 2))
    return MultCharacter.from_angles(p, c, _primitive_angle(p, c), at_p)


def verify_local_rs_I(
    p: int,
    chi1: MultCharacter,
    chi2: MultCharacter,
    satake: complex,
    tol: float = 1e-8,
) -> RSReport:
    """lhs = ell_RS(W1, conj W_v, v) against rhs = c q^{-N/2} ||v||^2 int W1."""
    rep = PrincipalSeries(chi1, chi2)
    n = rep.ratio_cond
    W1 = SphericalWhittaker(p, satake)
    v = build_microlocal(rep, 1)
    lhs = ell_RS(W1, v, v)
    c = rs_constant_c(chi1, chi2)
    rhs = c * float(p) ** (-n / 2) * v.norm_sq() * whittaker_kirillov_integral(W1)
    err = abs(lhs - rhs)
    ratio = lhs / rhs if rhs != 0 else None
    return RSReport(
        "local-rs-I",
        {"p": p, "N": n, "satake": [satake.real, satake.imag]},
        lhs,
        rhs,
        ratio,
        err,
        err < tol * max(1.0, abs(rhs)),
        {"c": c, "norm_sq": v.norm_sq()},
    )


def verify_local_rs_II(
    p: int,
    chi1: MultCharacter,
    chi2: MultCharacter,
    satake: complex,
    supports: Optional[list[tuple[int, int]]] = None,
    tol: float = 1e-8,
) -> RSReport:
    """Normalized ratios |ell_RS| q^{N/2} / ||v'||^2 across newvector supports."""
    rep = PrincipalSeries(chi1, chi2)
    n = rep.ratio_cond
    c_pi = rep.log_conductor
    W1 = SphericalWhittaker(p, satake)
    if supports is None:
        supports = [(-c_pi + s, s) for s in range(0, c_pi + 1)]
    table = {}
    for m, mp in supports:
        v = build_newvector(rep, m, mp)
        val = ell_RS(W1, v, v)
        ratio = abs(val) * float(p) ** (n / 2) / v.norm_sq()
        table[f"{m}..{mp}"] = ratio
    sup = max(table.values())
    return RSReport(
        "local-rs-II",
        {"p": p, "N": n, "c_pi": c_pi, "satake": [satake.real, satake.imag]},
        sup,
        0.0,
        None,
        0.0,
        math.isfinite(sup),
        {"ratios": table, "sup": sup},
    )


def verify_local_rs_III(
    p: int, n: int, satake: complex, tol: float = 1e-8,
    at_p_angle: Fraction = Fraction(1, 5),
) -> RSReport:
    """Microlocal vs balanced-newvector equality for chi2 = chi1^{-1}.

    For p = 2 the equality is expected to fail; the report carries the
    observed discrepancy with the expected-failure tag instead of a pass.
    Squaring drops conductors at p = 2 (c(chi^2) = c(chi) - 1 for
    c(chi) >= 4 and kills everything shallower), so the p = 2 run uses
    the nearest configuration with a nonzero microlocal level.
    """
    if p == 2:
        chi1 = _conductor_c_char(2, max(n, 2) + 2, at_p_angle)
    else:
        chi1 = _conductor_c_char(p, n, at_p_angle)
    chi2 = chi1.inverse()
    rep = PrincipalSeries(chi1, chi2)
    W1 = SphericalWhittaker(p, satake)
    v = build_microlocal(rep, 1).normalized()
    half = rep.log_conductor // 2  # balanced support, = c(chi1)
    vp = build_newvector(rep, -half, half)
    lhs = ell_RS(W1, v, v)
    rhs = ell_RS(W1, vp, vp)
    err = abs(lhs - rhs)
    expected_failure = p == 2
    passed = None if expected_failure else err < tol * max(1.0, abs(rhs))
    return RSReport(
        "local-rs-III",
        {"p": p, "N": rep.ratio_cond, "satake": [satake.real, satake.imag]},
        lhs,
        rhs,
        lhs / rhs if rhs != 0 else None,
        err,
        passed,
        {
            "expected_failure": expected_failure,
            "discrepancy": err,
            "norms": [v.norm_sq(), vp.norm_sq()],
        },
    )


def mv_epic_identity_check(
    p: int,
    chi1: MultCharacter,
    chi2: MultCharacter,
    satake: complex,
    tol: float = 1e-8,
) -> RSReport:
    """Matrix-coefficient identity via the squared-modulus route.

    lhs* = |ell_RS(W1, conj W_v, v)|^2 q^N and
    rhs* = ||v||^4 * int <a(y) v1, v1> d^x y with v1 the unit Kirillov
    vector; their ratio is the positive constant of the identity.
    """
    rep = PrincipalSeries(chi1, chi2)
    n = rep.ratio_cond
    sigma = SphericalWhittaker(p, satake)
    v1 = KirillovCompact(sigma, {0: 1.0})
    v = build_microlocal(rep, 1)
    ell = ell_RS(v1, v, v)
    lhs = abs(ell) ** 2 * float(p) ** n
    # int <a(y) v1, v1> d^x y = |sum of Kirillov data|^2 by Fubini
    grid_int = 0.0
    for r in range(-6, 7):
        grid_int += sum(
            v1.kirillov(m + r) * np.conj(v1.kirillov(m)) for m in range(-6, 7)
        )
    rhs = v.norm_sq() ** 2 * abs(grid_int)
    ratio = lhs / rhs if rhs != 0 else None
    return RSReport(
        "mv-epic",
        {"p": p, "N": n, "satake": [satake.real, satake.imag]},
        lhs,
        rhs,
        ratio,
        abs(lhs - rhs),
        ratio is not None and ratio > 0,
        {"constant": ratio},
    )

