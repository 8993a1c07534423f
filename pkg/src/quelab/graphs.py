"""Non-backtracking path spaces over Brandt graphs and their Hecke theory.

A path class of length L is an equivalence class of chains
I_0 > I_1 > ... > I_L of right ideals with p-neighbor steps and no
immediate reversal (I_{k+1} != p I_{k-1}).  Chains carry exact lattice
data, so Hecke operators at primes l != p act by simultaneous l-neighbor
moves and all operator identities hold over the integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .quaternion import (
    MaximalOrder,
    RightIdeal,
    chain_stabilizer_size,
    chains_equivalent,
    ideal_classes,
    lattice_intersection,
    maximal_order,
    p_neighbors,
    scale_ideal,
)

__all__ = [
    "PathSpace",
    "build_path_space",
    "hecke_on_paths",
    "shift_operators",
    "SpectralData",
    "joint_eigenbasis",
    "generalized_newvectors",
    "MassMeasure",
    "mass_pushforward",
    "discrepancy",
    "PathSpaceContext",
]

PATH_SPACE_CAP = 100_000


class PathSpaceTooLarge(RuntimeError):
    pass


class ChainClassificationError(RuntimeError):
    """A translated chain matched no stored class: equivalence-test bug."""


@dataclass
class PathSpaceContext:
    """Shared data for all path spaces over one (disc, p)."""

    order: MaximalOrder
    prime: int
    _spaces: dict = field(default_factory=dict)

    def space(self, length: int) -> "PathSpace":
        if length not in self._spaces:
            if length == 0:
                self._spaces[0] = _base_space(self)
            else:
                self._spaces[length] = _extend_space(self.space(length - 1))
        return self._spaces[length]


@dataclass
class PathSpace:
    """Length-L non-backtracking path classes with chain representatives.

    The same storage serves every interval m..m' with m' - m = L (the
    a(p)-shift identifies them); interval bookkeeping happens at the
    experiment layer.
    """

    ctx: PathSpaceContext
    length: int
    chains: list[list[RightIdeal]]
    stab_units: list[int]              # chain stabilizer orders (with -1)
    parent_last: list[int]             # class after dropping the last ideal
    parent_first: list[int]            # class after dropping the first ideal
    ext_last: list[list[int]]          # classes of one-step extensions at the end
    ext_first: list[list[int]]         # classes of one-step extensions in front

    @property
    def size(self) -> int:
        return len(self.chains)

    def weights(self) -> np.ndarray:
        """w_x = #stab/2 (so w = 1 exactly in the torsion-free case)."""
        return np.array([u / 2 for u in self.stab_units], dtype=np.float64)

    def mass_vector(self) -> np.ndarray:
        """Uniform probability measure: mu(x) proportional to 1/w_x."""
        inv = np.array([2.0 / u for u in self.stab_units])
        return inv / inv.sum()

    def weighted_count(self) -> Fraction:
        """sum_x 1/w_x, the groupoid count of the space."""
        return sum(Fraction(2, u) for u in self.stab_units)

    def classify(self, chain: list[RightIdeal]) -> int:
        key = tuple(i.theta_prefix() for i in chain)
        for idx, rep in enumerate(self.chains):
            if self._keys[idx] != key:
                continue
            if chains_equivalent(chain, rep) is not None:
                return idx
        raise ChainClassificationError("chain matched no stored class")

    def __post_init__(self):
        self._keys = [tuple(i.theta_prefix() for i in ch) for ch in self.chains]


def _base_space(ctx: PathSpaceContext) -> PathSpace:
    classes = ideal_classes(ctx.order, ctx.prime)
    chains = [[c.ideal] for c in classes]
    stab = [c.units for c in classes]
    sp = PathSpace(ctx, 0, chains, stab, [], [], [], [])
    _fill_extensions(sp)
    return sp


def _fill_extensions(sp: PathSpace):
    p = sp.ctx.prime
    ups: list[list[RightIdeal]] = []
    for ch in sp.chains:
        exts = []
        for J in p_neighbors(ch[-1], p):
            if sp.length >= 1 and _same_lattice(J, scale_ideal(ch[-2], Fraction(p))):
                continue  # backtracking
            exts.append(ch + [J])
        ups.append(exts)
    sp._raw_ext_last = ups
    fronts: list[list[RightIdeal]] = []
    for ch in sp.chains:
        exts = []
        for J in p_neighbors(ch[0], p):
            K = scale_ideal(J, Fraction(1, p))
            if sp.length >= 1 and _same_lattice(ch[1], J):
                continue  # backtracking in front: K's forward step repeats
            exts.append([K] + ch)
        fronts.append(exts)
    sp._raw_ext_first = fronts


def _same_lattice(a: RightIdeal, b: RightIdeal) -> bool:
    # literal row data may differ in presentation; compare mathematically
    if a.index_in_order() != b.index_in_order():
        return False
    return all(a.contains_coords(r) for r in b.basis_coords())


def _extend_space(prev: PathSpace) -> PathSpace:
    ctx = prev.ctx
    p = ctx.prime
    chains: list[list[RightIdeal]] = []
    keys: list[tuple] = []
    stab: list[int] = []
    parent_last: list[int] = []
    ext_last_of_prev: list[list[int]] = [[] for _ in prev.chains]
    for ci, exts in enumerate(prev._raw_ext_last):
        for ch in exts:
            key = tuple(i.theta_prefix() for i in ch)
            idx = None
            for k, (rk, rc) in enumerate(zip(keys, chains)):
                if rk == key and chains_equivalent(ch, rc) is not None:
                    idx = k
                    break
            if idx is None:
                idx = len(chains)
                chains.append(ch)
                keys.append(key)
                stab.append(chain_stabilizer_size(ch))
                parent_last.append(ci)
                if len(chains) > PATH_SPACE_CAP:
                    raise PathSpaceTooLarge(f"more than {PATH_SPACE_CAP} paths")
            ext_last_of_prev[ci].append(idx)
    sp = PathSpace(ctx, prev.length + 1, chains, stab, parent_last, [], [], [])
    prev.ext_last = ext_last_of_prev
    # parent_first: drop the first ideal and classify in prev
    sp.parent_first = [prev.classify(ch[1:]) for ch in chains]
    # front extensions of prev chains, classified in sp
    ext_first_of_prev: list[list[int]] = []
    for exts in prev._raw_ext_first:
        ext_first_of_prev.append([sp.classify(ch) for ch in exts])
    prev.ext_first = ext_first_of_prev
    _fill_extensions(sp)
    # groupoid count check: mass multiplies by (p+1) p^{L-1}
    expected = prev.weighted_count() * (p + 1 if prev.length == 0 else p)
    assert sp.weighted_count() == expected, "weighted path count mismatch"
    return sp


def build_path_space(ctx: PathSpaceContext, m: int, mp: int) -> PathSpace:
    """Complete enumeration of Y_{m..m'} (storage depends only on m' - m)."""
    if m > mp:
        raise ValueError("need m <= m'")
    return ctx.space(mp - m)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def hecke_on_paths(sp: PathSpace, ell: int) -> np.ndarray:
    """T_ell acting on functions: (T f)(x) = sum over the ell+1 moves.

    Each move intersects the whole chain with an ell-neighbor of the top
    ideal; l coprime to p acts uniformly along the p-power chain.
    """
    ctx = sp.ctx
    if ell == ctx.prime or ctx.order.alg.disc % ell == 0:
        raise ValueError("ell must be coprime to p and the discriminant")
    key = ("hecke", ell)
    cache = ctx.__dict__.setdefault("_op_cache", {})
    if (sp.length, ell) in cache.get("hecke", {}):
        return cache["hecke"][(sp.length, ell)]
    h = sp.size
    M = np.zeros((h, h), dtype=np.int64)
    for xi, ch in enumerate(sp.chains):
        for lam in p_neighbors(ch[0], ell):
            moved = [_intersect_ideal(I, lam) for I in ch]
            yi = sp.classify(moved)
            M[xi, yi] += 1
    cache.setdefault("hecke", {})[(sp.length, ell)] = M
    return M


def _intersect_ideal(I: RightIdeal, lam: RightIdeal) -> RightIdeal:
    """Exact lattice intersection, preserving scale (no content stripping:
    chain members must keep their relative norms)."""
    from .quaternion import hnf

    rows = lattice_intersection(I.basis_coords(), lam.basis_coords())
    den = 1
    for row in rows:
        for c in row:
            den = den * c.denominator // math.gcd(den, c.denominator)
    irows = hnf([[int(c * den) for c in row] for row in rows])
    return RightIdeal(I.order, tuple(tuple(r) for r in irows), den)


def shift_operators(sp: PathSpace) -> tuple[np.ndarray, np.ndarray]:
    """(shift, unshift) as matrices on functions of the path classes.

    shift   = (push along drop-first) o (pull along drop-last),
    unshift = (push along drop-last) o (pull along drop-first);
    both need the length-(L+1) space, built on demand.
    """
    up = sp.ctx.space(sp.length + 1)
    h = sp.size
    S = np.zeros((h, h), dtype=np.int64)
    U = np.zeros((h, h), dtype=np.int64)
    for y in range(h):
        for xt in sp.ext_first[y]:
            S[y, up.parent_last[xt]] += 1
        for xt in sp.ext_last[y]:
            U[y, up.parent_first[xt]] += 1
    return S, U


def projection_map(ctx: PathSpaceContext, length: int, target: int) -> np.ndarray:
    """Class map Y_(length) -> Y_(target) dropping (length-target)/2 ideals
    from each end (symmetric-interval projection); length-target even."""
    if (length - target) % 2:
        raise ValueError("symmetric projection needs even length difference")
    idx = np.arange(ctx.space(length).size)
    cur = length
    while cur > target:
        sp = ctx.space(cur)
        idx = np.array([sp.parent_first[i] for i in idx])
        cur -= 1
        spp = ctx.space(cur)
        idx = np.array([spp.parent_last[i] for i in idx])
        cur -= 1
    return idx


# ---------------------------------------------------------------------------
# spectral data
# ---------------------------------------------------------------------------


@dataclass
class SpectralData:
    space: PathSpace
    primes: list[int]
    vectors: np.ndarray          # columns: weighted-orthonormal eigenbasis
    eigenvalues: dict[int, np.ndarray]  # per prime, per column
    residual: float

    def normalized_eigenvalue(self, ell: int, col: int) -> float:
        return float(self.eigenvalues[ell][col]) / math.sqrt(ell)


def joint_eigenbasis(
    sp: PathSpace, primes: list[int], seed: int = 20140615, cluster_tol: float = 1e-6
) -> SpectralData:
    """Weighted-orthonormal joint eigenbasis of the T_ell operators.

    The operators are conjugated by sqrt(mu) to symmetric matrices,
    jointly diagonalized through a seeded random combination, and refined
    per operator inside eigenvalue clusters.
    """
    mats = [hecke_on_paths(sp, l) for l in primes]
    for A, B in zip(mats, mats[1:]):
        if not (A @ B == B @ A).all():
            raise ArithmeticError("Hecke operators fail to commute exactly")
    mu = sp.mass_vector()
    d = np.sqrt(mu)
    syms = []
    for A in mats:
        S = d[:, None] * A.astype(float) * (1.0 / d)[None, :]
        if not np.allclose(S, S.T, atol=1e-10):
            raise ArithmeticError("weighted symmetrization failed (nonnormal input)")
        syms.append((S + S.T) / 2)
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=len(syms))
    _, V = np.linalg.eigh(sum(c * S for c, S in zip(coeffs, syms)))
    # refine inside clusters per operator
    for S in syms:
        V = _refine_within_clusters(V, S, cluster_tol)
    eigs = {}
    resid = 0.0
    for l, S in zip(primes, syms):
        lam = np.einsum("ij,jk,ik->k", S, V, V)
        eigs[l] = lam
        r = np.linalg.norm(S @ V - V * lam[None, :])
        resid = max(resid, r / max(np.linalg.norm(S), 1e-30))
    if resid > 1e-9:
        raise ArithmeticError(f"spectral residual {resid} too large")
    return SpectralData(sp, list(primes), V, eigs, resid)


def _refine_within_clusters(V, S, tol):
    lam = np.einsum("ij,jk,ik->k", S, V, V)
    order = np.argsort(lam)
    V = V[:, order]
    lam = lam[order]
    out = V.copy()
    i = 0
    n = len(lam)
    while i < n:
        j = i
        while j + 1 < n and lam[j + 1] - lam[j] < tol:
            j += 1
        if j > i:
            block = V[:, i : j + 1]
            sub = block.T @ S @ block
            _, W = np.linalg.eigh((sub + sub.T) / 2)
            out[:, i : j + 1] = block @ W
        i = j + 1
    return out


def pullback_rank_data(sp: PathSpace):
    """Orthonormal basis (symmetrized coords) of the two pullback images."""
    mu = sp.mass_vector()
    d = np.sqrt(mu)
    prev = sp.ctx.space(sp.length - 1)
    P_last = np.zeros((sp.size, prev.size))
    P_first = np.zeros((sp.size, prev.size))
    for x in range(sp.size):
        P_last[x, sp.parent_last[x]] = 1.0
        P_first[x, sp.parent_first[x]] = 1.0
    cols = np.concatenate([d[:, None] * P_last, d[:, None] * P_first], axis=1)
    q, r = np.linalg.qr(cols)
    keep = np.abs(np.diag(r)) > 1e-10
    return q[:, : int(keep.sum())] if keep.all() else _col_space(cols)


def _col_space(cols):
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    return u[:, s > 1e-10]


def generalized_newvectors(
    sp: PathSpace, primes: list[int], tol: float = 1e-9
) -> tuple[SpectralData, list[dict]]:
    """Joint-eigenfunction families orthogonal to both pullback subspaces.

    Old and new directions are separated inside each joint-eigenvalue
    cluster (old representations occur with multiplicity > 1 across
    levels); each family carries its Hecke eigenvalue list and
    weighted-orthonormal new vectors.  The count is checked against the
    rank of the pullback span.
    """
    spec = joint_eigenbasis(sp, primes)
    if sp.length == 0:
        fams = [
            {"eigenvalues": {l: float(spec.eigenvalues[l][k]) for l in primes},
             "vectors": spec.vectors[:, [k]]}
            for k in range(sp.size)
        ]
        return spec, fams
    basis = pullback_rank_data(sp)
    # cluster columns by the joint eigenvalue tuple
    keys = []
    for k in range(sp.size):
        keys.append(tuple(round(float(spec.eigenvalues[l][k]), 6) for l in primes))
    clusters: dict[tuple, list[int]] = {}
    for k, key in enumerate(keys):
        clusters.setdefault(key, []).append(k)
    families = []
    total_new = 0
    for key, cols in sorted(clusters.items()):
        block = spec.vectors[:, cols]
        proj = block - basis @ (basis.T @ block)
        u, s, _ = np.linalg.svd(proj, full_matrices=False)
        keep = s > 0.5
        # directions must split cleanly into old (s ~ 0) and new (s ~ 1)
        if ((s > tol * 10) & (s < 1 - 1e-6)).any():
            raise ArithmeticError(
                "cluster does not split into old/new; extend the prime list"
            )
        nnew = int(keep.sum())
        if nnew:
            vecs = u[:, :nnew]
            families.append(
                {
                    "eigenvalues": {l: float(np.mean(spec.eigenvalues[l][cols]))
                                    for l in primes},
                    "vectors": vecs,
                }
            )
            total_new += nnew
        # orthogonality certificate
        if nnew and np.abs(basis.T @ u[:, :nnew]).max() > 1e-9:
            raise ArithmeticError("newvector not orthogonal to pullbacks")
    expected = sp.size - int(basis.shape[1])
    if total_new != expected:
        raise ArithmeticError(
            f"newvector count {total_new} != complement dimension {expected}"
        )
    return spec, families


def pullback_span_rank(sp: PathSpace) -> int:
    return int(pullback_rank_data(sp).shape[1])


# ---------------------------------------------------------------------------
# mass measures
# ---------------------------------------------------------------------------


@dataclass
class MassMeasure:
    space: PathSpace
    weights: np.ndarray  # probability vector over path classes

    def __post_init__(self):
        total = float(self.weights.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"measure has total mass {total}")

    def total(self) -> float:
        return float(self.weights.sum())


def mass_pushforward(
    phi: np.ndarray, spec_space: PathSpace, target_length: int
) -> MassMeasure:
    """Pushforward of the L^2-mass |phi|^2 d(uniform) to a coarser space.

    phi must be unit-normalized in the weighted norm; the result is a
    probability measure on the target path space.
    """
    mu = spec_space.mass_vector()
    dens = np.abs(phi) ** 2 * mu
    if abs(dens.sum() - 1.0) > 1e-9:
        raise ValueError("phi is not L^2-normalized for the uniform measure")
    idx = projection_map(spec_space.ctx, spec_space.length, target_length)
    tgt = spec_space.ctx.space(target_length)
    out = np.zeros(tgt.size)
    np.add.at(out, idx, dens)
    out /= out.sum()
    return MassMeasure(tgt, out)


def discrepancy(measure: MassMeasure) -> tuple[float, float]:
    """(total variation, sup over singletons) against the uniform measure."""
    u = measure.space.mass_vector()
    diff = measure.weights - u
    return 0.5 * float(np.abs(diff).sum()), float(np.abs(diff).max())
