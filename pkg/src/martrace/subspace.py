"""Subspaces W of V (x) R^ell and their rank-one geometry.

An element of R^m (x) R^ell is an ``(m, ell)`` array; flattened it is indexed
``j * ell + c``.  Row ``j`` is the value on the ``j``-th kid.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog
from scipy.special import logsumexp

MEMBERSHIP_TOL = 1e-9
ADMISSIBLE_TOL = 1e-9


class SubspaceError(ValueError):
    pass


def mean_zero_basis(m: int) -> np.ndarray:
    """Orthonormal basis of V = {v in R^m : sum v = 0}, shape ``(m - 1, m)``."""
    return null_space(np.ones((1, m))).T


@dataclass(frozen=True, eq=False)
class Subspace:
    """A subspace W of V (x) R^ell stored as an orthonormal basis.

    ``complex_structure`` marks spaces that are realifications of complex
    subspaces of V (x) C^l (ell = 2l, coordinates interleaved Re/Im); for
    those, proportionality in the non-locality test is over C.
    """

    m: int
    ell: int
    basis: np.ndarray = field(repr=False)
    complex_structure: bool = False
    name: str = ""

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float).reshape(-1, self.m * self.ell)
        object.__setattr__(self, "basis", b)
        b.flags.writeable = False
        if b.shape[0]:
            gram = b @ b.T
            if np.max(np.abs(gram - np.eye(b.shape[0]))) > 1e-10:
                raise SubspaceError("basis is not orthonormal")
            means = b.reshape(-1, self.m, self.ell).mean(axis=1)
            if np.max(np.abs(means)) > 1e-12:
                raise SubspaceError("basis elements must have zero column means")
        if self.complex_structure:
            if self.ell % 2:
                raise SubspaceError("complex structure needs even ell")
            jb = apply_j(b.reshape(-1, self.m, self.ell)).reshape(b.shape)
            if b.shape[0] and np.max(np.linalg.norm(jb - jb @ b.T @ b, axis=1)) > 1e-9:
                raise SubspaceError("space is not invariant under multiplication by i")

    @classmethod
    def from_spanning(
        cls,
        m: int,
        ell: int,
        vectors,
        complex_structure: bool = False,
        name: str = "",
        rtol: float = 1e-10,
    ) -> "Subspace":
        vec = np.asarray(vectors, dtype=float).reshape(-1, m * ell)
        # strip column means so that the span sits inside V (x) R^ell
        vec = (vec.reshape(-1, m, ell) - vec.reshape(-1, m, ell).mean(axis=1, keepdims=True)).reshape(
            -1, m * ell
        )
        if vec.shape[0] == 0:
            return cls(m, ell, np.zeros((0, m * ell)), complex_structure, name)
        _, s, vt = np.linalg.svd(vec, full_matrices=False)
        rank = int(np.sum(s > rtol * max(s[0], 1e-300))) if s.size and s[0] > 0 else 0
        return cls(m, ell, vt[:rank], complex_structure, name)

    @classmethod
    def full(cls, m: int, ell: int = 1, name: str = "") -> "Subspace":
        vb = mean_zero_basis(m)
        basis = np.einsum("ij,cd->icjd", vb, np.eye(ell)).reshape(-1, m * ell)
        return cls(m, ell, basis, False, name or f"full:m={m},ell={ell}")

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def size(self) -> int:
        return self.m * self.ell

    @cached_property
    def projector(self) -> np.ndarray:
        p = self.basis.T @ self.basis
        p.flags.writeable = False
        return p

    @cached_property
    def complement(self) -> np.ndarray:
        """Projector onto the orthogonal complement of W in R^{m ell}."""
        q = np.eye(self.size) - self.projector
        q.flags.writeable = False
        return q

    def project(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        flat = w.reshape(*w.shape[: w.ndim - (2 if w.shape[-2:] == (self.m, self.ell) else 1)], -1)
        out = (flat @ self.basis.T) @ self.basis
        return out.reshape(w.shape)

    def residual(self, w) -> np.ndarray:
        """Relative distance from W (batched over leading axes)."""
        w = np.asarray(w, dtype=float)
        flat = w.reshape(-1, self.size)
        res = flat - (flat @ self.basis.T) @ self.basis
        num = np.linalg.norm(res, axis=1)
        den = np.maximum(np.linalg.norm(flat, axis=1), 1.0)
        lead = w.shape[: w.ndim - (2 if w.shape[-2:] == (self.m, self.ell) else 1)]
        return (num / den).reshape(lead)

    def contains(self, w, tol: float = MEMBERSHIP_TOL) -> bool:
        return bool(np.all(self.residual(w) < tol))

    def random_element(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Uniform direction on the unit sphere of W, shape ``(..., m, ell)``."""
        n = 1 if size is None else size
        c = rng.standard_normal((n, self.dim))
        c /= np.maximum(np.linalg.norm(c, axis=1, keepdims=True), 1e-300)
        w = (c @ self.basis).reshape(n, self.m, self.ell)
        return w[0] if size is None else w

    def describe(self) -> str:
        return self.name or f"subspace(m={self.m},ell={self.ell},dim={self.dim})"


def apply_j(w: np.ndarray) -> np.ndarray:
    """Multiplication by i under the interleaved (Re, Im) identification."""
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    out[..., 0::2] = -w[..., 1::2]
    out[..., 1::2] = w[..., 0::2]
    return out


def tensor(v, a) -> np.ndarray:
    return np.outer(np.asarray(v, dtype=float), np.asarray(a, dtype=float))


# ---------------------------------------------------------------------------
# rank-one admissibility


def _rank_one_map(v: np.ndarray, ell: int) -> np.ndarray:
    """Matrix of a -> v (x) a, shape ``(m ell, ell)``."""
    return np.kron(v[:, None], np.eye(ell))


def admissible_directions(v, W: Subspace, tol: float = ADMISSIBLE_TOL) -> np.ndarray:
    """Orthonormal basis (rows) of {a : v (x) a in W}."""
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if nv == 0:
        return np.eye(W.ell)
    r = W.complement @ _rank_one_map(v / nv, W.ell)
    _, s, vt = np.linalg.svd(r)
    return vt[s <= tol]


def is_rank_one_admissible(v, W: Subspace, tol: float = ADMISSIBLE_TOL) -> np.ndarray | None:
    """A unit direction ``a`` with ``v (x) a`` in W, or None."""
    v = np.asarray(v, dtype=float)
    if abs(v.sum()) > 1e-9 * max(1.0, np.abs(v).sum()):
        raise SubspaceError("v must have zero mean")
    dirs = admissible_directions(v, W, tol)
    if dirs.shape[0] == 0:
        return None
    a = dirs[0]
    # fix the sign so the largest coordinate is positive
    k = int(np.argmax(np.abs(a)))
    return a if a[k] > 0 else -a


def batch_rank_one_defect(vs: np.ndarray, W: Subspace) -> np.ndarray:
    """Smallest singular value of a -> (I - P)(v (x) a) for each row of ``vs``.

    Rows are normalized first, so the value is a relative residual.
    """
    vs = np.asarray(vs, dtype=float)
    norms = np.linalg.norm(vs, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    u = vs / safe[:, None]
    m, ell = W.m, W.ell
    q = W.complement.reshape(m, ell, m, ell)
    if ell == 1:
        g = np.einsum("bj,jk,bk->b", u, q[:, 0, :, 0], u)
        lam = g
    else:
        g = np.einsum("bj,jckd,bk->bcd", u, q, u)
        lam = np.linalg.eigvalsh(g)[:, 0]
    out = np.sqrt(np.maximum(lam, 0.0))
    out[norms == 0] = 0.0
    return out


# ---------------------------------------------------------------------------
# kappa functions


def kappa_v(v, theta: float) -> float:
    """log of the L_{1/theta} norm of 1 + v for the uniform measure on [1..m]."""
    if not 0.0 <= theta <= 1.0:
        raise SubspaceError(f"theta must lie in [0, 1], got {theta}")
    u = np.abs(1.0 + np.asarray(v, dtype=float))
    if theta == 0.0:
        return float(np.log(u.max()))
    with np.errstate(divide="ignore"):
        lu = np.log(u)
    return float(theta * (logsumexp(lu / theta) - np.log(u.size)))


def kappa_v_batch(vs: np.ndarray, theta: float) -> np.ndarray:
    u = np.abs(1.0 + np.asarray(vs, dtype=float))
    if theta == 0.0:
        return np.log(u.max(axis=1))
    with np.errstate(divide="ignore"):
        lu = np.log(u)
    return theta * (logsumexp(lu / theta, axis=1) - np.log(u.shape[1]))


def entropy(vs) -> np.ndarray:
    """avg (1+v) log(1+v), with 0 log 0 = 0; batched over rows."""
    u = 1.0 + np.atleast_2d(np.asarray(vs, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)
    return t.mean(axis=1)


@dataclass(eq=False)
class AdmissibleFamily:
    """Linear family {v in V : v (x) a in W} for one admissible direction a."""

    direction: np.ndarray
    vbasis: np.ndarray
    vertices: np.ndarray

    @property
    def dim(self) -> int:
        return self.vbasis.shape[0]


def _family_space(a: np.ndarray, W: Subspace, vb: np.ndarray, tol: float) -> np.ndarray:
    r = W.complement @ np.kron(vb.T, a[:, None])
    _, s, vt = np.linalg.svd(r)
    s = np.concatenate([s, np.zeros(vt.shape[0] - s.size)])
    coeffs = vt[s <= tol]
    return coeffs @ vb


def polytope_vertices(B: np.ndarray, limit: int = 400_000, rng=None) -> np.ndarray:
    """Vertices of {v = c @ B : v_j >= -1} for an orthonormal ``B`` of shape (k, m)."""
    k, m = B.shape
    if k == 0:
        return np.zeros((1, m))
    cols = B.T  # (m, k)
    verts = []
    n_comb = math.comb(m, k)
    if n_comb <= limit:
        for S in itertools.combinations(range(m), k):
            A = cols[list(S)]
            if abs(np.linalg.det(A)) < 1e-10:
                continue
            c = np.linalg.solve(A, -np.ones(k))
            v = cols @ c
            if v.min() >= -1 - 1e-9:
                verts.append(v)
    else:
        # too many bases: collect vertices as LP optima for random objectives
        rng = rng or np.random.default_rng(0)
        for _ in range(4000):
            obj = rng.standard_normal(k)
            res = linprog(obj, A_ub=-cols, b_ub=np.ones(m), bounds=[(None, None)] * k, method="highs")
            if res.status == 0:
                verts.append(cols @ res.x)
    if not verts:
        return np.zeros((0, m))
    verts = np.array(verts)
    verts = np.maximum(verts, -1.0)
    _, idx = np.unique(np.round(verts, 9), axis=0, return_index=True)
    return verts[np.sort(idx)]


class RankOneAtlas:
    """Admissible families of W found by multistart alternating projection.

    Each start alternates between the best ``v`` for a fixed direction and the
    best direction for a fixed ``v`` (smallest singular vectors) until the
    residual of ``v (x) a`` vanishes.  The inner maximization of the convex
    functionals over a family is exact: it runs over the vertices of the
    polytope ``{v in V_a : v >= -1}``.
    """

    def __init__(self, W: Subspace, starts: int = 64, seed: int = 0, tol: float = ADMISSIBLE_TOL,
                 max_iter: int = 400, refine_rounds: int = 3):
        self.W = W
        self.tol = tol
        self.starts = starts
        self.seed = seed
        self.families: list[AdmissibleFamily] = []
        self._vb = mean_zero_basis(W.m)
        self._max_iter = max_iter
        rng = np.random.default_rng(seed)
        for a0 in self._initial_directions(rng):
            self._run(a0)
        for _ in range(refine_rounds):
            if not self._refine(rng):
                break

    def _initial_directions(self, rng) -> list[np.ndarray]:
        ell = self.W.ell
        eye = np.eye(ell)
        dirs = [eye[c] for c in range(ell)]
        for c1, c2 in itertools.combinations(range(ell), 2):
            dirs.append((eye[c1] + eye[c2]) / np.sqrt(2))
            dirs.append((eye[c1] - eye[c2]) / np.sqrt(2))
        for _ in range(self.starts):
            a = rng.standard_normal(ell)
            dirs.append(a / np.linalg.norm(a))
        return dirs

    def _run(self, a: np.ndarray) -> AdmissibleFamily | None:
        W, vb, ell = self.W, self._vb, self.W.ell
        v = None
        for _ in range(self._max_iter):
            r_a = W.complement @ np.kron(vb.T, a[:, None])
            _, s, vt = np.linalg.svd(r_a)
            s = np.concatenate([s, np.zeros(vt.shape[0] - s.size)])
            v = vt[-1] @ vb
            if s[-1] <= self.tol:
                return self._add(a)
            r_v = W.complement @ _rank_one_map(v, ell)
            _, s2, vt2 = np.linalg.svd(r_v)
            a_new = vt2[-1]
            if s2[-1] <= self.tol:
                return self._add(a_new)
            if np.linalg.norm(a_new - a) < 1e-14 or np.linalg.norm(a_new + a) < 1e-14:
                break
            a = a_new
        return None

    def _add(self, a: np.ndarray) -> AdmissibleFamily | None:
        space = _family_space(a, self.W, self._vb, self.tol)
        if space.shape[0] == 0:
            return None
        proj = space.T @ space
        for fam in self.families:
            if fam.dim == space.shape[0] and np.linalg.norm(fam.vbasis.T @ fam.vbasis - proj) < 1e-7:
                return fam
        fam = AdmissibleFamily(a, space, polytope_vertices(space))
        self.families.append(fam)
        return fam

    def _refine(self, rng) -> bool:
        """Perturb the directions of the best families and re-project."""
        before = len(self.families)
        for fam in list(self.families):
            for scale in (1e-1, 1e-2):
                a = fam.direction + scale * rng.standard_normal(self.W.ell)
                self._run(a / np.linalg.norm(a))
        return len(self.families) > before

    @property
    def degenerate(self) -> bool:
        return not any(np.abs(f.vertices).max(initial=0.0) > 1e-12 for f in self.families)

    def vertices(self) -> np.ndarray:
        if not self.families:
            return np.zeros((0, self.W.m))
        return np.concatenate([f.vertices for f in self.families])

    def kappa(self, theta: float) -> tuple[float, np.ndarray | None]:
        if not 0.0 <= theta <= 1.0:
            raise SubspaceError(f"theta must lie in [0, 1], got {theta}")
        verts = self.vertices()
        if verts.shape[0] == 0:
            return 0.0, None
        vals = kappa_v_batch(verts, theta)
        k = int(np.argmax(vals))
        return float(vals[k]), verts[k]

    def kappa_prime_one(self) -> tuple[float, np.ndarray | None]:
        verts = self.vertices()
        if verts.shape[0] == 0:
            return 0.0, None
        vals = -entropy(verts)
        k = int(np.argmin(vals))
        return float(vals[k]), verts[k]


_ATLAS_CACHE: dict[tuple, RankOneAtlas] = {}


def rank_one_atlas(W: Subspace, starts: int = 64, seed: int = 0) -> RankOneAtlas:
    key = (id(W), starts, seed)
    atlas = _ATLAS_CACHE.get(key)
    if atlas is None or atlas.W is not W:
        atlas = RankOneAtlas(W, starts=starts, seed=seed)
        _ATLAS_CACHE[key] = atlas
    return atlas


def kappa(W: Subspace, theta: float, starts: int = 64, seed: int = 0) -> float:
    """Supremum of kappa_v(theta) over the admissible 0-flat increments."""
    return rank_one_atlas(W, starts, seed).kappa(theta)[0]


def kappa_prime_one(W: Subspace, starts: int = 64, seed: int = 0) -> float:
    """Left derivative of kappa at 1: inf of -avg (1+v) log(1+v)."""
    atlas = rank_one_atlas(W, starts, seed)
    if atlas.degenerate:
        raise SubspaceError("no admissible rank-one increment besides v = 0")
    return atlas.kappa_prime_one()[0]


def kappa_prime_one_fd(W: Subspace, h: float = 1e-5, starts: int = 64, seed: int = 0) -> float:
    """Richardson-extrapolated one-sided difference of kappa at 1."""
    atlas = rank_one_atlas(W, starts, seed)
    d1 = -atlas.kappa(1.0 - h)[0] / h
    d2 = -atlas.kappa(1.0 - h / 2)[0] / (h / 2)
    return 2 * d2 - d1


def compositions(n: int, k: int) -> np.ndarray:
    """All k-tuples of nonnegative integers summing to n (lexicographic)."""
    if k == 1:
        return np.array([[n]], dtype=np.int32)
    blocks = []
    for first in range(n, -1, -1):
        rest = compositions(n - first, k - 1)
        blocks.append(np.concatenate([np.full((rest.shape[0], 1), first, np.int32), rest], axis=1))
    return np.concatenate(blocks)


def kappa_grid_oracle(W: Subspace, thetas: Sequence[float], step: float = 0.1,
                      tol: float = ADMISSIBLE_TOL, chunk: int = 200_000) -> dict:
    """Brute force over the lattice {v : v_j + 1 in step * Z_{>=0}, mean v = 0}.

    Returns the maximal kappa_v per theta and the minimal -entropy over the
    admissible lattice points.
    """
    m = W.m
    n = int(round(m / step))
    best = {float(t): -np.inf for t in thetas}
    best_entropy = np.inf
    n_adm = 0
    for first in range(n, -1, -1):
        rest = compositions(n - first, m - 1) if m > 1 else np.zeros((1, 0), np.int32)
        pts = np.concatenate([np.full((rest.shape[0], 1), first, np.int32), rest], axis=1)
        for lo in range(0, pts.shape[0], chunk):
            u = pts[lo : lo + chunk] * step
            vs = u - 1.0
            ok = batch_rank_one_defect(vs, W) <= max(tol, 1e-8)
            ok &= np.linalg.norm(vs, axis=1) > 1e-12
            if not ok.any():
                continue
            adm = vs[ok]
            n_adm += adm.shape[0]
            for t in best:
                best[t] = max(best[t], float(kappa_v_batch(adm, t).max()))
            best_entropy = min(best_entropy, float((-entropy(adm)).min()))
    return {"kappa": best, "kappa_prime_one": best_entropy, "admissible_points": n_adm}


# ---------------------------------------------------------------------------
# flat increments, extremal vectors, classification


@dataclass(frozen=True, eq=False)
class FlatIncrement:
    v: np.ndarray
    a: np.ndarray

    def validate(self, W: Subspace) -> None:
        v, a = np.asarray(self.v, float), np.asarray(self.a, float)
        if abs(v.sum()) > 1e-9 * max(1.0, np.abs(v).sum()):
            raise SubspaceError("v must have zero mean")
        if v.min() < -1 - 1e-12:
            raise SubspaceError("v must satisfy v_j >= -1")
        if abs(np.linalg.norm(a) - 1) > 1e-9:
            raise SubspaceError("direction must be a unit vector")
        if not W.contains(tensor(v, a)):
            raise SubspaceError("v (x) a is not in W")

    @property
    def tensor(self) -> np.ndarray:
        return tensor(self.v, self.a)


@dataclass(frozen=True, eq=False)
class ExtremalVector:
    """Two-valued increment m^alpha chi_H - 1 together with its directions."""

    support: tuple[int, ...]  # 1-based digits
    alpha: float
    v: np.ndarray
    directions: np.ndarray  # orthonormal rows spanning the admissible a

    @property
    def a(self) -> np.ndarray:
        return self.directions[0]

    @property
    def increment(self) -> FlatIncrement:
        return FlatIncrement(self.v, self.a)

    @property
    def mask(self) -> np.ndarray:
        mk = np.zeros(self.v.size, dtype=bool)
        mk[[j - 1 for j in self.support]] = True
        return mk

    def check(self, m: int) -> None:
        h = len(self.support)
        if abs(h - m ** (1 - self.alpha)) > 1e-9:
            raise SubspaceError("support size must equal m^(1 - alpha)")
        target = np.where(self.mask, m**self.alpha - 1, -1.0)
        if np.max(np.abs(target - self.v)) > 1e-12:
            raise SubspaceError("not a two-valued extremal vector")


def support_size(m: int, alpha: float) -> int:
    h = m ** (1.0 - alpha)
    k = int(round(h))
    if abs(h - k) > 1e-6 or k < 1:
        raise SubspaceError(f"m^(1-alpha) = {h:.9g} is not an integer")
    return k


def two_valued(m: int, support: Sequence[int], alpha: float) -> np.ndarray:
    v = np.full(m, -1.0)
    v[[j - 1 for j in support]] = m**alpha - 1.0
    return v


def extremal_vectors(W: Subspace, alpha: float, max_subsets: int = 5_000_000) -> list[ExtremalVector]:
    """All supports H with |H| = m^(1-alpha) whose two-valued vector is admissible.

    Exhaustive over subsets; supports come out in lexicographic order.
    """
    m = W.m
    h = support_size(m, alpha)
    alpha = 1.0 - math.log(h) / math.log(m)
    n = math.comb(m, h)
    if n > max_subsets:
        raise SubspaceError(f"{n} candidate supports exceed the scan limit")
    subsets = np.array(list(itertools.combinations(range(m), h)), dtype=np.int64).reshape(n, h)
    vs = np.full((n, m), -1.0)
    np.put_along_axis(vs, subsets, m**alpha - 1.0, axis=1)
    ok = batch_rank_one_defect(vs, W) <= 1e-8
    out = []
    for i in np.flatnonzero(ok):
        v = vs[i]
        dirs = admissible_directions(v, W, tol=1e-8)
        if dirs.shape[0] == 0:
            continue
        out.append(ExtremalVector(tuple(int(j) + 1 for j in subsets[i]), alpha, v, _canonical(dirs)))
    return out


def _canonical(dirs: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of a row space (reduced-echelon flavour)."""
    if dirs.shape[0] == 1:
        a = dirs[0]
        k = int(np.argmax(np.abs(a) > 1e-9 * np.abs(a).max()))
        return (a if a[k] > 0 else -a)[None, :]
    p = dirs.T @ dirs
    cols = []
    for c in range(p.shape[0]):
        col = p[:, c].copy()
        for q in cols:
            col -= (q @ col) * q
        if np.linalg.norm(col) > 1e-8:
            cols.append(col / np.linalg.norm(col))
        if len(cols) == dirs.shape[0]:
            break
    return np.array(cols)


@dataclass
class GeometricReport:
    geometric: bool
    alpha: float | None
    kappa_samples: dict
    chord_deviation: float | None
    kappa_prime_one: float | None
    support_size: int | None = None
    witnesses: list = field(default_factory=list)
    degenerate: bool = False
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "geometric": self.geometric,
            "alpha": self.alpha,
            "kappa": {str(k): v for k, v in self.kappa_samples.items()},
            "chord_deviation": self.chord_deviation,
            "kappa_prime_one": self.kappa_prime_one,
            "support_size": self.support_size,
            "extremal_supports": [list(w.support) for w in self.witnesses],
            "degenerate": self.degenerate,
            "notes": list(self.notes),
        }


GEOMETRIC_THETAS = (0.0, 0.25, 0.5, 0.75, 1.0)


def is_geometric(W: Subspace, tol: float = 1e-6, starts: int = 64, seed: int = 0,
                 enumerate_limit: int = 16) -> GeometricReport:
    atlas = rank_one_atlas(W, starts, seed)
    if atlas.degenerate:
        return GeometricReport(False, None, {t: 0.0 for t in GEOMETRIC_THETAS}, None, None,
                               degenerate=True,
                               notes=["only v = 0 is rank-one admissible: trivially affine, order undefined"])
    ks = {t: atlas.kappa(t)[0] for t in GEOMETRIC_THETAS}
    dev = max(abs(ks[t] - ks[0.0] * (1 - t)) for t in GEOMETRIC_THETAS)
    kp1 = atlas.kappa_prime_one()[0]
    alpha = -kp1 / math.log(W.m)
    rep = GeometricReport(False, alpha, ks, dev, kp1)
    if dev > tol or abs(ks[0.0] + kp1) > tol:
        rep.notes.append("kappa is not affine on the sampled thetas")
        return rep
    try:
        h = support_size(W.m, alpha)
    except SubspaceError as exc:
        rep.notes.append(str(exc))
        return rep
    rep.support_size = h
    if W.m <= enumerate_limit:
        rep.witnesses = extremal_vectors(W, alpha)
    else:
        verts = atlas.vertices()
        hits = verts[np.abs(entropy(verts) - alpha * math.log(W.m)) < 1e-9]
        for v in hits:
            supp = tuple(int(j) + 1 for j in np.flatnonzero(v > -1 + 1e-9))
            dirs = admissible_directions(v, W, 1e-8)
            rep.witnesses.append(ExtremalVector(supp, alpha, v, _canonical(dirs)))
        rep.notes.append("extremal supports taken from optimizer vertices (m above the exhaustive scan limit)")
    rep.geometric = len(rep.witnesses) > 0
    if not rep.geometric:
        rep.notes.append("no extremal witness found")
    return rep


@dataclass
class NonLocalityReport:
    nonlocal_: bool
    vacuous: bool
    certificates: list

    def as_dict(self) -> dict:
        return {"nonlocal": self.nonlocal_, "vacuous": self.vacuous, "certificates": self.certificates}


def nonlocal_solution_space(W: Subspace, ev: ExtremalVector) -> np.ndarray:
    """Basis of {(w, b) : w in W, b + w_j = 0 for j outside the support}.

    Rows are ``(w.ravel(), b)`` of length ``m ell + ell``.
    """
    m, ell = W.m, W.ell
    bw = W.basis.reshape(-1, m, ell)
    outside = np.flatnonzero(~ev.mask)
    rows = []
    for j in outside:
        for c in range(ell):
            row = np.concatenate([bw[:, j, c], np.eye(ell)[c]])
            rows.append(row)
    A = np.array(rows).reshape(-1, W.dim + ell)
    ns = null_space(A, rcond=1e-10) if A.size else np.eye(W.dim + ell)
    sols = []
    for col in ns.T:
        w = col[: W.dim] @ W.basis
        sols.append(np.concatenate([w, col[W.dim :]]))
    return np.array(sols).reshape(-1, m * ell + ell)


def is_nonlocal(W: Subspace, alpha: float, extremals: list[ExtremalVector] | None = None) -> NonLocalityReport:
    if extremals is None:
        extremals = extremal_vectors(W, alpha)
    if not extremals:
        return NonLocalityReport(True, True, [])
    expected = 2 if W.complex_structure else 1
    certs = []
    ok = True
    for ev in extremals:
        sols = nonlocal_solution_space(W, ev)
        spans = True
        for a in ev.directions:
            target = np.concatenate([tensor(ev.v, a).ravel(), a])
            if sols.shape[0] == 0:
                spans = False
                break
            coef, *_ = np.linalg.lstsq(sols.T, target, rcond=None)
            spans &= bool(np.linalg.norm(sols.T @ coef - target) < 1e-8)
        good = sols.shape[0] == expected and spans
        ok &= good
        certs.append({"support": list(ev.support), "solution_dim": int(sols.shape[0]),
                      "expected_dim": expected, "ok": bool(good)})
    return NonLocalityReport(ok, False, certs)


# ---------------------------------------------------------------------------
# transforms phi : W -> V


@dataclass(frozen=True, eq=False)
class TransformOp:
    """Linear phi : W -> V as an ``(m, m ell)`` matrix.

    The stored ``effective`` matrix is ``C @ matrix @ P_W``: inputs are
    projected onto W and outputs are centered, so it maps into V.
    """

    space: Subspace
    matrix: np.ndarray = field(repr=False)
    name: str = ""

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float).reshape(self.space.m, self.space.size)
        object.__setattr__(self, "matrix", a)
        m = self.space.m
        eff = (np.eye(m) - 1.0 / m) @ a @ self.space.projector
        eff.flags.writeable = False
        object.__setattr__(self, "effective", eff)

    @classmethod
    def zero(cls, space: Subspace) -> "TransformOp":
        return cls(space, np.zeros((space.m, space.size)), "zero")

    def apply(self, w) -> np.ndarray:
        """phi[w] for ``w`` of shape ``(..., m, ell)`` or ``(..., m ell)``; returns ``(..., m)``."""
        w = np.asarray(w, dtype=float)
        if w.shape[-2:] == (self.space.m, self.space.ell):
            w = w.reshape(*w.shape[:-2], self.space.size)
        return w @ self.effective.T

    @cached_property
    def norm(self) -> float:
        return float(np.linalg.norm(self.effective, 2)) if self.effective.size else 0.0

    @property
    def is_zero(self) -> bool:
        """Vanishes on W up to rounding of the raw matrix."""
        raw = float(np.linalg.norm(self.matrix, 2)) if self.matrix.size else 0.0
        return self.norm <= 1e-12 * max(1.0, raw)

    def scaled(self, c: float) -> "TransformOp":
        return TransformOp(self.space, c * self.matrix, self.name)

    def normalized(self) -> "TransformOp":
        """Unit operator norm on W; an operator that vanishes on W is returned as zero."""
        if self.is_zero:
            return TransformOp.zero(self.space)
        return self.scaled(1.0 / self.norm)


@dataclass
class CancelReport:
    canceling: bool
    worst: float
    witness: dict | None

    def as_dict(self) -> dict:
        return {"canceling": self.canceling, "worst_relative": self.worst, "witness": self.witness}


def is_canceling(phi: TransformOp, W: Subspace, alpha: float,
                 extremals: list[ExtremalVector] | None = None, rtol: float = 1e-10) -> CancelReport:
    if extremals is None:
        extremals = extremal_vectors(W, alpha)
    nphi = phi.norm
    if phi.is_zero:
        return CancelReport(True, 0.0, None)
    worst, witness = 0.0, None
    for ev in extremals:
        for a in ev.directions:
            w = tensor(ev.v, a)
            out = phi.apply(w)
            vals = np.abs(out[ev.mask]) / (nphi * np.linalg.norm(w))
            k = int(np.argmax(vals))
            if vals[k] > worst:
                worst = float(vals[k])
                j = int(np.flatnonzero(ev.mask)[k]) + 1
                witness = {"support": list(ev.support), "a": a.tolist(), "j": j,
                           "value": float(out[j - 1])}
    ok = worst <= rtol
    return CancelReport(ok, worst, None if ok else witness)



def canceling_constraints(W: Subspace, extremals: list[ExtremalVector]) -> np.ndarray:
    """Rows acting on vec(B), B of shape (m, dim W), for phi = C B basis: one row
    per extremal vector, admissible direction and support index."""
    m, k = W.m, W.dim
    center = np.eye(m) - 1.0 / m
    rows = []
    for ev in extremals:
        for a in ev.directions:
            coords = W.basis @ tensor(ev.v, a).reshape(-1)  # (k,)
            for j in np.flatnonzero(ev.mask):
                rows.append(np.outer(center[j], coords).reshape(-1))
    return np.array(rows).reshape(-1, m * k)


def project_onto_canceling(phi: TransformOp, extremals: list[ExtremalVector]) -> TransformOp:
    """Orthogonal projection of phi (in W coordinates) onto the canceling operators."""
    W = phi.space
    B = (phi.effective @ W.basis.T).reshape(-1)
    c = canceling_constraints(W, extremals)
    if c.shape[0]:
        B = B - np.linalg.pinv(c) @ (c @ B)
    return TransformOp(W, B.reshape(W.m, W.dim) @ W.basis, "canceling projection")


# ---------------------------------------------------------------------------
# flatness and distance to rank-one configurations


def flatness_measure(X) -> float:
    X = np.asarray(X, dtype=float)
    x = X.mean(axis=0)
    nx = np.linalg.norm(x)
    if nx == 0:
        return math.inf
    return float(np.linalg.norm(X, axis=1).mean() / nx - 1.0)


@dataclass
class NearestRankOne:
    D: float
    index: int | None
    support: tuple[int, ...] | None
    a: np.ndarray | None


def rank_one_distance_batch(X: np.ndarray, ev: ExtremalVector, iters: int = 300) -> tuple[np.ndarray, np.ndarray]:
    """min over a' in span(directions) of sum_j |x_j - (1 + v_j) a'| for a batch (B, m, ell).

    The objective is a sum of Euclidean norms of affine maps of the
    coefficients, minimized by iteratively reweighted least squares
    (Weiszfeld iteration).
    """
    X = np.asarray(X, dtype=float)
    u = 1.0 + ev.v
    A = ev.directions  # (r, ell) orthonormal
    px = np.einsum("bjl,rl->bjr", X, A)  # coordinates of x_j in span(A)
    perp2 = np.maximum(np.sum(X**2, axis=2) - np.sum(px**2, axis=2), 0.0)
    c = np.einsum("j,bjr->br", u, px) / (u @ u)
    for _ in range(iters):
        res = np.sqrt(np.sum((px - u[None, :, None] * c[:, None, :]) ** 2, axis=2) + perp2)
        w = 1.0 / np.maximum(res, 1e-300 + 1e-14 * res.max(axis=1, keepdims=True))
        num = np.einsum("bj,j,bjr->br", w, u, px)
        den = (w * u**2).sum(axis=1)
        c_new = num / den[:, None]
        if np.max(np.abs(c_new - c)) < 1e-15:
            c = c_new
            break
        c = c_new
    D = np.sqrt(np.sum((px - u[None, :, None] * c[:, None, :]) ** 2, axis=2) + perp2).sum(axis=1)
    return D, c @ A


def rank_one_distance(X, ev: ExtremalVector) -> tuple[float, np.ndarray]:
    D, a = rank_one_distance_batch(np.asarray(X, dtype=float)[None], ev)
    return float(D[0]), a[0]


def nearest_rank_one(X, W: Subspace, alpha: float,
                     extremals: list[ExtremalVector] | None = None) -> NearestRankOne:
    if extremals is None:
        extremals = extremal_vectors(W, alpha)
    if not extremals:
        raise SubspaceError("no extremal classes to compare with")
    best = NearestRankOne(math.inf, None, None, None)
    for i, ev in enumerate(extremals):
        D, a = rank_one_distance(X, ev)
        if D < best.D - 1e-15:
            best = NearestRankOne(D, i, ev.support, a)
    return best
