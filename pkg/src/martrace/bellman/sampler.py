"""Stratified sampling of configuration points and derivative-free local descent."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..subspace import ExtremalVector, Subspace, is_geometric, rank_one_atlas
from .config import ConfigBatch

STRATA = ("generic", "extremal", "equal_split", "boundary", "dominant_s")
DEFAULT_WEIGHTS = {"generic": 0.35, "extremal": 0.35, "equal_split": 0.1, "boundary": 0.1, "dominant_s": 0.1}


@dataclass(frozen=True, eq=False)
class RankOneLibrary:
    """Rank-one increments (1 + v) (x) a used to seed the structured strata."""

    vs: np.ndarray  # (n, m)
    directions: tuple  # per entry, orthonormal rows of admissible directions
    masks: np.ndarray  # (n, m) support indicators (1 + v > 0)
    extremal: bool

    def __len__(self) -> int:
        return self.vs.shape[0]


def rank_one_library(W: Subspace, extremals: list[ExtremalVector] | None = None) -> RankOneLibrary:
    """Extremal vectors when W is geometric, otherwise the optimizer's vertices."""
    if extremals is None:
        geo = is_geometric(W)
        extremals = geo.witnesses
    if extremals:
        vs = np.array([e.v for e in extremals])
        return RankOneLibrary(vs, tuple(e.directions for e in extremals), vs > -1 + 1e-12, True)
    atlas = rank_one_atlas(W)
    vs, dirs = [], []
    for fam in atlas.families:
        for v in fam.vertices:
            if np.abs(v).max() > 1e-12:
                vs.append(v)
                dirs.append(fam.direction[None, :])
    if not vs:
        return RankOneLibrary(np.zeros((0, W.m)), (), np.zeros((0, W.m), bool), False)
    vs = np.array(vs)
    return RankOneLibrary(vs, tuple(dirs), vs > -1 + 1e-12, False)


def _loguniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def _zero_some(rng, a, p):
    return np.where(rng.random(a.shape) < p, 0.0, a)


class Sampler:
    """Draws raw (unnormalized) configuration batches for each stratum.

    The x-vector is drawn inside W, z_j = |x_j| + slack, t_j = r_j s_j with
    r_j in [0, 1]; the parent s is derived by the splitting rule, never drawn.
    """

    def __init__(self, W: Subspace, alpha: float, library: RankOneLibrary):
        self.W = W
        self.alpha = alpha
        self.lib = library
        self.m, self.ell, self.k = W.m, W.ell, W.dim

    def _xvec(self, rng, n, scale):
        c = rng.standard_normal((n, self.k))
        c /= np.maximum(np.linalg.norm(c, axis=1, keepdims=True), 1e-300)
        c *= scale[:, None]
        return (c @ self.W.basis).reshape(n, self.m, self.ell)

    def _assemble(self, X, y, slack, S, r) -> ConfigBatch:
        Z = np.linalg.norm(X, axis=2) + slack
        return ConfigBatch(X, y, Z, r * S, S)

    def draw(self, stratum: str, rng: np.random.Generator, n: int) -> ConfigBatch:
        if stratum == "extremal" and len(self.lib) == 0:
            stratum = "generic"
        return getattr(self, f"_{stratum}")(rng, n)

    def _generic(self, rng, n, zero_slack=False):
        m, ell = self.m, self.ell
        X = self._xvec(rng, n, _loguniform(rng, 1e-3, 1e1, n))
        x = rng.standard_normal((n, ell)) * _loguniform(rng, 1e-3, 1e1, n)[:, None]
        x = np.where(rng.random((n, 1)) < 0.15, 0.0, x)
        X = X + x[:, None, :]
        y = rng.standard_normal(n) * _loguniform(rng, 1e-4, 1e3, n)
        y = np.where(rng.random(n) < 0.1, 0.0, y)
        if zero_slack:
            slack = np.zeros((n, m))
        else:
            slack = rng.exponential(1.0, (n, m)) * _loguniform(rng, 1e-4, 1e1, n)[:, None]
            slack = _zero_some(rng, slack, 0.2)
        S = _loguniform(rng, 1e-4, 1.0, (n, m))
        r = rng.random((n, m))
        u = rng.random((n, m))
        r = np.where(u < 0.15, 1.0, np.where(u < 0.25, 0.0, r))
        return self._assemble(X, y, slack, S, r)

    def _boundary(self, rng, n):
        return self._generic(rng, n, zero_slack=True)

    def _extremal(self, rng, n):
        m, ell, lib = self.m, self.ell, self.lib
        pick = rng.integers(0, len(lib), n)
        v = lib.vs[pick]
        mask = lib.masks[pick]
        a = np.empty((n, ell))
        for i, p in enumerate(pick):
            dirs = lib.directions[p]
            c = rng.standard_normal(dirs.shape[0])
            a[i] = c @ dirs / np.linalg.norm(c)
        lam = _loguniform(rng, 1e-2, 1e1, n)
        X = lam[:, None, None] * (1.0 + v)[:, :, None] * a[:, None, :]
        delta = _loguniform(rng, 1e-8, 1.0, n) * lam
        delta = np.where(rng.random(n) < 0.15, 0.0, delta)
        X = X + self._xvec(rng, n, delta)
        y = rng.standard_normal(n) * _loguniform(rng, 1e-4, 1e2, n) * lam
        y = np.where(rng.random(n) < 0.25, 0.0, y)
        slack = _loguniform(rng, 1e-9, 1e-1, (n, m)) * lam[:, None]
        slack = _zero_some(rng, slack, 0.6)
        # masses either balanced over the support or random
        mode = rng.integers(0, 4, n)
        sigma = _loguniform(rng, 1e-3, 1.0, n)
        S = np.where((mode == 0)[:, None] | (mode == 1)[:, None], sigma[:, None],
                     _loguniform(rng, 1e-4, 1.0, (n, m)))
        r_on = np.where(mode[:, None] == 0, 1.0, rng.random((n, m)))
        r_off = np.where(mode[:, None] == 0, 0.0, rng.random((n, m)) * _loguniform(rng, 1e-6, 1.0, n)[:, None])
        r = np.where(mask, r_on, r_off)
        S = np.where((mode == 3)[:, None] & ~mask, S * _loguniform(rng, 1e-4, 1.0, n)[:, None], S)
        return self._assemble(X, y, slack, S, r)

    def _equal_split(self, rng, n):
        m, ell = self.m, self.ell
        x = rng.standard_normal((n, ell)) * _loguniform(rng, 1e-3, 1e1, n)[:, None]
        delta = _loguniform(rng, 1e-9, 1e-1, n) * np.linalg.norm(x, axis=1)
        delta = np.where(rng.random(n) < 0.4, 0.0, delta)
        X = x[:, None, :] + self._xvec(rng, n, delta)
        y = rng.standard_normal(n) * _loguniform(rng, 1e-4, 1e3, n)
        base = np.linalg.norm(X, axis=2).max(axis=1)
        z = base + _zero_some(rng, rng.exponential(1.0, n) * base, 0.3)
        slack = z[:, None] - np.linalg.norm(X, axis=2)
        sigma = _loguniform(rng, 1e-3, 1.0, n)
        S = np.repeat(sigma[:, None], m, axis=1)
        r = np.repeat(rng.random((n, 1)), m, axis=1)
        r = np.where(rng.random((n, 1)) < 0.3, 1.0, r)
        return self._assemble(X, y, slack, S, r)

    def _dominant_s(self, rng, n):
        b = self._extremal(rng, n) if len(self.lib) and rng.random() < 0.5 else self._generic(rng, n)
        shrink = _loguniform(rng, 1e-6, 1e-1, (n, self.m))
        shrink = np.where(rng.random((n, self.m)) < 0.3, 1.0, shrink)
        return ConfigBatch(b.X, b.y, b.Z, b.T * shrink, b.S)


class Parametrization:
    """Flat parameter vectors for local descent.

    Layout: W-coordinates of the x-vector (k), x (ell), y (1), slack (m),
    s_j (m), r_j = t_j / s_j (m).  Decoding folds slack and s_j by absolute
    value and clips r_j into [0, 1], so every parameter vector is feasible.
    """

    def __init__(self, W: Subspace, alpha: float):
        self.W = W
        self.alpha = alpha
        self.m, self.ell, self.k = W.m, W.ell, W.dim
        self.size = self.k + self.ell + 1 + 3 * self.m

    def encode(self, b: ConfigBatch) -> np.ndarray:
        n = len(b)
        x = b.X.mean(axis=1)
        xv = (b.X - x[:, None, :]).reshape(n, -1)
        c = xv @ self.W.basis.T
        slack = np.maximum(b.Z - np.linalg.norm(b.X, axis=2), 0.0)
        r = np.divide(b.T, b.S, out=np.zeros_like(b.T), where=b.S > 0)
        return np.concatenate([c, x, b.y[:, None], slack, b.S, np.clip(r, 0, 1)], axis=1)

    def decode(self, P: np.ndarray) -> ConfigBatch:
        k, ell, m = self.k, self.ell, self.m
        n = P.shape[0]
        c = P[:, :k]
        x = P[:, k : k + ell]
        y = P[:, k + ell]
        o = k + ell + 1
        slack = np.abs(P[:, o : o + m])
        S = np.abs(P[:, o + m : o + 2 * m])
        r = np.clip(P[:, o + 2 * m : o + 3 * m], 0.0, 1.0)
        X = x[:, None, :] + (c @ self.W.basis).reshape(n, m, ell)
        Z = np.linalg.norm(X, axis=2) + slack
        return ConfigBatch(X, y, Z, r * S, S).normalized(self.alpha)


def pattern_search(f: Callable[[np.ndarray], np.ndarray], P0: np.ndarray, rng: np.random.Generator,
                   step: float = 0.2, sweeps: int = 80, min_step: float = 1e-10,
                   max_coords: int = 24) -> tuple[np.ndarray, np.ndarray]:
    """Batched compass search: each row descends independently.

    Every sweep tries +-h on each coordinate (scaled by |p| + 1e-3) and two
    random directions; rows whose sweep brought no gain halve their step.
    Above ``max_coords`` coordinates a fresh random subset of that size is
    tried per sweep, which bounds the cost on large spaces.
    """
    P = P0.copy()
    val = f(P)
    h = np.full(P.shape[0], step)
    dim = P.shape[1]
    for _ in range(sweeps):
        active = h > min_step
        if not active.any():
            break
        gained = np.zeros(P.shape[0], dtype=bool)
        coords = range(dim) if dim <= max_coords else np.sort(rng.choice(dim, max_coords, replace=False))
        moves = [(int(i), s) for i in coords for s in (1.0, -1.0)] + [None, None]
        for mv in moves:
            Q = P.copy()
            if mv is None:
                d = rng.standard_normal(P.shape)
                d /= np.linalg.norm(d, axis=1, keepdims=True)
                Q += (h[:, None] * (np.abs(P) + 1e-3)) * d
            else:
                i, s = mv
                Q[:, i] += s * h * (np.abs(P[:, i]) + 1e-3)
            fq = f(Q)
            better = active & (fq < val)
            P[better] = Q[better]
            val = np.where(better, fq, val)
            gained |= better
        h = np.where(gained, np.minimum(h * 1.5, 1.0), h * 0.5)
    return P, val
