"""Frostman growth conditions and the maximal process of a tree measure."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tree import AtomPath, TreeMeasure, TreeShape


def frostman_sup(nu: TreeMeasure, alpha: float) -> float:
    """max over atoms of m^{(1-alpha) level} nu(atom)."""
    m = nu.shape.m
    return max(float(m ** ((1 - alpha) * n) * nu.level_masses(n).max()) for n in range(nu.shape.depth + 1))


@dataclass(frozen=True, eq=False)
class MaximalProcess:
    """Per-level arrays of the maximal function of a measure.

    ``absolute[n][i]`` is the max of m^{(1-alpha) level(v)} nu(v) over the
    descendants v of atom i of level n (itself included).  ``relative[n]`` is
    m^{-(1-alpha) n} times that; it obeys s = max(t, m^{1-alpha} max_j s_j) with
    t = nu(atom), which is the splitting rule in the configuration space.
    """

    shape: TreeShape
    alpha: float
    absolute: tuple = field(repr=False)
    relative: tuple = field(repr=False)

    def at(self, omega: AtomPath, relative: bool = False) -> float:
        levels = self.relative if relative else self.absolute
        return float(levels[omega.level][omega.index(self.shape.m)])

    @property
    def root(self) -> float:
        return float(self.absolute[0][0])


def maximal_process(nu: TreeMeasure, alpha: float) -> MaximalProcess:
    """One bottom-up pass over the tree."""
    m, N = nu.shape.m, nu.shape.depth
    g = float(m) ** (1 - alpha)
    rel = [None] * (N + 1)
    rel[N] = nu.level_masses(N).copy()
    for n in range(N - 1, -1, -1):
        kids = rel[n + 1].reshape(-1, m).max(axis=1)
        rel[n] = np.maximum(nu.level_masses(n), g * kids)
    absolute = [g**n * r for n, r in enumerate(rel)]
    for a in rel + absolute:
        a.flags.writeable = False
    return MaximalProcess(nu.shape, alpha, tuple(absolute), tuple(rel))


def maximal_process_scan(nu: TreeMeasure, alpha: float) -> list[np.ndarray]:
    """Top-down oracle: for each atom, scan all descendant levels directly."""
    m, N = nu.shape.m, nu.shape.depth
    out = []
    for n in range(N + 1):
        best = np.zeros(m**n)
        for k in range(n, N + 1):
            w = (m ** ((1 - alpha) * k)) * nu.level_masses(k)
            best = np.maximum(best, w.reshape(m**n, -1).max(axis=1))
        out.append(best)
    return out


def splitting_defect(proc: MaximalProcess, nu: TreeMeasure) -> float:
    """Largest violation of s = max(t, m^{1-alpha} max_j s_j) over internal atoms."""
    m = proc.shape.m
    g = float(m) ** (1 - proc.alpha)
    worst = 0.0
    for n in range(proc.shape.depth):
        s = proc.relative[n]
        rhs = np.maximum(nu.level_masses(n), g * proc.relative[n + 1].reshape(-1, m).max(axis=1))
        worst = max(worst, float(np.abs(s - rhs).max()))
    return worst


def frostman_measure_generator(alpha: float, depth: int, seed: int, m: int = 4,
                               concentration: float = 0.5) -> TreeMeasure:
    """Random probability measure with nu(atom) <= m^{(alpha-1) level} on every atom.

    Each atom splits its mass with Dirichlet weights; shares above the cap of the
    next level are clipped and the excess is redistributed (water filling) among
    kids below the cap.  Total mass 1 is attained at the root, so the Frostman
    supremum equals 1.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    masses = np.ones(1)
    for n in range(depth):
        cap = float(m) ** ((alpha - 1) * (n + 1))
        w = rng.dirichlet(np.full(m, concentration), size=masses.size)
        kids = masses[:, None] * w
        kids = _water_fill(kids, masses, cap)
        masses = kids.reshape(-1)
    return TreeMeasure(TreeShape(m, depth, 1), masses)


def _water_fill(kids: np.ndarray, totals: np.ndarray, cap: float) -> np.ndarray:
    kids = kids.copy()
    for _ in range(kids.shape[1] + 1):
        over = kids > cap
        if not over.any():
            break
        excess = np.where(over, kids - cap, 0.0).sum(axis=1)
        kids = np.minimum(kids, cap)
        room = np.where(kids < cap, cap - kids, 0.0)
        free = room.sum(axis=1)
        share = np.divide(room, free[:, None], out=np.zeros_like(room), where=free[:, None] > 0)
        kids = kids + share * np.minimum(excess, free)[:, None]
    # a parent never exceeds m * cap, so the clipped kids keep its full mass
    kids *= np.divide(totals, kids.sum(axis=1), out=np.ones_like(totals), where=kids.sum(axis=1) > 0)[:, None]
    return kids
