"""The m-uniform filtration: atoms, simple martingales and tree measures.

Leaves of a depth-``N`` tree are stored in lexicographic order of their digit
strings, so the atoms of level ``n`` are contiguous blocks of ``m**(N - n)``
leaves.  Digits are 1-based, storage indices are ``digit - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np


class TreeError(ValueError):
    """Raised on malformed shapes, paths or out-of-range levels."""


@dataclass(frozen=True)
class TreeShape:
    m: int
    depth: int
    ell: int = 1

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise TreeError(f"branching factor must be an integer >= 2, got {self.m}")
        if int(self.depth) != self.depth or self.depth < 0:
            raise TreeError(f"depth must be a non-negative integer, got {self.depth}")
        if int(self.ell) != self.ell or self.ell < 1:
            raise TreeError(f"ell must be a positive integer, got {self.ell}")

    @property
    def n_leaves(self) -> int:
        return self.m**self.depth

    def n_atoms(self, level: int) -> int:
        self.check_level(level)
        return self.m**level

    def check_level(self, level: int) -> None:
        if level < 0 or level > self.depth:
            raise TreeError(f"level {level} outside [0, {self.depth}]")

    def atoms(self, level: int) -> Iterator["AtomPath"]:
        for idx in range(self.n_atoms(level)):
            yield AtomPath.from_index(idx, level, self.m)


@dataclass(frozen=True)
class AtomPath:
    """Address of an atom: the digit string leading to it from the root."""

    digits: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        if any(d < 1 for d in self.digits):
            raise TreeError(f"digits are 1-based, got {self.digits}")

    @property
    def level(self) -> int:
        return len(self.digits)

    @property
    def parent(self) -> "AtomPath":
        if not self.digits:
            raise TreeError("the root has no parent")
        return AtomPath(self.digits[:-1])

    def kid(self, j: int) -> "AtomPath":
        return AtomPath(self.digits + (j,))

    def kids(self, m: int) -> list["AtomPath"]:
        return [self.kid(j) for j in range(1, m + 1)]

    def validate(self, m: int) -> None:
        if any(d > m for d in self.digits):
            raise TreeError(f"digit outside [1..{m}] in {self.digits}")

    def index(self, m: int) -> int:
        """Position among the atoms of the same level (lexicographic order)."""
        self.validate(m)
        idx = 0
        for d in self.digits:
            idx = idx * m + (d - 1)
        return idx

    @classmethod
    def from_index(cls, idx: int, level: int, m: int) -> "AtomPath":
        if not 0 <= idx < m**level:
            raise TreeError(f"index {idx} outside level {level}")
        digits = []
        for _ in range(level):
            idx, r = divmod(idx, m)
            digits.append(r + 1)
        return cls(tuple(reversed(digits)))

    def is_ancestor_of(self, other: "AtomPath") -> bool:
        return other.digits[: self.level] == self.digits

    def __str__(self):
        return "".join(str(d) if d < 10 else f"({d})" for d in self.digits) or "root"


def dist(gamma1: Sequence[int], gamma2: Sequence[int], m: int) -> float:
    """Tree metric ``m**(-k)`` with ``k`` the length of the common prefix."""
    g1, g2 = tuple(gamma1), tuple(gamma2)
    if g1 == g2:
        return 0.0
    k = 0
    for a, b in zip(g1, g2):
        if a != b:
            break
        k += 1
    return float(m) ** (-k)


def digits_array(shape: TreeShape, level: int | None = None) -> np.ndarray:
    """All digit strings of a level as an ``(m**level, level)`` array (1-based)."""
    level = shape.depth if level is None else level
    shape.check_level(level)
    idx = np.arange(shape.m**level)
    out = np.empty((idx.size, level), dtype=np.int64)
    for k in range(level - 1, -1, -1):
        idx, r = np.divmod(idx, shape.m)
        out[:, k] = r + 1
    return out


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SimpleMartingale:
    """An R^ell valued martingale stopped at the tree depth.

    ``density`` times ``m**scale_level`` gives the leaf values; measures are
    carried with ``scale_level = depth`` so that the measure correspondence
    is exact in both directions.
    """

    shape: TreeShape
    density: np.ndarray
    scale_level: int = 0

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float)
        if d.ndim == 1:
            d = d[:, None]
        if d.shape != (self.shape.n_leaves, self.shape.ell):
            raise TreeError(
                f"leaf array has shape {d.shape}, expected "
                f"{(self.shape.n_leaves, self.shape.ell)}"
            )
        object.__setattr__(self, "density", _frozen(d))

    @classmethod
    def from_leaves(cls, shape: TreeShape, leaves) -> "SimpleMartingale":
        return cls(shape, leaves, 0)

    @classmethod
    def constant(cls, shape: TreeShape, value) -> "SimpleMartingale":
        value = np.broadcast_to(np.asarray(value, dtype=float), (shape.ell,))
        return cls(shape, np.tile(value, (shape.n_leaves, 1)))

    @cached_property
    def leaves(self) -> np.ndarray:
        if self.scale_level == 0:
            return self.density
        return _frozen(self.density * float(self.shape.m) ** self.scale_level)

    @property
    def m(self) -> int:
        return self.shape.m

    @property
    def depth(self) -> int:
        return self.shape.depth

    def level_values(self, level: int) -> np.ndarray:
        """F_n on all level-n atoms, shape ``(m**n, ell)``."""
        self.shape.check_level(level)
        m, N, ell = self.m, self.depth, self.shape.ell
        return self.leaves.reshape(m**level, m ** (N - level), ell).mean(axis=1)

    def atom_value(self, omega: AtomPath) -> np.ndarray:
        if omega.level > self.depth:
            raise TreeError(f"atom level {omega.level} exceeds depth {self.depth}")
        idx = omega.index(self.m)
        block = self.m ** (self.depth - omega.level)
        return self.leaves[idx * block : (idx + 1) * block].mean(axis=0)

    def differences(self, level: int) -> np.ndarray:
        """dF_{n+1} on every level-n atom, shape ``(m**n, m, ell)``."""
        if level >= self.depth:
            raise TreeError(f"atoms of level {level} have no children (depth {self.depth})")
        parent = self.level_values(level)
        kids = self.level_values(level + 1).reshape(parent.shape[0], self.m, -1)
        return kids - parent[:, None, :]

    def martingale_difference(self, omega: AtomPath) -> np.ndarray:
        if omega.level >= self.depth:
            raise TreeError(f"atom {omega} is a leaf and has no children")
        x = self.atom_value(omega)
        kids = np.array([self.atom_value(k) for k in omega.kids(self.m)])
        return kids - x

    def conditional_abs(self, level: int) -> np.ndarray:
        """E(|F_N| | F_n) on level-n atoms."""
        self.shape.check_level(level)
        norms = np.linalg.norm(self.leaves, axis=1)
        return norms.reshape(self.m**level, -1).mean(axis=1)

    def l1_norm(self) -> float:
        return float(np.linalg.norm(self.leaves, axis=1).mean())

    def level_l1(self, level: int) -> float:
        return float(np.linalg.norm(self.level_values(level), axis=1).mean())

    def __add__(self, other: "SimpleMartingale") -> "SimpleMartingale":
        return SimpleMartingale.from_leaves(self.shape, self.leaves + other.leaves)

    def scaled(self, c: float) -> "SimpleMartingale":
        return SimpleMartingale.from_leaves(self.shape, c * self.leaves)


@dataclass(frozen=True, eq=False)
class TreeMeasure:
    """A nonnegative measure given by its leaf masses (unnormalized)."""

    shape: TreeShape
    masses: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.shape.ell != 1:
            raise TreeError("measures live on scalar trees (ell = 1)")
        w = np.asarray(self.masses, dtype=float).reshape(-1)
        if w.size != self.shape.n_leaves:
            raise TreeError(f"expected {self.shape.n_leaves} leaf masses, got {w.size}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise TreeError("leaf masses must be finite and nonnegative")
        object.__setattr__(self, "masses", _frozen(w))

    @classmethod
    def uniform(cls, shape: TreeShape, total: float = 1.0) -> "TreeMeasure":
        return cls(shape, np.full(shape.n_leaves, total / shape.n_leaves))

    @classmethod
    def point_mass(cls, shape: TreeShape, leaf: AtomPath, mass: float = 1.0) -> "TreeMeasure":
        w = np.zeros(shape.n_leaves)
        w[leaf.index(shape.m)] = mass
        return cls(shape, w)

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def level_masses(self, level: int) -> np.ndarray:
        self.shape.check_level(level)
        return self.masses.reshape(self.shape.m**level, -1).sum(axis=1)

    def mass(self, omega: AtomPath) -> float:
        return float(self.level_masses(omega.level)[omega.index(self.shape.m)])

    def integrate(self, values) -> float:
        """Integral of a leaf-level function against the measure."""
        return float(np.dot(self.masses, np.asarray(values, dtype=float).reshape(-1)))


def measure_to_martingale(nu: TreeMeasure) -> SimpleMartingale:
    """F_n = m**n * nu(omega) on level-n atoms."""
    return SimpleMartingale(TreeShape(nu.shape.m, nu.shape.depth, 1), nu.masses, nu.shape.depth)


def martingale_to_measure(F: SimpleMartingale) -> TreeMeasure:
    if F.shape.ell != 1:
        raise TreeError("only scalar martingales correspond to measures")
    N = F.depth
    if F.scale_level == N:
        masses = F.density[:, 0]
    else:
        masses = F.leaves[:, 0] / float(F.m) ** N
    return TreeMeasure(TreeShape(F.m, N, 1), masses)
