"""Fractional integration of Sobolev martingales and the per-term HLS bound."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .subspace import Subspace, TransformOp
from .tree import AtomPath, SimpleMartingale, TreeError, TreeShape

MEMBERSHIP_TOL = 1e-9


class MembershipError(ValueError):
    """A martingale difference leaves W; ``atom`` is the first offender."""

    def __init__(self, atom: AtomPath, residual: float):
        super().__init__(f"dF on atom {atom} is not in W (relative residual {residual:.3e})")
        self.atom = atom
        self.residual = residual


def membership_residuals(F: SimpleMartingale, W: Subspace) -> list[np.ndarray]:
    """Relative residual of dF_{n+1} on every level-n atom, per level."""
    if (F.shape.m, F.shape.ell) != (W.m, W.ell):
        raise TreeError("martingale and subspace have different (m, ell)")
    out = []
    for n in range(F.depth):
        d = F.differences(n)
        flat = d.reshape(d.shape[0], -1)
        res = flat - (flat @ W.basis.T) @ W.basis
        scale = max(float(np.abs(F.leaves).max(initial=0.0)), 1e-300)
        out.append(np.linalg.norm(res, axis=1) / scale)
    return out


def check_membership(F: SimpleMartingale, W: Subspace, tol: float = MEMBERSHIP_TOL) -> None:
    for n, res in enumerate(membership_residuals(F, W)):
        bad = np.flatnonzero(res >= tol)
        if bad.size:
            raise MembershipError(AtomPath.from_index(int(bad[0]), n, F.m), float(res[bad[0]]))


def project_to_sobolev(F: SimpleMartingale, W: Subspace) -> SimpleMartingale:
    """Replace every difference by its projection onto W, keeping F_0."""
    m, N, ell = F.m, F.depth, F.shape.ell
    vals = F.level_values(0)
    for n in range(N):
        d = F.differences(n).reshape(-1, m * ell)
        d = ((d @ W.basis.T) @ W.basis).reshape(-1, m, ell)
        vals = (vals[:, None, :] + d).reshape(-1, ell)
    return SimpleMartingale.from_leaves(F.shape, vals)


@dataclass(frozen=True, eq=False)
class FracIntegralResult:
    """Partial sums of the fractional integral; ``values`` live on level-``level`` atoms."""

    shape: TreeShape
    alpha: float
    level: int
    values: np.ndarray = field(repr=False)
    partial: tuple = field(repr=False, default=())

    def level_values(self, n: int) -> np.ndarray:
        """(I_alpha F)_n on level-n atoms, for n <= level."""
        if not 0 <= n <= self.level:
            raise TreeError(f"partial sum {n} outside [0, {self.level}]")
        return self.partial[n]

    def leaf_values(self) -> np.ndarray:
        """The result broadcast to the leaves of the tree."""
        rep = self.shape.m ** (self.shape.depth - self.level)
        return np.repeat(self.values, rep)


def i_alpha_partial(F: SimpleMartingale, phi: TransformOp, alpha: float, N: int | None = None,
                    W: Subspace | None = None, mode: str = "strict") -> FracIntegralResult:
    """(I_alpha F)_N = sum_{n<N} m^{-alpha n} phi[dF_{n+1}] evaluated on the kid.

    ``mode="strict"`` rejects martingales outside the Sobolev class;
    ``mode="repair"`` projects each difference onto W first.
    """
    W = phi.space if W is None else W
    N = F.depth if N is None else N
    F.shape.check_level(N)
    if mode == "strict":
        check_membership(F, W)
    elif mode == "repair":
        F = project_to_sobolev(F, W)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    m = F.m
    sums = [np.zeros(1)]
    acc = np.zeros(1)
    for n in range(N):
        out = phi.apply(F.differences(n))  # (m^n, m)
        acc = np.repeat(acc, m) + float(m) ** (-alpha * n) * out.reshape(-1)
        sums.append(acc)
    for s in sums:
        s.flags.writeable = False
    return FracIntegralResult(F.shape, alpha, N, acc, tuple(sums))


def hls_term_norm(F: SimpleMartingale, q: float, n: int) -> float:
    """||dF_n||_{L_q} with dF_n = F_n - F_{n-1}, Euclidean norm on R^ell."""
    if not 1 <= n <= F.depth:
        raise TreeError(f"difference index {n} outside [1, {F.depth}]")
    d = F.differences(n - 1).reshape(-1, F.shape.ell)
    return float(np.mean(np.linalg.norm(d, axis=1) ** q) ** (1.0 / q))


def hls_term_rhs(F: SimpleMartingale, q: float, n: int) -> float:
    return 2.0 * float(F.m) ** ((q - 1.0) * (n + 1) / q) * F.l1_norm()


def hls_term_bound(F: SimpleMartingale, alpha: float, q: float, n: int) -> bool:
    """||dF_n||_q <= 2 m^{(q-1)(n+1)/q} ||F||_1; ``alpha`` only fixes the context."""
    if q < 1:
        raise ValueError("q must be >= 1")
    return hls_term_norm(F, q, n) <= hls_term_rhs(F, q, n) * (1 + 1e-12)


def point_mass_hls_ratio(m: int, q: float) -> float:
    """Closed-form ||dF_n||_q / RHS for the point-mass martingale (any n >= 1)."""
    return (m ** (1 - 2 * q) * ((m - 1) ** q + m - 1)) ** (1 / q) / 2.0
