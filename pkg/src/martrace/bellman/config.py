"""Configuration points and the discrepancy of a candidate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..subspace import Subspace, TransformOp
from .candidates import SupersolutionCandidate

DOMAIN_TOL = 1e-9


class DomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConfigPoint:
    """One point (X, y, Z, T, S) of the configuration space."""

    X: np.ndarray
    y: float
    Z: np.ndarray
    T: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", float(self.y))
        for name in ("Z", "T", "S"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))

    @property
    def m(self) -> int:
        return self.X.shape[0]

    def derived(self, alpha: float) -> tuple[np.ndarray, float, float, float]:
        x = self.X.mean(axis=0)
        z = float(self.Z.mean())
        t = float(self.T.sum())
        s = max(t, float(self.m) ** (1 - alpha) * float(self.S.max()))
        return x, z, t, s

    @property
    def xvec(self) -> np.ndarray:
        return self.X - self.X.mean(axis=0)

    def batch(self) -> "ConfigBatch":
        return ConfigBatch(self.X[None], np.array([self.y]), self.Z[None], self.T[None], self.S[None])

    def as_dict(self) -> dict:
        return {"X": self.X.tolist(), "y": self.y, "Z": self.Z.tolist(), "T": self.T.tolist(),
                "S": self.S.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ConfigPoint":
        return cls(np.array(d["X"]), d["y"], np.array(d["Z"]), np.array(d["T"]), np.array(d["S"]))


@dataclass(eq=False)
class ConfigBatch:
    """B configuration points stored as arrays: X (B, m, ell), y (B,), Z, T, S (B, m)."""

    X: np.ndarray
    y: np.ndarray
    Z: np.ndarray
    T: np.ndarray
    S: np.ndarray

    def __len__(self) -> int:
        return self.X.shape[0]

    def take(self, idx) -> "ConfigBatch":
        return ConfigBatch(self.X[idx], self.y[idx], self.Z[idx], self.T[idx], self.S[idx])

    def point(self, i: int) -> ConfigPoint:
        return ConfigPoint(self.X[i], self.y[i], self.Z[i], self.T[i], self.S[i])

    @staticmethod
    def concat(batches: list["ConfigBatch"]) -> "ConfigBatch":
        return ConfigBatch(*(np.concatenate([getattr(b, f) for b in batches])
                             for f in ("X", "y", "Z", "T", "S")))

    def derived(self, alpha: float):
        m = self.X.shape[1]
        x = self.X.mean(axis=1)
        z = self.Z.mean(axis=1)
        t = self.T.sum(axis=1)
        s = np.maximum(t, float(m) ** (1 - alpha) * self.S.max(axis=1))
        return x, z, t, s

    def normalized(self, alpha: float) -> "ConfigBatch":
        """Scale so that |x| + |y| + sum z_j = 1 and s = 1 (degenerate rows are left alone)."""
        x, _, _, s = self.derived(alpha)
        lam = np.linalg.norm(x, axis=1) + np.abs(self.y) + self.Z.sum(axis=1)
        lam = np.where(lam > 0, lam, 1.0)
        sig = np.where(s > 0, s, 1.0)
        return ConfigBatch(self.X / lam[:, None, None], self.y / lam, self.Z / lam[:, None],
                           self.T / sig[:, None], self.S / sig[:, None])

    def domain_defect(self, W: Subspace) -> dict:
        xv = self.X - self.X.mean(axis=1, keepdims=True)
        flat = xv.reshape(len(self), -1)
        res = flat - (flat @ W.basis.T) @ W.basis
        scale = np.maximum(np.linalg.norm(self.X.reshape(len(self), -1), axis=1), 1e-300)
        return {
            "subspace": float((np.linalg.norm(res, axis=1) / scale).max(initial=0.0)),
            "z": float((np.linalg.norm(self.X, axis=2) - self.Z).max(initial=-np.inf)),
            "t": float((self.T - self.S).max(initial=-np.inf)),
            "negative": float(-min(self.Z.min(initial=0.0), self.T.min(initial=0.0), self.S.min(initial=0.0))),
        }

    def validate(self, W: Subspace) -> None:
        d = self.domain_defect(W)
        scale = max(1.0, float(np.abs(self.Z).max(initial=0.0)), float(np.abs(self.S).max(initial=0.0)))
        if d["subspace"] >= DOMAIN_TOL:
            raise DomainError(f"x-vector is not in W (relative residual {d['subspace']:.3e})")
        if d["z"] > 1e-12 * scale or d["t"] > 1e-12 * scale or d["negative"] > 0:
            raise DomainError("configuration violates |x_j| <= z_j, t_j <= s_j or positivity")


def discrepancy_batch(G: SupersolutionCandidate, phi: TransformOp, alpha: float, batch: ConfigBatch,
                      W: Subspace | None = None, check: bool = True) -> np.ndarray:
    """G(x, y, z, t, s) - m^{-alpha} sum_j G(x_j, m^alpha y + phi[x_vec]_j, z_j, t_j, s_j)."""
    W = phi.space if W is None else W
    if check:
        batch.validate(W)
    m = batch.X.shape[1]
    x, z, t, s = batch.derived(alpha)
    xv = batch.X - x[:, None, :]
    yk = float(m) ** alpha * batch.y[:, None] + phi.apply(xv)
    parent = G(x, batch.y, z, t, s)
    kids = G(batch.X, yk, batch.Z, batch.T, batch.S)
    return parent - float(m) ** (-alpha) * kids.sum(axis=1)


def discrepancy(G: SupersolutionCandidate, phi: TransformOp, alpha: float, c: ConfigPoint,
                W: Subspace | None = None) -> float:
    return float(discrepancy_batch(G, phi, alpha, c.batch(), W)[0])
