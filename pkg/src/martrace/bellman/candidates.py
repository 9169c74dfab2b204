"""Supersolution candidates G(x, y, z, t, s)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

KINDS = ("subcritical", "endpoint", "custom")


@dataclass(frozen=True, eq=False)
class SupersolutionCandidate:
    """A function on the Bellman domain, 1-homogeneous in (x, y, z) and in (t, s).

    ``subcritical`` params are (theta, M1, M2); ``endpoint`` params are
    (C1, C2, C3); ``custom`` wraps a vectorized callable func(x, y, z, t, s)
    with ``x`` of shape (..., ell).
    """

    kind: str
    params: tuple = ()
    func: Callable | None = field(default=None, repr=False)
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown candidate kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom candidates need a callable")
        if self.kind != "custom" and len(self.params) != 3:
            raise ValueError(f"{self.kind} candidates take three constants")
        if self.kind == "subcritical" and not 0 < self.params[0] < 1:
            raise ValueError("theta must lie in (0, 1)")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @classmethod
    def subcritical(cls, theta: float, M1: float, M2: float) -> "SupersolutionCandidate":
        return cls("subcritical", (theta, M1, M2))

    @classmethod
    def endpoint(cls, C1: float, C2: float, C3: float) -> "SupersolutionCandidate":
        return cls("endpoint", (C1, C2, C3))

    @classmethod
    def custom(cls, func: Callable, name: str = "custom") -> "SupersolutionCandidate":
        return cls("custom", (), func, name)

    def __call__(self, x, y, z, t, s) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y, z, t, s = (np.asarray(a, dtype=float) for a in (y, z, t, s))
        if self.kind == "custom":
            return np.asarray(self.func(x, y, z, t, s), dtype=float)
        ax = np.linalg.norm(x, axis=-1)
        base = np.abs(y) * t
        if self.kind == "subcritical":
            theta, M1, M2 = self.params
            return base + M1 * ax * t ** (1 - theta) * s**theta + M2 * (z - ax) * s
        C1, C2, C3 = self.params
        return base + C1 * ax * t + C2 * ax * np.sqrt(s * t) + C3 * (z - ax) * s

    @property
    def label(self) -> str:
        if self.kind == "custom":
            return self.name
        return f"{self.kind}{self.params}"

    def as_dict(self) -> dict:
        keys = {"subcritical": ("theta", "M1", "M2"), "endpoint": ("C1", "C2", "C3")}.get(self.kind, ())
        return {"kind": self.kind, "name": self.label, "constants": dict(zip(keys, self.params))}


def potential_candidate() -> SupersolutionCandidate:
    """(z - |x|) s, whose discrepancy is non-negative on the whole configuration space."""
    return SupersolutionCandidate.custom(
        lambda x, y, z, t, s: (z - np.linalg.norm(x, axis=-1)) * s, "potential")


def lp_candidate(theta: float) -> SupersolutionCandidate:
    """|x| t^{1-theta} s^theta alone."""
    return SupersolutionCandidate.custom(
        lambda x, y, z, t, s: np.linalg.norm(x, axis=-1) * t ** (1 - theta) * s**theta, f"lp({theta})")


def trace_candidate() -> SupersolutionCandidate:
    """|y| t alone."""
    return SupersolutionCandidate.custom(lambda x, y, z, t, s: np.abs(y) * t, "trace")
