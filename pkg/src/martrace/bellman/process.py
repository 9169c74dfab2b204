"""The process built from a candidate along a martingale and a measure.

The y-coordinate of the process is m^{alpha n} (y0 + I_n) with I_n the partial
sums of the fractional integral of the transform m^{-alpha} phi.  With that
normalization the kid values are exactly m^alpha y + phi[x_vec]_j, so one step
of the process is one application of the main inequality for phi.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..frostman import frostman_sup, maximal_process
from ..subspace import TransformOp
from ..transform import i_alpha_partial
from ..tree import SimpleMartingale, TreeMeasure
from .candidates import SupersolutionCandidate

STEP_TOL = 1e-10


@dataclass
class ProcessTrace:
    """Per-level arrays of the process and the outcome of its checks."""

    alpha: float
    H: list = field(repr=False)
    expectations: list
    step_slack: list  # per level, min over atoms of H_n - E(H_{n+1} | F_n)
    supermartingale: bool
    telescoping_defect: float
    final_below_initial: bool

    @property
    def ok(self) -> bool:
        return self.supermartingale and self.final_below_initial and self.telescoping_defect < 1e-9


def process_transform(phi: TransformOp, alpha: float) -> TransformOp:
    m = phi.space.m
    return phi.scaled(float(m) ** (-alpha))


def process_coordinates(F: SimpleMartingale, nu: TreeMeasure, phi: TransformOp, alpha: float, y0: float):
    """Yield (x, y, z, t, s) arrays on every level, following the process."""
    m, N = F.m, F.depth
    I = i_alpha_partial(F, process_transform(phi, alpha), alpha)
    proc = maximal_process(nu, alpha)
    out = []
    for n in range(N + 1):
        x = F.level_values(n)
        y = float(m) ** (alpha * n) * (y0 + I.level_values(n))
        z = F.conditional_abs(n)
        t = nu.level_masses(n)
        s = proc.relative[n]
        out.append((x, y, z, t, s))
    return out, I


def supermartingale_trace(G: SupersolutionCandidate, phi: TransformOp, alpha: float, F: SimpleMartingale,
                          nu: TreeMeasure, y0: float = 0.0, tol: float = STEP_TOL) -> ProcessTrace:
    """H_n = m^{(1-alpha) n} G(F_n, y_n, E(|F_N| | F_n), nu(atom), s_n) on every atom.

    The step check is E(H_{n+1} | F_n) <= H_n + tol * max(1, |H_n|).
    """
    m, N = F.m, F.depth
    coords, _ = process_coordinates(F, nu, phi, alpha, y0)
    H = [float(m) ** ((1 - alpha) * n) * G(*c) for n, c in enumerate(coords)]
    slack, ok, tele = [], True, 0.0
    for n in range(N):
        cond = H[n + 1].reshape(-1, m).mean(axis=1)
        gap = H[n] - cond
        slack.append(float(gap.min()))
        ok &= bool(np.all(gap >= -tol * np.maximum(1.0, np.abs(H[n]))))
        y = coords[n][1]
        pred = float(m) ** alpha * y[:, None] + phi.apply(F.differences(n))
        got = coords[n + 1][1].reshape(-1, m)
        scale = max(1.0, float(np.abs(pred).max()))
        tele = max(tele, float(np.abs(got - pred).max()) / scale)
    exps = [float(h.mean()) for h in H]
    final_ok = exps[-1] <= exps[0] + tol * max(1.0, abs(exps[0]))
    return ProcessTrace(alpha, H, exps, slack, ok, tele, final_ok)


@dataclass
class TraceBoundReport:
    holds: bool
    integral: float
    bound: float
    terminal: float  # E H_N, which sits between the two
    estimate_constant: float | None  # G(x, 0, z, t, s) / (z s) when y0 = 0


def trace_bound_from_supersolution(G: SupersolutionCandidate, F: SimpleMartingale, nu: TreeMeasure,
                                   phi: TransformOp, alpha: float, y0: float = 0.0,
                                   tol: float = 1e-9) -> TraceBoundReport:
    """Check int |y0 + I F| dnu <= G(F_0, y0, E|F_N|, nu(T), frostman_sup) on one instance."""
    coords, I = process_coordinates(F, nu, phi, alpha, y0)
    integral = nu.integrate(np.abs(y0 + I.leaf_values()))
    x0 = F.level_values(0)[0]
    z0 = F.l1_norm()
    t0, s0 = nu.total, frostman_sup(nu, alpha)
    bound = float(G(x0, y0, z0, t0, s0))
    N = F.depth
    terminal = float((float(F.m) ** ((1 - alpha) * N) * G(*coords[N])).mean())
    est = None
    if y0 == 0.0 and z0 * s0 > 0:
        est = bound / (z0 * s0)
    holds = integral <= bound + tol * max(1.0, abs(bound))
    return TraceBoundReport(bool(holds), float(integral), bound, terminal, est)
