"""Empirical probes: extremal blow-up martingales, trace ratios, Frostman necessity."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln

from .bellman.process import process_transform
from .frostman import frostman_measure_generator, frostman_sup
from .subspace import ExtremalVector, Subspace, TransformOp, compositions, extremal_vectors, tensor
from .transform import i_alpha_partial
from .tree import SimpleMartingale, TreeMeasure, TreeShape, digits_array

SNAP_TOL = 1e-12


class ExperimentError(ValueError):
    pass


# ---------------------------------------------------------------------------
# extremal martingales


def extremal_martingale(ev: ExtremalVector, a=None, N: int = 1) -> tuple[SimpleMartingale, TreeMeasure]:
    """F_n = prod_{k<=n} (1 + v_{digit k}) a and the uniform probability on the
    leaves whose digits all lie in the support."""
    m = ev.v.size
    ev.check(m)
    a = ev.a if a is None else np.asarray(a, dtype=float)
    shape = TreeShape(m, N, a.size)
    digits = digits_array(shape)  # (n_leaves, N), 1-based
    inside = np.all(ev.mask[digits - 1], axis=1) if N else np.ones(1, dtype=bool)
    height = float(m) ** (ev.alpha * N)
    leaves = np.where(inside[:, None], height * a[None, :], 0.0)
    F = SimpleMartingale.from_leaves(shape, leaves)
    masses = np.where(inside, 1.0 / inside.sum(), 0.0)
    return F, TreeMeasure(TreeShape(m, N, 1), masses)


def rank_one_witness_operator(W: Subspace, ev: ExtremalVector, u, a=None) -> TransformOp:
    """phi[w] = <w, v (x) a> / |v (x) a|^2 u, so phi[v (x) a] = u (u centered)."""
    a = ev.a if a is None else np.asarray(a, dtype=float)
    u = np.asarray(u, dtype=float)
    u = u - u.mean()
    w = tensor(ev.v, a).reshape(-1)
    return TransformOp(W, np.outer(u, w) / (w @ w), "rank-one witness")


# ---------------------------------------------------------------------------
# blow-up along extremal martingales


@dataclass
class BlowupReport:
    support: tuple
    alpha: float
    xi: list  # phi[v (x) a] on the support, one value per digit
    mean: float
    ns: list
    ratios: list
    slope: float | None
    intercept: float | None
    rows: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), **kw)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "ratio"])
        for n, r in zip(self.ns, self.ratios):
            w.writerow([n, repr(float(r))])
        return buf.getvalue()


def expected_abs_sum(xi, N: int) -> float:
    """E |xi_1 + ... + xi_N| for i.i.d. digits uniform over the entries of ``xi``.

    Exact sum over the multinomial distribution of digit counts.
    """
    xi = np.asarray(xi, dtype=float)
    h = xi.size
    if N == 0:
        return 0.0
    counts = compositions(N, h).astype(float)
    logp = gammaln(N + 1) - gammaln(counts + 1).sum(axis=1) - N * math.log(h)
    return float(np.exp(logp) @ np.abs(counts @ xi))


def expected_abs_sum_enumeration(xi, N: int) -> float:
    """Same quantity by listing all h^N digit strings."""
    xi = np.asarray(xi, dtype=float)
    sums = np.zeros(1)
    for _ in range(N):
        sums = (sums[:, None] + xi[None, :]).reshape(-1)
    return float(np.abs(sums).mean())


def support_values(phi: TransformOp, ev: ExtremalVector, a=None) -> np.ndarray:
    """phi[v (x) a] on the support digits, with rounding-level values snapped to 0."""
    a = ev.a if a is None else np.asarray(a, dtype=float)
    w = tensor(ev.v, a)
    out = phi.apply(w)[ev.mask]
    scale = max(1.0, phi.norm * float(np.linalg.norm(w)))
    return np.where(np.abs(out) <= SNAP_TOL * scale, 0.0, out)


def blowup_probe(W: Subspace, phi: TransformOp, alpha: float, N_list, extremal: ExtremalVector | None = None,
                 a=None) -> BlowupReport:
    """Ratios ||I F^N||_{L1(nu)} / ||F^N||_{L1} along the extremal martingale.

    On the support tree the transform is a sum of N i.i.d. digit values, and
    ||F^N||_{L1} = |a|, so the ratio is E|sum xi_j| / |a|.
    """
    if extremal is None:
        evs = extremal_vectors(W, alpha)
        if not evs:
            raise ExperimentError("space has no extremal vectors at this alpha (not geometric)")
        extremal = evs[0]
    a = extremal.a if a is None else np.asarray(a, dtype=float)
    xi = support_values(phi, extremal, a)
    na = float(np.linalg.norm(a))
    ns = [int(n) for n in N_list]
    ratios = [expected_abs_sum(xi, n) / na for n in ns]
    slope = intercept = None
    if len(ns) >= 2 and all(r > 0 for r in ratios):
        slope, intercept = (float(c) for c in np.polyfit(np.log(ns), np.log(ratios), 1))
    return BlowupReport(tuple(extremal.support), alpha, xi.tolist(), float(xi.mean()), ns, ratios, slope,
                        intercept, [{"N": n, "ratio": r} for n, r in zip(ns, ratios)])


def blowup_tree_ratio(phi: TransformOp, ev: ExtremalVector, N: int, a=None) -> float:
    """The same ratio through the tree: build F and nu, integrate the transform."""
    F, nu = extremal_martingale(ev, a, N)
    I = i_alpha_partial(F, phi, ev.alpha)
    return nu.integrate(np.abs(I.leaf_values())) / F.l1_norm()


# ---------------------------------------------------------------------------
# Frostman necessity


@dataclass
class FrostmanProbeReport:
    applicable: bool
    frostman_sup: float
    best_ratio: float
    level: int | None
    atom: int | None
    kid: int | None
    constant: float  # lower bound c with best_ratio >= c * (sup over levels >= 1)
    note: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def elementary_increments(phi: TransformOp) -> np.ndarray | None:
    """For each kid j, the increment w in W dual to the j-th output; None if some output vanishes on W."""
    W = phi.space
    rows = phi.effective  # (m, m ell); each row lies in W
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms <= 1e-12 * max(1.0, float(norms.max(initial=0.0)))):
        return None
    return rows.reshape(W.m, W.m, W.ell)


def frostman_necessity_probe(phi: TransformOp, alpha: float, nu: TreeMeasure) -> FrostmanProbeReport:
    """Best trace ratio over elementary martingales (one increment at one atom).

    For the increment w placed at a level-n atom, the ratio of the integral of
    |I F| against nu to ||F||_{L1} equals
    m^{(1-alpha) n} sum_k |phi[w]_k| nu(kid k) / avg_k |w_k|.
    """
    m, N = nu.shape.m, nu.shape.depth
    sup = frostman_sup(nu, alpha)
    wst = elementary_increments(phi)
    if wst is None:
        return FrostmanProbeReport(False, sup, math.nan, None, None, None, math.nan,
                                   "probe inapplicable: phi is degenerate (an output coordinate vanishes on W)")
    out = np.abs(np.einsum("kc,jc->jk", phi.effective, wst.reshape(m, -1)))  # |phi[w_j]_k|
    avg = np.linalg.norm(wst, axis=2).mean(axis=1)
    P = out / avg[:, None]
    best, arg = -math.inf, (None, None, None)
    for n in range(N):
        kids = nu.level_masses(n + 1).reshape(-1, m)
        r = float(m) ** ((1 - alpha) * n) * kids @ P.T  # (atoms, j)
        i = int(np.argmax(r))
        if r.flat[i] > best:
            best, arg = float(r.flat[i]), (n, i // m, i % m + 1)
    c = float(m) ** (alpha - 1) * float(np.diag(P).min())
    return FrostmanProbeReport(True, sup, best, *arg, c)


# ---------------------------------------------------------------------------
# random Sobolev martingales and empirical trace constants


def random_sobolev_martingale(W: Subspace, depth: int, rng: np.random.Generator, decay: float = 0.5,
                              x0=None) -> SimpleMartingale:
    """Each increment is drawn from the unit ball of W and scaled by decay^level."""
    m, ell = W.m, W.ell
    x0 = rng.standard_normal(ell) if x0 is None else np.asarray(x0, dtype=float)
    vals = x0[None, :]
    for n in range(depth):
        k = vals.shape[0]
        d = W.random_element(rng, k) * (rng.random(k) ** (1.0 / W.dim))[:, None, None] * decay**n
        vals = (vals[:, None, :] + d).reshape(k * m, ell)
    return SimpleMartingale.from_leaves(TreeShape(m, depth, ell), vals)


@dataclass
class TraceConstantReport:
    trials: int
    seed: int
    depth: int
    max_ratio: float
    mean_ratio: float
    certified_bound: float | None
    sandwich: bool | None
    note: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def trace_ratio(F: SimpleMartingale, nu: TreeMeasure, phi: TransformOp, alpha: float) -> float:
    """int |I F| dnu / (frostman_sup(nu) ||F||_1), transform in the process normalization."""
    den = frostman_sup(nu, alpha) * F.l1_norm()
    if den == 0:
        return 0.0
    I = i_alpha_partial(F, process_transform(phi, alpha), alpha)
    return nu.integrate(np.abs(I.leaf_values())) / den


def empirical_trace_constant(W: Subspace, phi: TransformOp, alpha: float, trials: int = 1000, seed: int = 0,
                             depth: int = 4, decay: float = 0.5,
                             certified_bound: float | None = None) -> TraceConstantReport:
    """Max of the trace ratio over random Sobolev martingales and Frostman measures."""
    rng = np.random.default_rng(seed)
    ratios = np.empty(trials)
    for i in range(trials):
        F = random_sobolev_martingale(W, depth, rng, decay)
        nu = frostman_measure_generator(alpha, depth, int(rng.integers(2**32)), m=W.m)
        ratios[i] = trace_ratio(F, nu, phi, alpha)
    mx = float(ratios.max(initial=0.0))
    sandwich = None if certified_bound is None else bool(mx <= certified_bound)
    return TraceConstantReport(trials, seed, depth, mx, float(ratios.mean()) if trials else 0.0,
                               certified_bound, sandwich, "transform m^-alpha phi (process normalization)")
