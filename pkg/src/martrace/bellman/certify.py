"""Sampled certification of the main inequality and related checks.

A certificate here is a sampled one: the minimum of the normalized discrepancy
over a stratified sample plus local descent, never a proof.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..subspace import ExtremalVector, Subspace, TransformOp, rank_one_distance_batch
from .candidates import SupersolutionCandidate
from .config import ConfigBatch, discrepancy_batch
from .sampler import DEFAULT_WEIGHTS, STRATA, Parametrization, RankOneLibrary, Sampler, pattern_search, rank_one_library

CERTIFY_THRESHOLD = -1e-9


class ConfigurationError(ValueError):
    pass


@dataclass
class CertificationReport:
    candidate: dict
    alpha: float
    space: str
    budget: int
    seed: int
    jobs: int
    min_found: float
    witness: dict | None
    certified: bool
    threshold: float
    strata: dict
    descent: dict
    nan_count: int = 0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["constants"] = self.candidate.get("constants", {})
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), **kw)


def _allocate(budget: int, weights: dict, chunk: int) -> list[tuple[str, int]]:
    total = sum(weights.values())
    tasks = []
    for name in STRATA:
        n = int(round(budget * weights.get(name, 0.0) / total))
        while n > 0:
            tasks.append((name, min(chunk, n)))
            n -= chunk
    return tasks


def certify_main_inequality(G: SupersolutionCandidate, W: Subspace, phi: TransformOp, alpha: float,
                            sampler_budget: int = 1_000_000, seed: int = 0, jobs: int = 1,
                            extremals: list[ExtremalVector] | None = None,
                            library: RankOneLibrary | None = None, weights: dict | None = None,
                            chunk: int = 50_000, descent_fraction: float = 0.01, descent_cap: int = 2000,
                            sweeps: int = 80, threshold: float = CERTIFY_THRESHOLD) -> CertificationReport:
    """Minimize the normalized discrepancy of G over sampled configuration points.

    Samples are drawn per stratum in fixed-size chunks, each with its own child
    of ``SeedSequence(seed)``, so results do not depend on ``jobs``.  The best
    ``descent_fraction`` of all samples (at most ``descent_cap``) are then
    refined by batched pattern search.
    """
    if sampler_budget <= 0:
        raise ConfigurationError("sampler budget must be positive")
    lib = library if library is not None else rank_one_library(W, extremals)
    weights = dict(DEFAULT_WEIGHTS if weights is None else weights)
    if len(lib) == 0:
        weights["generic"] = weights.get("generic", 0.0) + weights.pop("extremal", 0.0)
    sampler = Sampler(W, alpha, lib)
    par = Parametrization(W, alpha)
    tasks = _allocate(sampler_budget, weights, chunk)
    if not tasks:
        raise ConfigurationError("sampler produced no valid points")
    root = np.random.SeedSequence(seed)
    seeds = root.spawn(len(tasks) + 1)

    def run(i):
        stratum, n = tasks[i]
        rng = np.random.default_rng(seeds[i])
        b = sampler.draw(stratum, rng, n).normalized(alpha)
        vals = discrepancy_batch(G, phi, alpha, b, W, check=True)
        nan = np.isnan(vals)
        vals = np.where(nan, np.inf, vals)
        keep = min(n, max(1, int(math.ceil(n * descent_fraction))))
        idx = np.argpartition(vals, keep - 1)[:keep]
        return stratum, n, int(nan.sum()), vals[idx], b.take(idx)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(run, range(len(tasks))))
    else:
        results = [run(i) for i in range(len(tasks))]

    strata = {}
    for stratum, n, nan, vals, _ in results:
        st = strata.setdefault(stratum, {"count": 0, "min": math.inf})
        st["count"] += n
        st["min"] = min(st["min"], float(vals.min()))
    nan_count = sum(r[2] for r in results)
    vals = np.concatenate([r[3] for r in results])
    pts = ConfigBatch.concat([r[4] for r in results])
    order = np.argsort(vals, kind="stable")
    n_desc = min(len(order), descent_cap, max(1, int(math.ceil(sampler_budget * descent_fraction))))
    start = pts.take(order[:n_desc])
    best_val, best_pt = float(vals[order[0]]), pts.point(int(order[0]))

    def f(P):
        out = discrepancy_batch(G, phi, alpha, par.decode(P), W, check=False)
        return np.where(np.isnan(out), np.inf, out)

    P0 = par.encode(start)
    P, pv = pattern_search(f, P0, np.random.default_rng(seeds[-1]), sweeps=sweeps)
    k = int(np.argmin(pv))
    descent = {"starts": int(n_desc), "sweeps": sweeps, "start_min": best_val, "min": float(pv[k])}
    if pv[k] < best_val:
        dec = par.decode(P[k : k + 1])
        best_val, best_pt = float(pv[k]), dec.point(0)
    return CertificationReport(
        candidate=G.as_dict(), alpha=alpha, space=W.describe(), budget=int(sampler_budget), seed=seed,
        jobs=jobs, min_found=best_val, witness=best_pt.as_dict(), certified=best_val >= threshold,
        threshold=threshold, strata=strata, descent=descent, nan_count=nan_count)


# ---------------------------------------------------------------------------
# constant search


@dataclass
class SearchReport:
    kind: str
    found: bool
    constants: tuple | None
    certification: dict | None
    tried: list = field(default_factory=list)
    message: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


RATIOS = (10.0, 100.0, 1000.0)


def default_ladders(kind: str) -> list[tuple]:
    if kind == "endpoint":
        return [(c1, c1 * r1, c1 * r1 * r2) for c1 in (1.0, 10.0, 100.0) for r1 in RATIOS for r2 in RATIOS]
    if kind == "subcritical":
        return [(th, m1, m1 * r) for th in (0.5, 0.75, 0.9) for m1 in (10.0, 100.0, 1000.0) for r in RATIOS]
    raise ConfigurationError(f"constant search supports subcritical and endpoint, not {kind!r}")


def make_candidate(kind: str, constants: tuple) -> SupersolutionCandidate:
    if kind == "endpoint":
        return SupersolutionCandidate.endpoint(*constants)
    if kind == "subcritical":
        return SupersolutionCandidate.subcritical(*constants)
    raise ConfigurationError(f"unknown kind {kind!r}")


def search_constants(kind: str, W: Subspace, phi: TransformOp, alpha: float, budget: int, seed: int = 0,
                     screen_budget: int | None = None, ladders: list[tuple] | None = None, jobs: int = 1,
                     extremals: list[ExtremalVector] | None = None) -> SearchReport:
    """Screen every ladder with a small budget, then run the full budget on the
    ladders that passed, in ladder order; the first certified one is returned."""
    ladders = default_ladders(kind) if ladders is None else ladders
    if budget <= 0:
        return SearchReport(kind, False, None, None, [], "zero budget: nothing sampled")
    lib = rank_one_library(W, extremals)
    screen = min(budget, 20_000) if screen_budget is None else min(screen_budget, budget)
    tried, passed = [], []
    for consts in ladders:
        G = make_candidate(kind, consts)
        rep = certify_main_inequality(G, W, phi, alpha, screen, seed, jobs, library=lib,
                                      descent_cap=200, sweeps=40)
        tried.append({"constants": list(consts), "screen_min": rep.min_found})
        if rep.certified:
            passed.append((consts, len(tried) - 1))
    best = max(tried, key=lambda t: t["screen_min"]) if tried else None
    for consts, i in passed:
        G = make_candidate(kind, consts)
        rep = certify_main_inequality(G, W, phi, alpha, budget, seed, jobs, library=lib)
        tried[i]["full_min"] = rep.min_found
        if rep.certified:
            return SearchReport(kind, True, tuple(consts), rep.as_dict(), tried, "certified")
    best_min = max((t.get("full_min", t["screen_min"]) for t in tried), default=None)
    return SearchReport(kind, False, None, None, tried,
                        f"no ladder certified; best minimum {best_min!r} at {best and best['constants']}")


# ---------------------------------------------------------------------------
# boundary and upper estimates


@dataclass
class BoundaryReport:
    holds: bool
    min_found: float
    witness: dict | None


def check_boundary(G: SupersolutionCandidate, ell: int = 2, samples: int = 100_000, seed: int = 0,
                   tol: float = 1e-12) -> BoundaryReport:
    """Sampled min of G(x, y, |x|, t, s) - |y| t over |x| + |y| + z = 1, s = 1."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((samples, ell)) * np.exp(rng.uniform(-12, 2, (samples, 1)))
    y = rng.standard_normal(samples) * np.exp(rng.uniform(-12, 2, samples))
    y = np.where(rng.random(samples) < 0.1, 0.0, y)
    ax = np.linalg.norm(x, axis=1)
    lam = 2 * ax + np.abs(y)
    x, y = x / lam[:, None], y / lam
    z = np.linalg.norm(x, axis=1)
    s = np.ones(samples)
    t = rng.random(samples) * np.where(rng.random(samples) < 0.1, 1e-6, 1.0)
    t = np.where(rng.random(samples) < 0.1, 1.0, t)
    gap = G(x, y, z, t, s) - np.abs(y) * t
    k = int(np.nanargmin(gap))
    worst = float(gap[k])
    holds = worst >= -tol
    wit = None if holds else {"x": x[k].tolist(), "y": float(y[k]), "z": float(z[k]), "t": float(t[k]), "s": 1.0}
    return BoundaryReport(holds, worst, wit)


@dataclass
class UpperEstimateReport:
    bounded: bool
    constant: float
    witness: dict | None


def check_estimate_from_above(G: SupersolutionCandidate, ell: int = 2, samples: int = 100_000, seed: int = 0,
                              limit: float = 1e8) -> UpperEstimateReport:
    """Sampled sup of G(x, 0, z, t, s) / (z s) over |x| <= z = 1, t <= s = 1."""
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((samples, ell))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = np.exp(rng.uniform(np.log(1e-12), 0.0, samples))
    r = np.where(rng.random(samples) < 0.1, 1.0, r)
    x = d * r[:, None]
    z = np.ones(samples)
    s = np.ones(samples)
    t = np.exp(rng.uniform(np.log(1e-12), 0.0, samples))
    t = np.where(rng.random(samples) < 0.1, 1.0, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = G(x, np.zeros(samples), z, t, s) / (z * s)
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    k = int(np.argmax(ratio))
    c = float(ratio[k])
    bounded = bool(np.isfinite(c) and c <= limit)
    wit = {"x": x[k].tolist(), "z": 1.0, "t": float(t[k]), "s": 1.0}
    return UpperEstimateReport(bounded, c, wit)


# ---------------------------------------------------------------------------
# lower bound near extremal configurations


@dataclass
class NearExtremalReport:
    M: float
    radius: float
    samples: int
    used: int
    min_ratio: float
    quantiles: dict
    exact_extremal_discrepancy: float
    witness: dict | None


def near_extremal_candidate(M: float) -> SupersolutionCandidate:
    return SupersolutionCandidate.custom(
        lambda x, y, z, t, s: np.linalg.norm(x, axis=-1) * np.sqrt(s * t) + M * (z - np.linalg.norm(x, axis=-1)) * s,
        f"sqrt-term+{M}*potential")


def discrepancy_lower_bound_near_extremal(W: Subspace, phi: TransformOp, alpha: float, M: float,
                                          extremals: list[ExtremalVector], radius: float = 1e-2,
                                          samples: int = 20_000, seed: int = 0) -> NearExtremalReport:
    """Sample configurations x_j = (1 + v_j) a + delta w_j with <x, a> = 1 and
    report min of the discrepancy of |x| sqrt(st) + M (z - |x|) s over D sqrt(st),
    with D the distance to the nearest extremal class."""
    if not extremals:
        raise ConfigurationError("no extremal vectors")
    rng = np.random.default_rng(seed)
    G = near_extremal_candidate(M)
    m, ell = W.m, W.ell
    pick = rng.integers(0, len(extremals), samples)
    X = np.empty((samples, m, ell))
    for i, p in enumerate(pick):
        ev = extremals[p]
        c = rng.standard_normal(ev.directions.shape[0])
        a = c @ ev.directions / np.linalg.norm(c)
        X[i] = np.outer(1.0 + ev.v, a)
    delta = np.exp(rng.uniform(np.log(1e-6), np.log(radius), samples))
    w = W.random_element(rng, samples)
    X = X + delta[:, None, None] * w
    slack = np.where(rng.random((samples, m)) < 0.5, 0.0,
                     np.exp(rng.uniform(np.log(1e-8), np.log(radius), (samples, m))))
    Z = np.linalg.norm(X, axis=2) + slack
    S = np.exp(rng.uniform(np.log(1e-3), 0.0, (samples, m)))
    T = S * rng.random((samples, m))
    b = ConfigBatch(X, np.zeros(samples), Z, T, S)
    disc = discrepancy_batch(G, phi, alpha, b, W)
    D = np.full(samples, np.inf)
    for ev in extremals:
        D = np.minimum(D, rank_one_distance_batch(X, ev)[0])
    _, _, t, s = b.derived(alpha)
    denom = D * np.sqrt(s * t)
    ok = (D >= 1e-8) & (s * t > 0)
    ratio = disc[ok] / denom[ok]
    # at the exact extremal configuration D = 0, so only the sign of the discrepancy is informative
    ev = extremals[0]
    exact = ConfigBatch(np.outer(1.0 + ev.v, ev.a)[None], np.zeros(1), np.abs(1.0 + ev.v)[None] * np.linalg.norm(ev.a),
                        np.full((1, m), 0.5 * float(m) ** (alpha - 1)), np.full((1, m), float(m) ** (alpha - 1)))
    exact_disc = float(discrepancy_batch(G, phi, alpha, exact, W)[0])
    if ratio.size == 0:
        return NearExtremalReport(M, radius, samples, 0, math.nan, {}, exact_disc, None)
    k = int(np.argmin(ratio))
    idx = np.flatnonzero(ok)[k]
    q = {str(p): float(np.quantile(ratio, p)) for p in (0.0, 0.01, 0.5)}
    return NearExtremalReport(M, radius, samples, int(ratio.size), float(ratio[k]), q, exact_disc,
                              b.point(int(idx)).as_dict() | {"D": float(D[idx])})
