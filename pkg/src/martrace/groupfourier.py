"""Fourier analysis on (Z_mu)^d and the translation-invariant spaces W_grad, W_div.

Group elements are enumerated lexicographically with the first coordinate most
significant; element number ``j`` (0-based) is the kid with digit ``j + 1``.
C^l is identified with R^{2l} by interleaving (Re z_1, Im z_1, Re z_2, ...).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import null_space

from .subspace import Subspace, TransformOp, is_geometric

FIBER_TOL = 1e-10


class FourierError(ValueError):
    pass


# ---------------------------------------------------------------------------
# the group


def group_elements(mu: int, d: int) -> np.ndarray:
    if mu < 2 or d < 1:
        raise FourierError(f"need mu >= 2 and d >= 1, got mu={mu}, d={d}")
    return np.array(list(itertools.product(range(mu), repeat=d)), dtype=np.int64).reshape(mu**d, d)


def element_index(coords, mu: int) -> np.ndarray:
    """Inverse of :func:`group_elements` (vectorized over leading axes)."""
    c = np.mod(np.asarray(coords, dtype=np.int64), mu)
    idx = np.zeros(c.shape[:-1], dtype=np.int64)
    for k in range(c.shape[-1]):
        idx = idx * mu + c[..., k]
    return idx


@dataclass(frozen=True)
class GroupTables:
    mu: int
    d: int

    @property
    def m(self) -> int:
        return self.mu**self.d

    @cached_property
    def elements(self) -> np.ndarray:
        return group_elements(self.mu, self.d)

    @cached_property
    def add(self) -> np.ndarray:
        e = self.elements
        return element_index(e[:, None, :] + e[None, :, :], self.mu)

    @cached_property
    def sub(self) -> np.ndarray:
        e = self.elements
        return element_index(e[:, None, :] - e[None, :, :], self.mu)

    @cached_property
    def neg(self) -> np.ndarray:
        return element_index(-self.elements, self.mu)

    @cached_property
    def characters(self) -> np.ndarray:
        """E[gamma, x] = exp(-2 pi i gamma . x / mu)."""
        e = self.elements
        phase = np.mod(e @ e.T, self.mu)
        return np.exp(-2j * np.pi * phase / self.mu)

    def unit(self, j: int) -> np.ndarray:
        """Coordinates of e_j (1-based j)."""
        u = np.zeros(self.d, dtype=np.int64)
        u[j - 1] = 1
        return u


_TABLES: dict[tuple[int, int], GroupTables] = {}


def tables(mu: int, d: int) -> GroupTables:
    key = (mu, d)
    if key not in _TABLES:
        group_elements(mu, d)
        _TABLES[key] = GroupTables(mu, d)
    return _TABLES[key]


def dft(f, mu: int, d: int) -> np.ndarray:
    """f_hat(gamma) = sum_x exp(-2 pi i gamma.x / mu) f(x); f has shape (m,) or (m, l)."""
    return tables(mu, d).characters @ np.asarray(f, dtype=complex)


def idft(F, mu: int, d: int) -> np.ndarray:
    t = tables(mu, d)
    return t.characters.conj() @ np.asarray(F, dtype=complex) / t.m


def realify(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def complexify(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape[-1] % 2:
        raise FourierError("realified arrays have an even last axis")
    return r[..., 0::2] + 1j * r[..., 1::2]


def _orthonormal_complex(vectors, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal rows spanning the complex span of the given rows."""
    vec = np.asarray(vectors, dtype=complex)
    if vec.size == 0:
        return vec.reshape(0, vec.shape[-1] if vec.ndim > 1 else 0)
    _, s, vh = np.linalg.svd(vec, full_matrices=False)
    rank = int(np.sum(s > rtol * max(s[0], 1e-300))) if s[0] > 0 else 0
    return vh[:rank]


def complex_intersection(bases: list[np.ndarray], l: int) -> np.ndarray:
    """Orthonormal basis of the intersection of complex subspaces of C^l."""
    if not bases:
        return np.eye(l, dtype=complex)
    rows = []
    for b in bases:
        p = b.T @ b.conj() if b.size else np.zeros((l, l), complex)
        rows.append(np.eye(l) - p)
    ns = null_space(np.concatenate(rows), rcond=1e-9)
    return ns.T


def realified_span(functions: np.ndarray, complex_structure: bool = True, name: str = "") -> Subspace:
    """Real subspace spanned by complex functions (n, m, l) and their multiples by i."""
    f = np.asarray(functions, dtype=complex)
    n, m, l = f.shape
    real = realify(f).reshape(n, m * 2 * l)
    imag = realify(1j * f).reshape(n, m * 2 * l)
    return Subspace.from_spanning(m, 2 * l, np.concatenate([real, imag]), complex_structure, name)


def projector_gap(W1: Subspace, W2: Subspace) -> float:
    return float(np.linalg.norm(W1.projector - W2.projector, 2))


# ---------------------------------------------------------------------------
# translation-invariant spaces


@dataclass(frozen=True, eq=False)
class GroupSpace:
    """Translation-invariant W given by its fibers Omega(gamma) in C^l.

    ``fibers[g]`` is an orthonormal (rows) basis of Omega at group element g;
    the fiber at 0 must be trivial.
    """

    mu: int
    d: int
    l: int
    fibers: tuple = field(repr=False)
    kind: str = "custom"

    def __post_init__(self):
        m = self.mu**self.d
        if len(self.fibers) != m:
            raise FourierError(f"expected {m} fibers, got {len(self.fibers)}")
        fixed = []
        for b in self.fibers:
            b = np.asarray(b, dtype=complex).reshape(-1, self.l)
            fixed.append(_orthonormal_complex(b) if b.shape[0] else b)
        if fixed[0].shape[0]:
            raise FourierError("Omega(0) must be {0}")
        object.__setattr__(self, "fibers", tuple(fixed))

    @property
    def m(self) -> int:
        return self.mu**self.d

    @property
    def ell(self) -> int:
        return 2 * self.l

    @property
    def tables(self) -> GroupTables:
        return tables(self.mu, self.d)

    @property
    def name(self) -> str:
        return f"builtin:{self.kind}:mu={self.mu},d={self.d}"

    @cached_property
    def padded_fibers(self) -> np.ndarray:
        r = max(b.shape[0] for b in self.fibers)
        out = np.zeros((self.m, max(r, 1), self.l), dtype=complex)
        for g, b in enumerate(self.fibers):
            out[g, : b.shape[0]] = b
        return out

    @cached_property
    def subspace(self) -> Subspace:
        chars = self.tables.characters.conj()  # row gamma: x -> exp(+2 pi i gamma.x/mu)
        funcs = []
        for g, b in enumerate(self.fibers):
            for w in b:
                funcs.append(np.outer(chars[g], w) / math.sqrt(self.m))
        funcs = np.array(funcs, dtype=complex).reshape(-1, self.m, self.l)
        return realified_span(funcs, True, self.name)

    def fiber_residual(self, a) -> np.ndarray:
        """Relative distance of a (or a batch of a) from every fiber, shape (..., m)."""
        a = np.asarray(a, dtype=complex)
        coef = np.einsum("grl,...l->...gr", self.padded_fibers.conj(), a)
        res = a[..., None, :] - np.einsum("...gr,grl->...gl", coef, self.padded_fibers)
        na = np.linalg.norm(a, axis=-1)[..., None]
        return np.linalg.norm(res, axis=-1) / np.maximum(na, 1e-300)

    def in_fiber(self, f_hat) -> bool:
        """Whether f_hat(gamma) lies in Omega(gamma) for every gamma."""
        f_hat = np.asarray(f_hat, dtype=complex)
        scale = max(np.abs(f_hat).max(), 1e-300)
        for g, b in enumerate(self.fibers):
            v = f_hat[g]
            p = b.T @ (b.conj() @ v) if b.size else 0 * v
            if np.linalg.norm(v - p) > 1e-9 * scale * math.sqrt(self.m):
                return False
        return True


def _root(gamma: np.ndarray, mu: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.asarray(gamma) / mu) - 1.0


def build_W_grad(mu: int, d: int) -> GroupSpace:
    """Fibers C (e^{2 pi i gamma_j / mu} - 1)_j: the discrete gradients."""
    el = group_elements(mu, d)
    fibers = [np.zeros((0, d)) if not g.any() else _root(g, mu)[None, :] for g in el]
    return GroupSpace(mu, d, d, tuple(fibers), "grad")


def build_W_div(mu: int, d: int) -> GroupSpace:
    """Fibers {zeta : sum_j zeta_j (e^{2 pi i gamma_j / mu} - 1) = 0}: solenoidal fields."""
    el = group_elements(mu, d)
    fibers = []
    for g in el:
        if not g.any():
            fibers.append(np.zeros((0, d)))
        else:
            fibers.append(null_space(_root(g, mu)[None, :]).T)
    return GroupSpace(mu, d, d, tuple(fibers), "div")


def shift_matrix(mu: int, d: int, t) -> np.ndarray:
    """S with (S f)(x) = f(x + t)."""
    tb = tables(mu, d)
    m = tb.m
    s = np.zeros((m, m))
    tt = element_index(np.asarray(t), mu)
    s[np.arange(m), tb.add[:, tt]] = 1.0
    return s


def time_domain_W_grad(mu: int, d: int) -> Subspace:
    """Span of g_j(x) = f(x + e_j) - f(x) over complex f, realified."""
    tb = tables(mu, d)
    m = tb.m
    eye = np.eye(m)
    funcs = np.stack([shift_matrix(mu, d, tb.unit(j)) - eye for j in range(1, d + 1)], axis=-1)
    # funcs[x, y, j]: the gradient of delta_y, as a function of x
    return realified_span(np.transpose(funcs, (1, 0, 2)).astype(complex), True, "time:grad")


def divergence_matrix(mu: int, d: int) -> np.ndarray:
    """Complex (m, m d) matrix of g -> sum_j (g_j(x + e_j) - g_j(x))."""
    tb = tables(mu, d)
    m = tb.m
    div = np.zeros((m, m, d))
    for j in range(1, d + 1):
        div[:, :, j - 1] = shift_matrix(mu, d, tb.unit(j)) - np.eye(m)
    return div.reshape(m, m * d)


def time_domain_W_div(mu: int, d: int) -> Subspace:
    m = mu**d
    div = divergence_matrix(mu, d)
    means = np.kron(np.ones((1, m)), np.eye(d))
    ns = null_space(np.concatenate([div, means]))
    funcs = ns.T.reshape(-1, m, d).astype(complex)
    return realified_span(funcs, True, "time:div")


# ---------------------------------------------------------------------------
# fiber inverses and classification


@dataclass
class OmegaInverse:
    gammas: np.ndarray
    symmetric: np.ndarray


def omega_inverse(space: GroupSpace, a, tol: float = FIBER_TOL) -> OmegaInverse:
    a = np.asarray(a, dtype=complex).reshape(space.l)
    if np.linalg.norm(a) == 0:
        raise FourierError("a must be non-zero")
    hit = space.fiber_residual(a) < tol
    sym = hit & hit[space.tables.neg]
    return OmegaInverse(np.flatnonzero(hit), np.flatnonzero(sym))


def structured_directions(l: int) -> np.ndarray:
    """All non-zero vectors with entries in {-1, 0, 1}, one per projective class."""
    out = []
    for t in itertools.product((-1, 0, 1), repeat=l):
        t = np.array(t)
        nz = np.flatnonzero(t)
        if nz.size and t[nz[0]] == 1:
            out.append(t)
    return np.array(out, dtype=complex)


def is_subgroup(indices, mu: int, d: int) -> bool:
    s = set(int(i) for i in indices)
    if 0 not in s:
        return False
    tb = tables(mu, d)
    return all(int(tb.sub[x, y]) in s for x in s for y in s)


def annihilator(indices, mu: int, d: int) -> np.ndarray:
    """Gamma_perp = {x : gamma.x = 0 mod mu for all gamma in Gamma}."""
    el = group_elements(mu, d)
    g = el[np.asarray(list(indices), dtype=np.int64)]
    ok = np.all(np.mod(el @ g.T, mu) == 0, axis=1)
    return np.flatnonzero(ok)


def cosets(indices, mu: int, d: int) -> list[tuple[int, ...]]:
    tb = tables(mu, d)
    sub = np.asarray(sorted(int(i) for i in indices))
    seen, out = set(), []
    for x in range(tb.m):
        c = tuple(sorted(int(v) for v in tb.add[x, sub]))
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out


@dataclass
class FourierClassification:
    k: int
    alpha: float
    bound: int
    max_count: int
    bound_holds: bool
    subgroups: list
    supports: list
    counterexample: list | None
    samples: int
    crosscheck: dict | None = None
    notes: list = field(default_factory=list)

    @property
    def geometric(self) -> bool:
        return self.bound_holds and bool(self.subgroups)

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "alpha": self.alpha,
            "bound": self.bound,
            "max_symmetric_count": self.max_count,
            "bound_holds": self.bound_holds,
            "geometric": self.geometric,
            "subgroups": [list(g) for g in self.subgroups],
            "extremal_supports": [list(s) for s in self.supports],
            "counterexample": self.counterexample,
            "sampled_directions": self.samples,
            "crosscheck": self.crosscheck,
            "notes": list(self.notes),
        }


def classify_geometric_by_fourier(space: GroupSpace, k: int, samples: int = 10_000, seed: int = 0,
                                  crosscheck_limit: int = 16) -> FourierClassification:
    """Check the symmetric-fiber bound for order k/d and read off the extremal supports.

    Sampled directions: the structured catalog (all {-1,0,1} vectors, which
    contains every e_j and e_i - e_j) plus ``samples`` random complex vectors.
    This is a sampled verification over a in C^l, not a proof.
    """
    mu, d, l = space.mu, space.d, space.l
    bound = mu**k - 1
    structured = structured_directions(l)
    rng = np.random.default_rng(seed)
    rand = rng.standard_normal((samples, l)) + 1j * rng.standard_normal((samples, l))
    dirs = np.concatenate([structured, rand])
    hit = space.fiber_residual(dirs) < FIBER_TOL
    sym = hit & hit[:, space.tables.neg]
    counts = sym.sum(axis=1)
    max_count = int(counts.max())
    bad = np.flatnonzero(counts > bound)
    counterexample = None if bad.size == 0 else dirs[bad[0]].tolist()
    subgroups, supports = [], []
    for i in np.flatnonzero(counts == bound):
        members = np.concatenate([[0], np.flatnonzero(sym[i])])
        if not is_subgroup(members, mu, d):
            continue
        gamma = tuple(sorted(int(x) for x in members))
        if gamma in subgroups:
            continue
        subgroups.append(gamma)
        for c in cosets(annihilator(gamma, mu, d), mu, d):
            s = tuple(x + 1 for x in c)
            if s not in supports:
                supports.append(s)
    supports.sort()
    rep = FourierClassification(k, k / d, bound, max_count, counterexample is None, subgroups, supports,
                                None if counterexample is None else [str(z) for z in counterexample],
                                int(dirs.shape[0]))
    if space.kind == "div" and mu < 4:
        rep.notes.append("outside hypothesis mu >= 4")
    if space.m <= crosscheck_limit:
        geo = is_geometric(space.subspace)
        sub_supports = sorted(w.support for w in geo.witnesses)
        rep.crosscheck = {
            "geometric": geo.geometric,
            "alpha": geo.alpha,
            "alpha_agrees": geo.alpha is not None and abs(geo.alpha - k / d) < 1e-6,
            "supports_agree": sub_supports == supports,
        }
    return rep


def sab_fiber_count(a, b: complex, mu: int, tol: float = 1e-9) -> int:
    """#{zeta in (Z_mu)^d : sum_j a_j (e^{2 pi i zeta_j/mu} - 1) = b}.

    Exhaustive for d <= 3, slicing over the first coordinate above that.  For
    d = 2 the circle-intersection dichotomy is checked on the result.
    """
    a = np.asarray(a, dtype=complex).reshape(-1)
    if np.any(a == 0):
        raise FourierError("all coordinates of a must be non-zero")
    scale = max(1.0, float(np.abs(a).sum()), abs(b))
    count = _sab(a, complex(b), mu, tol * scale)
    if a.size == 2 and count > 2:
        if not (sab_exceptional(a, b, mu) and count == mu):
            raise FourierError(f"circle dichotomy violated: count {count} for a={a}, b={b}")
    return count


def _sab(a: np.ndarray, b: complex, mu: int, tol: float) -> int:
    roots = np.exp(2j * np.pi * np.arange(mu) / mu) - 1.0
    if a.size <= 3:
        vals = np.zeros(1, dtype=complex)
        for aj in a:
            vals = (vals[:, None] + aj * roots[None, :]).reshape(-1)
        return int(np.sum(np.abs(vals - b) <= tol))
    return sum(_sab(a[1:], b - a[0] * r, mu, tol) for r in roots)


def sab_exceptional(a, b: complex, mu: int, tol: float = 1e-9) -> bool:
    """Coinciding circles: b = -a1 - a2 and -a2/a1 is a mu-th root of unity."""
    a1, a2 = complex(a[0]), complex(a[1])
    if abs(b + a1 + a2) > tol * max(1.0, abs(a1) + abs(a2)):
        return False
    r = -a2 / a1
    if abs(abs(r) - 1.0) > tol:
        return False
    k = np.angle(r) * mu / (2 * np.pi)
    return abs(k - round(k)) < 1e-7


@dataclass
class NonLocalFourierReport:
    nonlocal_: bool
    line_dim: int
    contains_a: bool
    coset_dims: list

    def as_dict(self) -> dict:
        return {"nonlocal": self.nonlocal_, "line_dim": self.line_dim, "contains_a": self.contains_a,
                "coset_intersection_dims": self.coset_dims}


def check_nonlocal_by_fourier(space: GroupSpace, gamma, a) -> NonLocalFourierReport:
    """Coset criterion: the fibers over Gamma \\ {0} meet in C a, over other cosets in {0}."""
    a = np.asarray(a, dtype=complex).reshape(space.l)
    members = sorted(int(g) for g in gamma)
    inv = omega_inverse(space, a)
    if sorted(int(g) for g in inv.gammas) != [g for g in members if g != 0]:
        raise FourierError("Omega^{-1}(a) differs from Gamma without 0")
    inner = complex_intersection([space.fibers[g] for g in members if g != 0], space.l)
    contains = False
    if inner.shape[0]:
        p = inner.T @ inner.conj()
        contains = bool(np.linalg.norm(a - p @ a) < 1e-9 * np.linalg.norm(a))
    dims = []
    for c in cosets(members, space.mu, space.d):
        if 0 in c:
            continue
        dims.append(int(complex_intersection([space.fibers[g] for g in c], space.l).shape[0]))
    ok = inner.shape[0] == 1 and contains and all(x == 0 for x in dims)
    return NonLocalFourierReport(ok, int(inner.shape[0]), contains, dims)


# ---------------------------------------------------------------------------
# kernels and symbols


@dataclass(frozen=True, eq=False)
class ConvKernel:
    """Convolution kernel K : (Z_mu)^d -> C^l acting by phi[f](x) = Re sum_y <K(x-y), f(y)>."""

    mu: int
    d: int
    K: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.K, dtype=complex)
        if k.ndim == 1:
            k = k[:, None]
        if k.shape[0] != self.mu**self.d:
            raise FourierError(f"kernel needs {self.mu**self.d} values, got {k.shape[0]}")
        k = k.copy()
        k.flags.writeable = False
        object.__setattr__(self, "K", k)

    @property
    def l(self) -> int:
        return self.K.shape[1]

    @property
    def centered(self) -> np.ndarray:
        return self.K - self.K.mean(axis=0)

    @property
    def symbol(self) -> np.ndarray:
        """M(gamma) = K_hat(-gamma), so that F[phi f](gamma) = <M(gamma), f_hat(gamma)>
        for the complex-valued convolution."""
        kh = dft(self.K, self.mu, self.d)
        return kh[tables(self.mu, self.d).neg]

    @classmethod
    def from_symbol(cls, mu: int, d: int, M) -> "ConvKernel":
        M = np.asarray(M, dtype=complex)
        t = tables(mu, d)
        # K_hat(gamma) = M(-gamma)
        return cls(mu, d, idft(M[t.neg], mu, d))


def kernel_phi(space: GroupSpace, kernel: ConvKernel) -> TransformOp:
    if (kernel.mu, kernel.d, kernel.l) != (space.mu, space.d, space.l):
        raise FourierError("kernel and space live on different groups")
    sub = space.tables.sub
    mat = realify(kernel.K[sub]).reshape(space.m, space.m * space.ell)
    return TransformOp(space.subspace, mat, "convolution")


def symbol_to_phi(space: GroupSpace, M) -> TransformOp:
    """Translation-invariant phi with symbol M, after projecting M(gamma) onto Omega(gamma)."""
    M = np.asarray(M, dtype=complex).reshape(space.m, space.l)
    proj = np.zeros_like(M)
    for g, b in enumerate(space.fibers):
        if b.size:
            proj[g] = b.T @ (b.conj() @ M[g])
    return kernel_phi(space, ConvKernel.from_symbol(space.mu, space.d, proj))


def phi_averaging(space: GroupSpace, raw) -> TransformOp:
    """Average phi over translations: (1/m) sum_t S_{-t} phi S_t."""
    A = raw.matrix if isinstance(raw, TransformOp) else np.asarray(raw, dtype=float)
    m, ell = space.m, space.ell
    A = A.reshape(m, m, ell)
    add = space.tables.add
    out = np.zeros_like(A)
    for t in range(m):
        out += A[add[:, t]][:, add[:, t], :]
    return TransformOp(space.subspace, (out / m).reshape(m, m * ell), "averaged")


def shift_realified(space: GroupSpace, w, t) -> np.ndarray:
    """(S_t w)(x) = w(x + t) for w of shape (..., m, ell)."""
    idx = space.tables.add[:, element_index(np.asarray(t), space.mu)]
    return np.asarray(w)[..., idx, :]


def kernel_from_phi(space: GroupSpace, phi: TransformOp) -> ConvKernel:
    """Kernel of a translation-invariant phi, read off its first row, up to the
    part invisible on W: the result reproduces phi on W."""
    row = phi.effective[0].reshape(space.m, space.ell)
    neg = space.tables.neg
    # phi[f](0) = Re sum_y <K(-y), f(y)>
    return ConvKernel(space.mu, space.d, complexify(row)[neg])


# ---------------------------------------------------------------------------
# cancellation conditions


def _grad_constraints(mu: int, d: int) -> tuple[list, np.ndarray]:
    el = group_elements(mu, d)
    m = mu**d
    labels, rows = [], []
    for r in range(1, d + 1):
        for D in itertools.combinations(range(d), r):
            mask = np.mod(el[:, list(D)].sum(axis=1), mu) == 0
            row = np.zeros((m, d))
            row[np.ix_(mask, list(D))] = 1.0
            labels.append(tuple(j + 1 for j in D))
            rows.append(row.reshape(-1))
    return labels, np.array(rows)


def _div_constraints(mu: int, d: int) -> tuple[list, np.ndarray]:
    el = group_elements(mu, d)
    m = mu**d
    labels, rows = [], []
    for j in range(d):
        row = np.zeros((m, d))
        on_axis = np.all(np.delete(el, j, axis=1) == 0, axis=1)
        row[on_axis, j] = 1.0
        labels.append(("axis", j + 1))
        rows.append(row.reshape(-1))
    for i, j in itertools.combinations(range(d), 2):
        row = np.zeros((m, d))
        for y in range(mu):
            x = np.zeros(d, dtype=np.int64)
            x[j], x[i] = y, -y
            idx = int(element_index(x, mu))
            row[idx, j] += 1.0
            row[idx, i] -= 1.0
        labels.append(("diagonal", i + 1, j + 1))
        rows.append(row.reshape(-1))
    return labels, np.array(rows)


def cancellation_constraints(kind: str, mu: int, d: int) -> tuple[list, np.ndarray]:
    """Labels and (n, m l) real rows; the condition is rows @ vec(centered K) = 0 over C."""
    if kind == "grad":
        return _grad_constraints(mu, d)
    if kind == "div":
        return _div_constraints(mu, d)
    raise FourierError(f"unknown space kind {kind!r}")


def _cancellation(kernel: ConvKernel, kind: str, rtol: float) -> dict:
    labels, rows = cancellation_constraints(kind, kernel.mu, kernel.d)
    kc = kernel.centered.reshape(-1)
    sums = rows @ kc
    scale = max(float(np.linalg.norm(kernel.K)), 1e-300)
    return {lab: bool(abs(s) <= rtol * scale) for lab, s in zip(labels, sums)}


def cancellation_grad(kernel: ConvKernel, mu: int, d: int, rtol: float = 1e-9) -> dict:
    """Per non-empty D: sum over {x : sum_{j in D} x_j = 0} of sum_{k in D} K_k(x) vanishes.

    The pairing with e_D is taken over C (all real parts of Hermitian pairings
    with e_D and i e_D at once); the kernel is centered first, which does not
    change phi on W.
    """
    if (kernel.mu, kernel.d) != (mu, d):
        raise FourierError("kernel lives on a different group")
    return _cancellation(kernel, "grad", rtol)


def cancellation_div(kernel: ConvKernel, mu: int, d: int, rtol: float = 1e-9) -> dict:
    """Axis sums of K_j and diagonal sums of K_j - K_i vanish (centered kernel)."""
    if (kernel.mu, kernel.d) != (mu, d):
        raise FourierError("kernel lives on a different group")
    return _cancellation(kernel, "div", rtol)


def project_onto_cancellation(kernel: ConvKernel, kind: str, labels=None) -> ConvKernel:
    """Orthogonal projection of K onto the kernels satisfying the selected conditions."""
    labs, rows = cancellation_constraints(kind, kernel.mu, kernel.d)
    if labels is not None:
        keep = [i for i, lab in enumerate(labs) if lab in set(labels)]
        rows = rows[keep]
    m, l = kernel.K.shape
    center = np.kron(np.eye(m) - 1.0 / m, np.eye(l))
    c = rows @ center
    k = kernel.K.reshape(-1)
    if c.shape[0]:
        k = k - np.linalg.pinv(c) @ (c @ k)
    return ConvKernel(kernel.mu, kernel.d, k.reshape(m, l))


def random_kernel(mu: int, d: int, rng: np.random.Generator, l: int | None = None) -> ConvKernel:
    l = d if l is None else l
    m = mu**d
    return ConvKernel(mu, d, rng.standard_normal((m, l)) + 1j * rng.standard_normal((m, l)))


def parse_builtin(spec: str) -> GroupSpace:
    """Parse ``builtin:{grad|div}:mu=M,d=D``."""
    parts = spec.split(":")
    if len(parts) != 3 or parts[0] != "builtin" or parts[1] not in ("grad", "div"):
        raise FourierError(f"malformed builtin space {spec!r}")
    try:
        kv = dict(item.split("=") for item in parts[2].split(","))
        mu, d = int(kv["mu"]), int(kv["d"])
    except (KeyError, ValueError) as exc:
        raise FourierError(f"malformed builtin space {spec!r}") from exc
    return build_W_grad(mu, d) if parts[1] == "grad" else build_W_div(mu, d)
