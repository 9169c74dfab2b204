"""Plain-text and JSON formats for martingales, measures, subspaces, transforms and kernels.

Martingale/measure text: header ``m depth leaves ell``, then one line per leaf
with its digits followed by its values.  Subspace text: header ``m ell k`` then
k basis rows of m*ell floats; transforms use the same layout with k = m rows.
Kernel text: header ``mu d l``, then one line per group element with its
coordinates followed by 2l floats (real and imaginary parts interleaved).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .groupfourier import ConvKernel, group_elements
from .subspace import Subspace, TransformOp
from .tree import SimpleMartingale, TreeError, TreeMeasure, TreeShape, digits_array


class FormatError(ValueError):
    pass


def _lines(text: str) -> list[list[str]]:
    return [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def _header(rows: list[list[str]], n: int, what: str) -> list[int]:
    if not rows or len(rows[0]) != n:
        raise FormatError(f"{what}: header must hold {n} integers")
    try:
        return [int(x) for x in rows[0]]
    except ValueError as exc:
        raise FormatError(f"{what}: malformed header {rows[0]}") from exc


def _floats(row: list[str], what: str) -> list[float]:
    try:
        return [float(x) for x in row]
    except ValueError as exc:
        raise FormatError(f"{what}: malformed row {row}") from exc


# ---------------------------------------------------------------------------
# martingales and measures


def martingale_to_text(F: SimpleMartingale) -> str:
    s = F.shape
    out = [f"{s.m} {s.depth} {s.n_leaves} {s.ell}"]
    for dig, val in zip(digits_array(s), F.leaves):
        out.append(" ".join([*map(str, dig), *(repr(float(x)) for x in val)]))
    return "\n".join(out) + "\n"


def _leaf_table(text: str, what: str):
    rows = _lines(text)
    m, depth, n, ell = _header(rows, 4, what)
    body = rows[1:]
    if len(body) != n or n != m**depth:
        raise FormatError(f"{what}: expected {m**depth} leaf lines, got {len(body)}")
    shape = TreeShape(m, depth, ell)
    order = []
    vals = np.empty((n, ell))
    for i, r in enumerate(body):
        if len(r) != depth + ell:
            raise FormatError(f"{what}: leaf line {i + 1} needs {depth + ell} fields")
        dig = [int(x) for x in r[:depth]]
        idx = 0
        for dgt in dig:
            if not 1 <= dgt <= m:
                raise FormatError(f"{what}: digit {dgt} outside 1..{m}")
            idx = idx * m + dgt - 1
        order.append(idx)
        vals[idx] = _floats(r[depth:], what)
    if sorted(order) != list(range(n)):
        raise FormatError(f"{what}: leaves are not listed exactly once")
    return shape, vals


def martingale_from_text(text: str) -> SimpleMartingale:
    shape, vals = _leaf_table(text, "martingale")
    return SimpleMartingale.from_leaves(shape, vals)


def measure_to_text(nu: TreeMeasure) -> str:
    s = nu.shape
    out = [f"{s.m} {s.depth} {s.n_leaves} 1"]
    for dig, w in zip(digits_array(s), nu.masses):
        out.append(" ".join([*map(str, dig), repr(float(w))]))
    return "\n".join(out) + "\n"


def measure_from_text(text: str) -> TreeMeasure:
    shape, vals = _leaf_table(text, "measure")
    if shape.ell != 1:
        raise FormatError("measure: ell must be 1")
    try:
        return TreeMeasure(shape, vals[:, 0])
    except TreeError as exc:
        raise FormatError(str(exc)) from exc


def martingale_to_json(F: SimpleMartingale) -> dict:
    s = F.shape
    return {"m": s.m, "depth": s.depth, "ell": s.ell, "leaves": F.leaves.tolist()}


def martingale_from_json(d: dict) -> SimpleMartingale:
    return SimpleMartingale.from_leaves(TreeShape(d["m"], d["depth"], d["ell"]), np.array(d["leaves"]))


def measure_to_json(nu: TreeMeasure) -> dict:
    return {"m": nu.shape.m, "depth": nu.shape.depth, "masses": nu.masses.tolist()}


def measure_from_json(d: dict) -> TreeMeasure:
    return TreeMeasure(TreeShape(d["m"], d["depth"], 1), np.array(d["masses"]))


# ---------------------------------------------------------------------------
# subspaces and transforms


def _matrix_to_text(header: str, rows: np.ndarray) -> str:
    return "\n".join([header, *(" ".join(repr(float(x)) for x in r) for r in rows)]) + "\n"


def subspace_to_text(W: Subspace) -> str:
    return _matrix_to_text(f"{W.m} {W.ell} {W.dim}", W.basis)


def subspace_from_text(text: str, name: str = "", complex_structure: bool = False) -> Subspace:
    rows = _lines(text)
    m, ell, k = _header(rows, 3, "subspace")
    body = [_floats(r, "subspace") for r in rows[1:]]
    if len(body) != k or any(len(r) != m * ell for r in body):
        raise FormatError(f"subspace: expected {k} rows of {m * ell} floats")
    vecs = np.array(body).reshape(k, m, ell) if k else np.zeros((0, m, ell))
    return Subspace.from_spanning(m, ell, vecs, complex_structure=complex_structure, name=name)


def transform_to_text(phi: TransformOp) -> str:
    W = phi.space
    return _matrix_to_text(f"{W.m} {W.ell} {W.m}", phi.matrix)


def transform_from_text(text: str, W: Subspace) -> TransformOp:
    rows = _lines(text)
    m, ell, k = _header(rows, 3, "transform")
    if (m, ell, k) != (W.m, W.ell, W.m):
        raise FormatError(f"transform header {(m, ell, k)} does not match the space {(W.m, W.ell, W.m)}")
    body = [_floats(r, "transform") for r in rows[1:]]
    if len(body) != m or any(len(r) != m * ell for r in body):
        raise FormatError(f"transform: expected {m} rows of {m * ell} floats")
    return TransformOp(W, np.array(body), "file")


# ---------------------------------------------------------------------------
# kernels and symbols


def kernel_to_text(values: np.ndarray, mu: int, d: int) -> str:
    """``values`` of shape (mu^d, l), complex: a kernel or a symbol table."""
    values = np.asarray(values, dtype=complex)
    out = [f"{mu} {d} {values.shape[1]}"]
    for x, row in zip(group_elements(mu, d), values):
        nums = np.stack([row.real, row.imag], axis=1).reshape(-1)
        out.append(" ".join([*map(str, x), *(repr(float(v)) for v in nums)]))
    return "\n".join(out) + "\n"


def kernel_values_from_text(text: str) -> tuple[int, int, np.ndarray]:
    rows = _lines(text)
    mu, d, l = _header(rows, 3, "kernel")
    m = mu**d
    body = rows[1:]
    if len(body) != m:
        raise FormatError(f"kernel: expected {m} lines, got {len(body)}")
    vals = np.empty((m, l), dtype=complex)
    seen = set()
    for r in body:
        if len(r) != d + 2 * l:
            raise FormatError(f"kernel: lines need {d} coordinates and {2 * l} floats")
        x = [int(c) % mu for c in r[:d]]
        idx = 0
        for c in x:
            idx = idx * mu + c
        nums = np.array(_floats(r[d:], "kernel")).reshape(l, 2)
        vals[idx] = nums[:, 0] + 1j * nums[:, 1]
        seen.add(idx)
    if len(seen) != m:
        raise FormatError("kernel: group elements are not listed exactly once")
    return mu, d, vals


def kernel_from_text(text: str, domain: str = "time") -> ConvKernel:
    mu, d, vals = kernel_values_from_text(text)
    if domain == "time":
        return ConvKernel(mu, d, vals)
    if domain == "frequency":
        return ConvKernel.from_symbol(mu, d, vals)
    raise FormatError(f"unknown kernel domain {domain!r}")


# ---------------------------------------------------------------------------


def sniff_header(path: str | Path) -> list[str]:
    for ln in Path(path).read_text().splitlines():
        if ln.strip() and not ln.lstrip().startswith("#"):
            return ln.split()
    return []


def dump_json(obj, path: str | Path | None = None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, (tuple, set)):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
