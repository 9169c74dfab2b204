"""Command-line driver: ``martrace {classify,certify,blowup}``.

Exit codes: 0 success or certified, 1 property refuted or witness found,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bellman import (ConfigurationError, SupersolutionCandidate, certify_main_inequality, make_candidate,
                      search_constants)
from .experiments import ExperimentError, blowup_probe, rank_one_witness_operator
from .groupfourier import (FourierError, GroupSpace, check_nonlocal_by_fourier, classify_geometric_by_fourier,
                           complex_intersection, kernel_phi, parse_builtin, project_onto_cancellation, random_kernel)
from .io import FormatError, dump_json, kernel_from_text, sniff_header, subspace_from_text, transform_from_text
from .subspace import (Subspace, SubspaceError, TransformOp, extremal_vectors, is_geometric, is_nonlocal,
                       project_onto_canceling)

EXIT_OK, EXIT_REFUTED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def provenance(args: argparse.Namespace) -> dict:
    keep = {k: v for k, v in vars(args).items() if k != "func"}
    return {"martrace": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "arguments": keep}


# ---------------------------------------------------------------------------
# inputs


def load_space(spec: str, complex_structure: bool = False) -> tuple[Subspace, GroupSpace | None]:
    if spec.startswith("builtin:"):
        try:
            gs = parse_builtin(spec)
        except FourierError as exc:
            raise UsageError(str(exc)) from exc
        return gs.subspace, gs
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"space {spec!r} is neither a builtin spec nor a readable file")
    try:
        return subspace_from_text(path.read_text(), path.stem, complex_structure), None
    except (FormatError, SubspaceError, ValueError) as exc:
        raise UsageError(f"cannot read space file: {exc}") from exc


def _seed_of(token: str, default: int) -> int:
    try:
        return int(token) if token else default
    except ValueError as exc:
        raise UsageError(f"malformed seed in --phi: {token!r}") from exc


def load_phi(spec: str, W: Subspace, gs: GroupSpace | None, alpha: float, seed: int,
             domain: str = "time") -> TransformOp:
    """``zero``, ``random[:S]``, ``canceling[:S]``, ``meanzero-witness`` or a kernel/transform file."""
    name, _, arg = spec.partition(":")
    if name == "zero":
        return TransformOp.zero(W)
    if name in ("random", "canceling"):
        rng = np.random.default_rng(_seed_of(arg, seed))
        if gs is not None:
            K = random_kernel(gs.mu, gs.d, rng, gs.l)
            if name == "canceling":
                K = project_onto_cancellation(K, gs.kind)
            return kernel_phi(gs, K).normalized()
        phi = TransformOp(W, rng.standard_normal((W.m, W.size)), "random")
        if name == "canceling":
            phi = project_onto_canceling(phi, extremal_vectors(W, alpha))
        return phi.normalized()
    if name == "meanzero-witness":
        evs = extremal_vectors(W, alpha)
        if not evs:
            raise UsageError("meanzero-witness needs extremal vectors")
        ev = evs[0]
        u = np.zeros(W.m)
        idx = np.flatnonzero(ev.mask)
        u[idx] = np.where(np.arange(idx.size) % 2 == 0, 1.0, -1.0) * (1 + np.arange(idx.size) // 2)
        if idx.size % 2:
            u[idx[-1]] = 0.0
        return rank_one_witness_operator(W, ev, u).normalized()
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"--phi {spec!r}: unknown keyword and not a file")
    text = path.read_text()
    try:
        hdr = [int(x) for x in sniff_header(path)]
        if gs is not None and len(hdr) == 3 and hdr[:2] == [gs.mu, gs.d] and hdr[2] == gs.l:
            return kernel_phi(gs, kernel_from_text(text, domain))
        return transform_from_text(text, W)
    except (FormatError, FourierError, ValueError) as exc:
        raise UsageError(f"cannot read --phi file: {exc}") from exc


def default_alpha(W: Subspace) -> float:
    geo = is_geometric(W)
    if not geo.geometric:
        raise UsageError("--alpha is required for a non-geometric space")
    return float(geo.alpha)


def emit(report: dict, args: argparse.Namespace, csv_text: str | None = None) -> None:
    if args.format == "csv":
        if csv_text is None:
            raise UsageError("this command has no CSV output")
        text = csv_text
    else:
        text = dump_json(report) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_classify(args) -> int:
    W, gs = load_space(args.space, args.complex)
    geo = is_geometric(W, seed=args.seed)
    report = {"space": W.describe(), "dim": W.dim, "m": W.m, "ell": W.ell, "geometric": geo.as_dict()}
    notes = []
    if gs is not None and gs.kind == "div" and gs.mu < 4:
        notes.append("outside hypothesis mu >= 4")
    if geo.geometric:
        report["extremal_count"] = len(geo.witnesses)
        report["nonlocal"] = is_nonlocal(W, geo.alpha, geo.witnesses).as_dict()
    if gs is not None:
        k = 1 if gs.kind == "grad" else gs.d - 1
        fc = classify_geometric_by_fourier(gs, k, seed=args.seed)
        fourier = fc.as_dict()
        if fc.subgroups:
            fourier["nonlocal_check"] = _fourier_nonlocal(gs, fc.subgroups[0])
        report["fourier"] = fourier
        notes.extend(n for n in fc.notes if n not in notes)
    report["notes"] = notes
    report["provenance"] = provenance(args)
    emit(report, args)
    return EXIT_OK


def _fourier_nonlocal(gs: GroupSpace, gamma) -> dict:
    """Coset criterion for the subgroup ``gamma``, with a taken from the fiber intersection."""
    inner = complex_intersection([gs.fibers[g] for g in gamma if g], gs.l)
    if not inner.shape[0]:
        return {"nonlocal": False, "note": "fibers over the subgroup have trivial intersection"}
    try:
        return check_nonlocal_by_fourier(gs, gamma, inner[0]).as_dict()
    except FourierError as exc:
        return {"nonlocal": False, "note": str(exc)}


def cmd_certify(args) -> int:
    if args.budget <= 0:
        raise ConfigurationError("--budget must be positive")
    W, gs = load_space(args.space, args.complex)
    alpha = args.alpha if args.alpha is not None else default_alpha(W)
    phi = load_phi(args.phi, W, gs, alpha, args.seed, args.phi_domain)
    if args.kind not in ("subcritical", "endpoint"):
        raise UsageError("--kind must be subcritical or endpoint")
    evs = extremal_vectors(W, alpha) if _support_ok(W, alpha) else []
    if args.constants:
        consts = tuple(float(c) for c in args.constants.split(","))
        if len(consts) != 3:
            raise UsageError("--constants takes three comma-separated numbers")
        G: SupersolutionCandidate = make_candidate(args.kind, consts)
        rep = certify_main_inequality(G, W, phi, alpha, args.budget, args.seed, args.jobs, extremals=evs)
        report = {"mode": "fixed", **rep.as_dict()}
        certified = rep.certified
    else:
        srep = search_constants(args.kind, W, phi, alpha, args.budget, args.seed, jobs=args.jobs, extremals=evs)
        report = {"mode": "search", "alpha": alpha, "space": W.describe(), "budget": args.budget,
                  "seed": args.seed, **srep.as_dict()}
        certified = srep.found
        if not certified:
            best = max(srep.tried, key=lambda t: t.get("full_min", t["screen_min"]))
            G = make_candidate(args.kind, tuple(best["constants"]))
            rep = certify_main_inequality(G, W, phi, alpha, args.budget, args.seed, args.jobs, extremals=evs)
            report["witness_run"] = rep.as_dict()
    report["phi"] = {"spec": args.phi, "norm": phi.norm}
    report["provenance"] = provenance(args)
    emit(report, args)
    return EXIT_OK if certified else EXIT_REFUTED


def _support_ok(W: Subspace, alpha: float) -> bool:
    h = W.m ** (1 - alpha)
    return abs(h - round(h)) < 1e-9 and W.m <= 16


def cmd_blowup(args) -> int:
    W, gs = load_space(args.space, args.complex)
    geo = is_geometric(W, seed=args.seed)
    if not geo.geometric:
        raise ExperimentError("blow-up probe needs a geometric space")
    alpha = args.alpha if args.alpha is not None else float(geo.alpha)
    phi = load_phi(args.phi, W, gs, alpha, args.seed, args.phi_domain)
    try:
        ns = [int(x) for x in args.N.split(",")]
    except ValueError as exc:
        raise UsageError(f"malformed --N {args.N!r}") from exc
    rep = blowup_probe(W, phi, alpha, ns, geo.witnesses[0])
    report = {"space": W.describe(), **rep.as_dict(), "seed": args.seed, "provenance": provenance(args)}
    emit(report, args, rep.to_csv())
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="martrace", description="Martingale trace inequalities: classification, "
                                "supersolution certification and blow-up probes.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--space", required=True, help='builtin:{grad|div}:mu=M,d=D or a subspace file')
        sp.add_argument("--complex", action="store_true", help="file space is the realification of a complex one")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None, help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    def transform(sp):
        sp.add_argument("--phi", default="random", help="zero, random[:S], canceling[:S], meanzero-witness, or a file")
        sp.add_argument("--phi-domain", choices=("time", "frequency"), default="time",
                        help="kernel files: time-domain kernel or frequency-domain symbol")
        sp.add_argument("--alpha", type=float, default=None)

    c = sub.add_parser("classify", help="geometric order, extremal vectors, non-locality")
    common(c)
    c.set_defaults(func=cmd_classify)

    c = sub.add_parser("certify", help="sampled certification of a supersolution candidate")
    common(c)
    transform(c)
    c.add_argument("--kind", default="endpoint", help="subcritical or endpoint")
    c.add_argument("--budget", type=int, default=1_000_000)
    c.add_argument("--constants", default=None, help="fixed constants instead of the ladder search")
    c.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    c.set_defaults(func=cmd_certify)

    c = sub.add_parser("blowup", help="trace ratios along the extremal martingale")
    common(c)
    transform(c)
    c.add_argument("--N", default="16,32,64", help="comma-separated depths")
    c.set_defaults(func=cmd_blowup)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ConfigurationError, ExperimentError, FormatError, FourierError, SubspaceError) as exc:
        print(f"martrace: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
