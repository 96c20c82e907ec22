"""Command-line entry point.

Exit codes: 0 success, 2 argument error, 3 physics check failed, 4 I/O error.
When no ``--seed`` is given the value of ``GHZ_TELEPORT_SEED`` is used (0 if unset).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bases import BASIS_FAMILIES, Nplet, adequacy, basis_general, classify
from .circuit import network_fidelity, teleport_network
from .protocols import (
    EPR_RECEIVERS,
    SCHEMA_VERSION,
    UnknownCoeffs,
    nplet_all_outcomes,
    receiver_names,
    teleport_epr,
    teleport_nplet,
)
from .states import EprForm

SEED_ENV = "GHZ_TELEPORT_SEED"
FIDELITY_FLOOR = 1 - 1e-9
RENORM_TOL = 1e-6

EXIT_OK, EXIT_ARGS, EXIT_PHYSICS, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


@dataclass
class RunReport:
    command: str
    parameters: dict
    rows: list[dict] = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    seed: int | None = None
    schema_version: int = SCHEMA_VERSION
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))


def parse_complex(text: str) -> complex:
    try:
        re_, im = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 're,im', got {text!r}") from None
    return complex(re_, im)


def coeffs_from_args(alpha: complex, beta: complex) -> UnknownCoeffs:
    norm = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
    if abs(norm - 1) > RENORM_TOL or norm == 0:
        raise UsageError(f"|alpha|^2 + |beta|^2 = {norm ** 2:.6g}; coefficients must be normalized")
    if abs(norm ** 2 - 1) > 1e-12:
        print(f"warning: renormalizing coefficients (norm {norm!r})", file=sys.stderr)
    return UnknownCoeffs(alpha / norm, beta / norm)


def default_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    raw = os.environ.get(SEED_ENV, "0")
    if not raw.isdigit():
        raise UsageError(f"{SEED_ENV} must be an unsigned integer, got {raw!r}")
    return int(raw)


def _write(path: str | None, text: str) -> None:
    if path is None:
        return
    try:
        Path(path).write_text(text if text.endswith("\n") else text + "\n")
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc}") from exc


def _cplx(z: complex) -> list[float]:
    return [z.real, z.imag]


# ---------------------------------------------------------------------------
# Commands


def cmd_teleport_epr(args) -> int:
    coeffs = coeffs_from_args(args.alpha, args.beta)
    if args.outcome is not None and not 1 <= args.outcome <= 8:
        raise UsageError("--outcome must be in 1..8")
    seed = None if args.outcome is not None else default_seed(args.seed)
    t = teleport_epr(coeffs, args.phi, seed=seed, outcome=args.outcome, variant=args.variant)
    ops = ", ".join(f"{o['party']} {o['op']}" for o in t.operations) or "none"
    print(f"outcome k={t.outcome}  p={t.probability:.6f}")
    print(f"corrections: {ops}")
    print(f"fidelity: {t.fidelity:.12f}")
    rows = []
    for k in range(1, 9):
        branch = teleport_epr(coeffs, args.phi, outcome=k, variant=args.variant)
        rows.append({"k": k, "probability": branch.probability, "corrections": branch.operations,
                     "fidelity": branch.fidelity})
    worst = min(t.fidelity, *(r["fidelity"] for r in rows))
    report = RunReport(
        "teleport-epr",
        {"alpha": _cplx(coeffs.alpha), "beta": _cplx(coeffs.beta), "phi": args.phi,
         "outcome": args.outcome, "variant": t.variant},
        rows=rows,
        aggregate={"min_fidelity": worst, "probability_sum": sum(r["probability"] for r in rows),
                   "transcript": t.to_dict()},
        seed=seed,
    )
    _write(args.json, report.to_json())
    return EXIT_OK if worst >= FIDELITY_FLOOR else EXIT_PHYSICS


def cmd_teleport_nplet(args) -> int:
    if not 2 <= args.n <= 10:
        raise UsageError("--n must be in 2..10")
    if args.outcome is not None and not 1 <= args.outcome <= 2 ** (args.n + 1):
        raise UsageError(f"--outcome must be in 1..{2 ** (args.n + 1)}")
    coeffs = coeffs_from_args(args.alpha, args.beta)
    seed = None if args.outcome is not None else default_seed(args.seed)
    t = teleport_nplet(coeffs, args.n, args.phi, seed=seed, outcome=args.outcome)
    applied = {o["party"]: o["op"] for o in t.operations}
    print(f"outcome k={t.outcome}  p={t.probability:.6g}")
    for name in receiver_names(args.n):
        print(f"  {name}: {applied.get(name, 'I')}")
    print(f"fidelity: {t.fidelity:.12f}")
    print(f"runtime: {t.wall_time:.3f} s")
    names = receiver_names(args.n)
    rows = [
        {"k": r.outcome, "probability": r.probability,
         "corrections": [{"party": nm, "op": o} for nm, o in zip(names, r.ops) if o != "I"],
         "fidelity": r.fidelity}
        for r in nplet_all_outcomes(coeffs, args.n, args.phi)
    ]
    worst = min(t.fidelity, *(r["fidelity"] for r in rows))
    report = RunReport(
        "teleport-nplet",
        {"n": args.n, "alpha": _cplx(coeffs.alpha), "beta": _cplx(coeffs.beta), "phi": args.phi,
         "outcome": args.outcome},
        rows=rows,
        aggregate={"min_fidelity": worst, "probability_sum": sum(r["probability"] for r in rows),
                   "transcript": t.to_dict()},
        seed=seed,
    )
    _write(args.json, report.to_json())
    return EXIT_OK if worst >= FIDELITY_FLOOR else EXIT_PHYSICS


def basis_report(family: str, n: int, phi: float) -> RunReport:
    if family == "general":
        if not 2 <= n <= 10:
            raise UsageError("--n must be in 2..10 for the general family")
        basis, form = basis_general(n, phi), Nplet(n)
        names = receiver_names(n)
    else:
        basis, form = BASIS_FAMILIES[family](phi), EprForm.ANTI_DIAGONAL
        names = list(EPR_RECEIVERS)
    cls = classify(basis)
    rep = adequacy(basis, form)
    rows = []
    for k, p in enumerate(rep.probs, 1):
        lo, hi = rep.prob_ranges[k - 1]
        local = rep.local_corrections.get(k)
        rows.append({
            "k": k,
            "label": basis.labels[k - 1],
            "probability": p,
            "probability_range": [lo, hi],
            "zero": k in rep.zero_outcomes,
            "corrections": None if local is None else {nm: g.label for nm, g in zip(names, local)},
        })
    return RunReport(
        "check-basis",
        {"family": family, "n": n if family == "general" else None, "phi": phi},
        rows=rows,
        aggregate={
            "verdict": str(rep.verdict),
            "verdict_kind": rep.verdict.kind.value,
            "s": cls.s,
            "classes": [str(c) for c in cls.per_vector_class],
            "zero_outcomes": sorted(rep.zero_outcomes),
            "state_dependent_outcomes": list(rep.state_dependent),
            "probability_sum": sum(p for p in rep.probs if p is not None),
        },
    )


def cmd_check_basis(args) -> int:
    report = basis_report(args.family, args.n, args.phi)
    agg = report.aggregate
    print(f"family {args.family}: s={agg['s']}  verdict={agg['verdict']}")
    print(f"zero outcomes: {agg['zero_outcomes'] or 'none'}")
    for row in report.rows:
        p = "state-dependent" if row["probability"] is None else f"{row['probability']:.6g}"
        corr = row["corrections"]
        corr = "-" if corr is None else " ".join(f"{k}:{v}" for k, v in corr.items())
        print(f"  k={row['k']:>4}  {row['label']:<16} p={p:<16} {corr}")
    _write(args.json, report.to_json())
    return EXIT_OK


def run_sweep(trials: int, n: int, phi_steps: int, seed: int) -> tuple[list[tuple], dict]:
    rng = np.random.default_rng(seed)
    n_out = 2 ** (n + 1)
    rows = []
    counts = np.zeros(n_out, dtype=int)
    for step in range(phi_steps):
        phi = 2 * math.pi * step / phi_steps
        for trial in range(trials):
            coeffs = UnknownCoeffs.haar(rng)
            run_seed = int(rng.integers(2 ** 32))
            if n == 2:
                t = teleport_epr(coeffs, phi, seed=run_seed)
            else:
                t = teleport_nplet(coeffs, n, phi, seed=run_seed)
            counts[t.outcome - 1] += 1
            rows.append((trial, phi, t.outcome, t.fidelity))
    total = counts.sum()
    expected = total / n_out
    sigma = math.sqrt(total * (1 / n_out) * (1 - 1 / n_out))
    summary = {
        "runs": int(total),
        "min_fidelity": min(r[3] for r in rows),
        "chi2": float(np.sum((counts - expected) ** 2 / expected)),
        "dof": n_out - 1,
        "max_abs_z": float(np.max(np.abs(counts - expected)) / sigma),
        "counts": counts.tolist(),
    }
    return rows, summary


def cmd_sweep(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    if not 2 <= args.n <= 10:
        raise UsageError("--n must be in 2..10")
    if args.phi_steps < 1:
        raise UsageError("--phi-steps must be at least 1")
    rows, summary = run_sweep(args.trials, args.n, args.phi_steps, default_seed(args.seed))
    if args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "phi", "outcome", "fidelity"])
        w.writerows((t, repr(phi), k, repr(f)) for t, phi, k, f in rows)
        w.writerow(["summary", f"chi2={summary['chi2']!r};dof={summary['dof']}",
                    f"max_abs_z={summary['max_abs_z']!r}", repr(summary["min_fidelity"])])
        _write(args.csv, buf.getvalue())
    print(f"runs: {summary['runs']}  min fidelity: {summary['min_fidelity']:.12f}")
    print(f"outcome counts: {summary['counts']}")
    print(f"chi2 = {summary['chi2']:.3f} (dof {summary['dof']}), max |z| = {summary['max_abs_z']:.3f}")
    return EXIT_OK if summary["min_fidelity"] >= FIDELITY_FLOOR else EXIT_PHYSICS


def cmd_circuit(args) -> int:
    if args.branch is not None and not 0 <= args.branch <= 7:
        raise UsageError("--branch must be in 0..7")
    coeffs = coeffs_from_args(args.alpha, args.beta)
    if args.emit_circuit:
        _write(args.emit_circuit, teleport_network().to_text())
    seed = None if args.branch is not None else default_seed(args.seed)
    bits, k, fid = network_fidelity(coeffs, seed=seed, branch=args.branch)
    branch = int("".join(map(str, bits)), 2)
    print(f"branch {branch}  bits {''.join(map(str, bits))}  outcome k={k}  fidelity: {fid:.12f}")
    return EXIT_OK if fid >= FIDELITY_FLOOR else EXIT_PHYSICS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ghz-teleport", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def coeff_args(sp, alpha="0.6,0", beta="0.8,0"):
        sp.add_argument("--alpha", type=parse_complex, default=parse_complex(alpha), help="re,im")
        sp.add_argument("--beta", type=parse_complex, default=parse_complex(beta), help="re,im")

    sp = sub.add_parser("teleport-epr", help="teleport an EPR pair through a GHZ triplet")
    coeff_args(sp)
    sp.add_argument("--phi", type=float, default=0.0)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--seed", type=int)
    g.add_argument("--outcome", type=int)
    sp.add_argument("--variant", choices=["main", "alt"], default="main")
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_teleport_epr)

    sp = sub.add_parser("teleport-nplet", help="teleport an EPR-nplet through an (N+1)-qubit GHZ chain")
    sp.add_argument("--n", type=int, required=True)
    coeff_args(sp)
    sp.add_argument("--phi", type=float, default=0.0)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--seed", type=int)
    g.add_argument("--outcome", type=int)
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_teleport_nplet)

    sp = sub.add_parser("check-basis", help="classify a measurement basis and test its adequacy")
    sp.add_argument("--family", required=True, choices=[*BASIS_FAMILIES, "general"])
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--phi", type=float, default=0.0)
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_check_basis)

    sp = sub.add_parser("sweep", help="seeded Haar-random statistics")
    sp.add_argument("--trials", type=int, required=True)
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--phi-steps", type=int, default=1)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--csv")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("circuit", help="run the gate-level network")
    coeff_args(sp)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--branch", type=int)
    g.add_argument("--seed", type=int)
    sp.add_argument("--emit-circuit")
    sp.set_defaults(func=cmd_circuit)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
