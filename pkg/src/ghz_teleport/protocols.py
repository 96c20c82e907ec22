"""Teleportation procedures: single qubit over a Bell pair, an EPR pair over a
GHZ triplet to two receivers (Bob, Claire), and EPR-nplets over GHZ chains.

Correction rules store the operator ``U_k`` that maps the input onto the
post-measurement residual of outcome ``k``; receivers undo it by applying
``U_k^dagger`` to their own qubit.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from . import __version__
from .bases import (
    NAMED_OPS,
    AdequacyReport,
    MeasurementBasis,
    Nplet,
    adequacy,
    basis_general,
    basis_pi1_23_s4,
)
from .states import BellKind, EprForm, bell, epr_input, ghz_chain, ghz_triplet, nplet
from .statevec import (
    TOL,
    Gate,
    StateVector,
    apply_gate,
    fidelity,
    measure,
    phase_aligned_distance,
    project_all,
    tensor,
)

SCHEMA_VERSION = 1
MAX_NPLET = 10
EPR_RECEIVERS = ("Bob", "Claire")


@dataclass(frozen=True)
class UnknownCoeffs:
    alpha: complex
    beta: complex

    def __post_init__(self):
        a, b = complex(self.alpha), complex(self.beta)
        n2 = abs(a) ** 2 + abs(b) ** 2
        if abs(n2 - 1.0) > TOL:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {n2!r}, expected 1")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @classmethod
    def haar(cls, rng: np.random.Generator) -> "UnknownCoeffs":
        """Haar-random pair: two standard complex Gaussians, normalized."""
        z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        z /= np.linalg.norm(z)
        return cls(z[0], z[1])

    def single(self) -> StateVector:
        return StateVector(1, np.array([self.alpha, self.beta]))


def op(label: str) -> Gate:
    """Single-qubit operator by its table name (``"iY"`` is ``i*sigma_y``)."""
    return Gate(NAMED_OPS[label], label)


@dataclass(frozen=True)
class CorrectionRule:
    outcome: int
    ops: tuple[Gate, ...]  # U_k factor per receiver, in receiver order
    alternatives: tuple[tuple[Gate, ...], ...] = ()

    @property
    def bob_op(self) -> Gate:
        return self.ops[0]

    @property
    def claire_op(self) -> Gate:
        return self.ops[1]

    def variant(self, which: str = "main") -> tuple[Gate, ...]:
        if which in ("alt", "alternative") and self.alternatives:
            return self.alternatives[0]
        return self.ops

    def matrix(self, which: str = "main") -> np.ndarray:
        full = np.ones((1, 1), dtype=np.complex128)
        for g in self.variant(which):
            full = np.kron(full, g.matrix)
        return full

    def labels(self, which: str = "main") -> list[str]:
        return [g.label for g in self.variant(which)]


def epr_correction_table() -> list[CorrectionRule]:
    """The eight rules for the GHZ-triplet protocol with phi = 0.

    Outcomes 1-4: Bob applies X, iY, -iY, -X and Claire idles; outcomes 5-8:
    Claire applies X, -iY, iY, -X and Bob idles. Outcome 2 may instead be
    handled jointly by X on Bob and Z on Claire.
    """
    bob = ("X", "iY", "-iY", "-X")
    claire = ("X", "-iY", "iY", "-X")
    rules = [CorrectionRule(k, (op(b), op("I"))) for k, b in enumerate(bob, 1)]
    rules += [CorrectionRule(k, (op("I"), op(c))) for k, c in enumerate(claire, 5)]
    rules[1] = CorrectionRule(2, rules[1].ops, ((op("X"), op("Z")),))
    return rules


SINGLE_QUBIT_TABLE = ("X", "-iY", "I", "Z")  # Bell outcomes Φ+, Φ-, Ψ+, Ψ-


def rules_from_report(report: AdequacyReport) -> list[CorrectionRule]:
    if report.verdict.kind.value == "Inadequate":
        raise ValueError(f"basis {report.basis_tag} is not adequate: {report.verdict}")
    rules = []
    for k in range(1, len(report.probs) + 1):
        if k in report.zero_outcomes:
            continue
        if k not in report.local_corrections:
            raise ValueError(f"outcome {k} has no local correction")
        rules.append(CorrectionRule(k, report.local_corrections[k]))
    return rules


@lru_cache(maxsize=64)
def epr_rules(phi: float = 0.0, form: EprForm = EprForm.ANTI_DIAGONAL) -> tuple[CorrectionRule, ...]:
    if phi == 0.0 and form is EprForm.ANTI_DIAGONAL:
        return tuple(epr_correction_table())
    return tuple(rules_from_report(adequacy(basis_pi1_23_s4(phi), form)))


@lru_cache(maxsize=64)
def nplet_rules(n: int, phi: float = 0.0) -> tuple[CorrectionRule, ...]:
    return tuple(rules_from_report(adequacy(basis_general(n, phi), Nplet(n))))


def apply_rule(state: StateVector, gates: Sequence[Gate]) -> StateVector:
    """Undo ``U_k``: receiver ``i`` (dense qubit ``i``) applies ``gates[i]^dagger``."""
    for i, g in enumerate(gates, 1):
        if g.label != "I":
            state = apply_gate(state, g.dagger(), [i])
    return state


# ---------------------------------------------------------------------------
# Transcripts


def _cplx(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


@dataclass
class Transcript:
    protocol: str
    alpha: complex
    beta: complex
    outcome: int
    probability: float
    fidelity: float
    phi: float = 0.0
    n: int = 1
    seed: int | None = None
    forced_outcome: int | None = None
    variant: str = "main"
    operations: list[dict] = field(default_factory=list)
    messages: list[dict] = field(default_factory=list)
    wall_time: float = field(default=0.0, compare=False)
    final_state: StateVector | None = field(default=None, repr=False, compare=False)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = asdict(self)
        d.pop("final_state")
        if not include_timing:
            d.pop("wall_time")
        d["alpha"], d["beta"] = _cplx(self.alpha), _cplx(self.beta)
        d["schema_version"] = SCHEMA_VERSION
        d["version"] = __version__
        return d

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "Transcript":
        d = dict(d)
        d.pop("schema_version", None)
        d.pop("version", None)
        d["alpha"] = complex(*d["alpha"])
        d["beta"] = complex(*d["beta"])
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "Transcript":
        return cls.from_dict(json.loads(text))


def _broadcast(receivers: Sequence[str], k: int) -> list[dict]:
    return [{"seq": i, "from": "Alice", "to": r, "payload": k} for i, r in enumerate(receivers)]


def _op_records(receivers: Sequence[str], qubits: Sequence[int], gates: Sequence[Gate]) -> list[dict]:
    return [
        {"party": r, "op": g.label, "qubits": [q]}
        for r, q, g in zip(receivers, qubits, gates)
        if g.label != "I"
    ]


# ---------------------------------------------------------------------------
# Protocols


def bell_basis() -> MeasurementBasis:
    kinds = (BellKind.PHI_PLUS, BellKind.PHI_MINUS, BellKind.PSI_PLUS, BellKind.PSI_MINUS)
    return MeasurementBasis.from_states([bell(k) for k in kinds], "bell", labels=tuple(k.value for k in kinds))


def teleport_single(coeffs: UnknownCoeffs, *, seed: int | None = None, outcome: int | None = None) -> Transcript:
    """Qubit 1 carries the input; Alice (1, 2) and Bob (3) share ``Ψ+``."""
    t0 = time.perf_counter()
    state = tensor(coeffs.single(), bell(BellKind.PSI_PLUS))
    m = measure(state, bell_basis(), [1, 2], seed=seed, outcome=outcome)
    gate = op(SINGLE_QUBIT_TABLE[m.outcome - 1])
    final = apply_rule(m.post_state, [gate])
    return Transcript(
        protocol="single",
        alpha=coeffs.alpha,
        beta=coeffs.beta,
        outcome=m.outcome,
        probability=m.probability,
        fidelity=fidelity(final, coeffs.single()),
        seed=seed,
        forced_outcome=outcome,
        operations=_op_records(["Bob"], [3], [gate]),
        messages=_broadcast(["Bob"], m.outcome),
        wall_time=time.perf_counter() - t0,
        final_state=final,
    )


def epr_initial_state(coeffs: UnknownCoeffs, form: EprForm = EprForm.ANTI_DIAGONAL) -> StateVector:
    return tensor(epr_input(coeffs.alpha, coeffs.beta, form), ghz_triplet())


def teleport_epr(
    coeffs: UnknownCoeffs,
    phi: float = 0.0,
    *,
    seed: int | None = None,
    outcome: int | None = None,
    variant: str = "main",
    form: EprForm = EprForm.ANTI_DIAGONAL,
) -> Transcript:
    """Alice measures qubits 1-3 in the pi1(23)(4) basis; Bob (4) and Claire (5) correct."""
    t0 = time.perf_counter()
    m = measure(epr_initial_state(coeffs, form), basis_pi1_23_s4(phi), [1, 2, 3], seed=seed, outcome=outcome)
    rule = epr_rules(float(phi), form)[m.outcome - 1]
    gates = rule.variant(variant)
    final = apply_rule(m.post_state, gates)
    target = epr_input(coeffs.alpha, coeffs.beta, form)
    return Transcript(
        protocol="epr-via-ghz",
        alpha=coeffs.alpha,
        beta=coeffs.beta,
        outcome=m.outcome,
        probability=m.probability,
        fidelity=fidelity(final, target),
        phi=float(phi),
        n=2,
        seed=seed,
        forced_outcome=outcome,
        variant="alternative" if gates is not rule.ops else "main",
        operations=_op_records(EPR_RECEIVERS, [4, 5], gates),
        messages=_broadcast(EPR_RECEIVERS, m.outcome),
        wall_time=time.perf_counter() - t0,
        final_state=final,
    )


def receiver_names(n: int) -> list[str]:
    return [f"R{j}" for j in range(1, n + 1)]


def _check_n(n: int) -> None:
    if not 2 <= n <= MAX_NPLET:
        raise ValueError(f"N must be in 2..{MAX_NPLET}, got {n}")


def nplet_initial_state(coeffs: UnknownCoeffs, n: int) -> StateVector:
    return tensor(nplet(coeffs.alpha, coeffs.beta, n), ghz_chain(n + 1))


def teleport_nplet(
    coeffs: UnknownCoeffs,
    n: int,
    phi: float = 0.0,
    *,
    seed: int | None = None,
    outcome: int | None = None,
) -> Transcript:
    """Alice holds qubits 1..N+1; receiver ``R_j`` holds qubit ``N+1+j``."""
    _check_n(n)
    t0 = time.perf_counter()
    m = measure(nplet_initial_state(coeffs, n), basis_general(n, phi), range(1, n + 2), seed=seed, outcome=outcome)
    gates = nplet_rules(n, float(phi))[m.outcome - 1].ops
    final = apply_rule(m.post_state, gates)
    return Transcript(
        protocol=f"nplet({n})",
        alpha=coeffs.alpha,
        beta=coeffs.beta,
        outcome=m.outcome,
        probability=m.probability,
        fidelity=fidelity(final, nplet(coeffs.alpha, coeffs.beta, n)),
        phi=float(phi),
        n=n,
        seed=seed,
        forced_outcome=outcome,
        operations=_op_records(receiver_names(n), range(n + 2, 2 * n + 2), gates),
        messages=_broadcast(receiver_names(n), m.outcome),
        wall_time=time.perf_counter() - t0,
        final_state=final,
    )


@dataclass(frozen=True)
class OutcomeRow:
    outcome: int
    probability: float
    fidelity: float
    ops: tuple[str, ...]


def _all_outcomes(initial: StateVector, basis, measured: Sequence[int], rules, target: StateVector,
                  variant: str = "main") -> list[OutcomeRow]:
    residuals, rest = project_all(initial, basis, measured)
    rows = []
    for rule in rules:
        r = residuals[rule.outcome - 1]
        p = float(np.vdot(r, r).real)
        gates = rule.variant(variant)
        final = apply_rule(StateVector(len(rest), r / np.sqrt(p)), gates)
        rows.append(OutcomeRow(rule.outcome, p, fidelity(final, target), tuple(g.label for g in gates)))
    return rows


def epr_all_outcomes(coeffs: UnknownCoeffs, phi: float = 0.0, variant: str = "main",
                     form: EprForm = EprForm.ANTI_DIAGONAL) -> list[OutcomeRow]:
    """Every branch of :func:`teleport_epr` from a single projection pass."""
    return _all_outcomes(epr_initial_state(coeffs, form), basis_pi1_23_s4(phi), (1, 2, 3),
                         epr_rules(float(phi), form), epr_input(coeffs.alpha, coeffs.beta, form), variant)


def nplet_all_outcomes(coeffs: UnknownCoeffs, n: int, phi: float = 0.0) -> list[OutcomeRow]:
    """Every branch of :func:`teleport_nplet` from a single projection pass."""
    _check_n(n)
    return _all_outcomes(nplet_initial_state(coeffs, n), basis_general(n, phi), range(1, n + 2),
                         nplet_rules(n, float(phi)), nplet(coeffs.alpha, coeffs.beta, n))


# ---------------------------------------------------------------------------
# Expansion and verification


@dataclass(frozen=True)
class ExpansionTerm:
    outcome: int
    basis_label: str
    residual: StateVector | None  # None when the projection vanishes
    coefficient_norm: float


@dataclass(frozen=True)
class ExpansionReport:
    basis_tag: str
    terms: tuple[ExpansionTerm, ...]

    def total_weight(self) -> float:
        return sum(t.coefficient_norm ** 2 for t in self.terms)


def expand_epr(coeffs: UnknownCoeffs, basis: MeasurementBasis | None = None,
               form: EprForm = EprForm.ANTI_DIAGONAL) -> ExpansionReport:
    """Decompose the five-qubit initial state over a three-qubit basis on qubits 1-3."""
    basis = basis_pi1_23_s4(0.0) if basis is None else basis
    if basis.m_qubits != 3:
        raise ValueError("expand_epr needs a basis on qubits 1-3")
    residuals, _ = project_all(epr_initial_state(coeffs, form), basis, [1, 2, 3])
    terms = []
    for k, r in enumerate(residuals, 1):
        norm = float(np.linalg.norm(r))
        res = StateVector(2, r / norm) if norm > TOL else None
        terms.append(ExpansionTerm(k, basis.labels[k - 1], res, norm))
    return ExpansionReport(basis.family_tag, tuple(terms))


@dataclass
class CorrectionCheck:
    n: int
    phi: float
    trials: int
    max_error: dict[int, float]
    failures: list[tuple[int, UnknownCoeffs]]

    @property
    def passed(self) -> bool:
        return not self.failures


def _apply_u(state: StateVector, gates: Sequence[Gate]) -> StateVector:
    for i, g in enumerate(gates, 1):
        if g.label != "I":
            state = apply_gate(state, g, [i])
    return state


def verify_corrections(n: int, phi: float = 0.0, trials: int = 20, seed: int = 0,
                       tol: float = TOL) -> CorrectionCheck:
    """Check ``rho_receivers(k) == U_k |in><in| U_k^dagger`` for every outcome.

    ``n = 2`` checks the EPR-pair protocol (anti-diagonal input, receivers
    Bob and Claire); larger ``n`` checks the nplet protocol. Up to 64
    receiver amplitudes the density matrices are compared entry-wise;
    beyond that the entry-wise error is bounded by twice the phase-aligned
    vector distance.
    """
    if not 2 <= n <= MAX_NPLET:
        raise ValueError(f"N must be in 2..{MAX_NPLET}, got {n}")
    rng = np.random.default_rng(seed)
    rules = epr_rules(float(phi)) if n == 2 else nplet_rules(n, float(phi))
    basis = basis_pi1_23_s4(phi) if n == 2 else basis_general(n, phi)
    max_err: dict[int, float] = {r.outcome: 0.0 for r in rules}
    failures = []
    for _ in range(trials):
        c = UnknownCoeffs.haar(rng)
        if n == 2:
            initial, target = epr_initial_state(c), epr_input(c.alpha, c.beta)
        else:
            initial, target = nplet_initial_state(c, n), nplet(c.alpha, c.beta, n)
        residuals, _ = project_all(initial, basis, range(1, n + 2))
        for rule in rules:
            r = residuals[rule.outcome - 1]
            r = r / np.linalg.norm(r)
            expect = _apply_u(target, rule.ops).amps
            if r.size <= 64:
                err = float(np.max(np.abs(np.outer(r, r.conj()) - np.outer(expect, expect.conj()))))
            else:
                err = 2 * phase_aligned_distance(r, expect)
            max_err[rule.outcome] = max(max_err[rule.outcome], err)
            if err > tol:
                failures.append((rule.outcome, c))
    return CorrectionCheck(n, float(phi), trials, max_err, failures)


def _u3(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -np.exp(1j * lam) * s], [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]])


def max_local_fidelity(state: StateVector, target: StateVector, qubit: int, grid: int = 20) -> float:
    """Best ``|<target|U_qubit|state>|^2`` over single-qubit unitaries on one qubit.

    Coarse search over a ``grid``^3 lattice of Euler angles, then local
    refinement from the best lattice point.
    """
    psi = state.amps.reshape([2] * state.n_qubits)
    tgt = target.amps.reshape([2] * target.n_qubits)
    ax = qubit - 1
    # <target| (U on ax) |state> = sum_ab U_ab * T_a^* S_b, with T, S contracted elsewhere
    overlap = np.tensordot(np.moveaxis(tgt.conj(), ax, 0), np.moveaxis(psi, ax, 0),
                           axes=(list(range(1, state.n_qubits)), list(range(1, state.n_qubits))))

    def fid(x: Sequence[float]) -> float:
        return float(abs(np.sum(_u3(*x) * overlap)) ** 2)

    thetas = np.linspace(0, np.pi, grid)
    phases = np.linspace(0, 2 * np.pi, grid, endpoint=False)
    best = max(itertools.product(thetas, phases, phases), key=fid)
    res = minimize(lambda x: -fid(x), np.array(best), method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    return max(fid(best), -float(res.fun))
