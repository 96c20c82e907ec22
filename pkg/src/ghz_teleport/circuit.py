"""Gate-level network for EPR-pair teleportation over a GHZ triplet.

Register: qubits 1, 2 carry the input pair (prepared by a CNOT from
``(a|0> + b|1>) (x) |1>``), qubits 3, 4, 5 the GHZ triplet. Alice's
measurement in the pi1(23)(4) basis (phi = 0) is reduced to computational
measurements by ``CNOT(2->3); H(2); H(1)``. Corrections on qubits 4 and 5
are either classically controlled on the measured bits or, in the deferred
variant, quantum-controlled on qubits 1-3.

Text format, one op per line::

    U <gate> <targets...>
    MZ <qubit> <bit>
    CC <gate> <targets...> if <bit pattern over all classical bits>
    CU <gate> <targets...> ctrl <c1,c2,...> <pattern>
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .bases import NAMED_OPS, basis_pi1_23_s4
from .protocols import UnknownCoeffs, epr_correction_table, teleport_epr
from .states import epr_input
from .statevec import (
    CNOT,
    TOL,
    Gate,
    H,
    StateVector,
    ZeroProbabilityOutcome,
    apply_controlled,
    apply_gate,
    basis_state,
    phase_aligned_distance,
    project_residual,
    sample_outcome,
    tensor,
)

GATES: dict[str, Gate] = {"H": H, "CNOT": CNOT}
GATES.update({name: Gate(m, name) for name, m in NAMED_OPS.items()})


def named_gate(name: str) -> Gate:
    try:
        return GATES[name]
    except KeyError:
        raise CircuitError(f"unknown gate {name!r}") from None


@dataclass(frozen=True)
class Unitary:
    gate: Gate
    targets: tuple[int, ...]


@dataclass(frozen=True)
class MeasureZ:
    qubit: int
    bit: int


@dataclass(frozen=True)
class ClassicallyControlled:
    gate: Gate
    targets: tuple[int, ...]
    pattern: str  # required value of every classical bit, bit 0 first

    def fires(self, bits: Sequence[int | None]) -> bool:
        return all(int(c) == b for c, b in zip(self.pattern, bits))


@dataclass(frozen=True)
class Controlled:
    gate: Gate
    targets: tuple[int, ...]
    controls: tuple[int, ...]
    pattern: str


CircuitOp = Union[Unitary, MeasureZ, ClassicallyControlled, Controlled]


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    n_bits: int = 0
    ops: tuple[CircuitOp, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        measured: set[int] = set()
        written: set[int] = set()
        for op in self.ops:
            qubits = _qubits_of(op)
            for q in qubits:
                if not 1 <= q <= self.n_qubits:
                    raise CircuitError(f"{op} touches qubit {q} outside 1..{self.n_qubits}")
            if isinstance(op, MeasureZ):
                if not 0 <= op.bit < self.n_bits:
                    raise CircuitError(f"classical bit {op.bit} out of range")
                measured.add(op.qubit)
                written.add(op.bit)
                continue
            if measured & set(qubits):
                raise CircuitError(f"{op} acts on an already measured qubit")
            if isinstance(op, ClassicallyControlled):
                if len(op.pattern) != self.n_bits:
                    raise CircuitError(f"pattern {op.pattern!r} must cover all {self.n_bits} bits")
                if len(written) != self.n_bits:
                    raise CircuitError("classical bits read before being written")

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(max(self.n_qubits, other.n_qubits), max(self.n_bits, other.n_bits), self.ops + other.ops)

    def to_text(self) -> str:
        return "\n".join(_op_text(op) for op in self.ops) + "\n"

    @classmethod
    def from_text(cls, text: str, n_qubits: int, n_bits: int = 0) -> "Circuit":
        ops = [_parse_line(line) for line in text.splitlines() if line.strip() and not line.startswith("#")]
        return cls(n_qubits, n_bits, tuple(ops))


def _qubits_of(op: CircuitOp) -> tuple[int, ...]:
    if isinstance(op, MeasureZ):
        return (op.qubit,)
    if isinstance(op, Controlled):
        return op.targets + op.controls
    return op.targets


def _op_text(op: CircuitOp) -> str:
    if isinstance(op, MeasureZ):
        return f"MZ {op.qubit} {op.bit}"
    t = " ".join(map(str, op.targets))
    if isinstance(op, Unitary):
        return f"U {op.gate.label} {t}"
    if isinstance(op, ClassicallyControlled):
        return f"CC {op.gate.label} {t} if {op.pattern}"
    return f"CU {op.gate.label} {t} ctrl {','.join(map(str, op.controls))} {op.pattern}"


def _parse_line(line: str) -> CircuitOp:
    tok = line.split()
    kind = tok[0]
    try:
        if kind == "MZ":
            return MeasureZ(int(tok[1]), int(tok[2]))
        gate = named_gate(tok[1])
        if kind == "U":
            return Unitary(gate, tuple(int(t) for t in tok[2:]))
        if kind == "CC":
            i = tok.index("if")
            return ClassicallyControlled(gate, tuple(int(t) for t in tok[2:i]), tok[i + 1])
        if kind == "CU":
            i = tok.index("ctrl")
            controls = tuple(int(c) for c in tok[i + 1].split(","))
            return Controlled(gate, tuple(int(t) for t in tok[2:i]), controls, tok[i + 2])
    except (IndexError, ValueError) as exc:
        raise CircuitError(f"cannot parse {line!r}: {exc}") from None
    raise CircuitError(f"unknown op kind in {line!r}")


# ---------------------------------------------------------------------------
# Fragments


def epr_prep_circuit(n_qubits: int = 5) -> Circuit:
    """CNOT(1->2): ``(a|0> + b|1>)|1>`` becomes ``a|01> + b|10>``."""
    return Circuit(n_qubits, 0, (Unitary(CNOT, (1, 2)),))


def ghz_prep_circuit(n_qubits: int = 5, qubits: tuple[int, int, int] = (3, 4, 5)) -> Circuit:
    a, b, c = qubits
    return Circuit(n_qubits, 0, (Unitary(H, (a,)), Unitary(CNOT, (a, b)), Unitary(CNOT, (a, c))))


def basis_change_circuit(n_qubits: int = 5) -> Circuit:
    """Maps the pi1(23)(4) vectors (phi = 0) on qubits 1-3 to computational kets."""
    return Circuit(n_qubits, 0, (Unitary(CNOT, (2, 3)), Unitary(H, (2,)), Unitary(H, (1,))))


def network_input(coeffs: UnknownCoeffs) -> StateVector:
    """``(a|0> + b|1>) (x) |1> (x) |000>``."""
    return tensor(coeffs.single(), basis_state("1000"))


def branch_outcome_map() -> dict[int, int]:
    """Measured 3-bit branch (qubit 1 is the high bit) -> basis outcome ``k``.

    Derived by pushing every basis vector through the basis-change circuit.
    """
    basis = basis_pi1_23_s4(0.0)
    change = basis_change_circuit(3)
    mapping = {}
    for k in range(1, 9):
        out, _ = run_circuit(change, basis.vector(k))
        idx = np.flatnonzero(np.abs(out.amps) > TOL)
        if idx.size != 1 or abs(abs(out.amps[idx[0]]) - 1) > TOL:
            raise CircuitError(f"basis vector {k} does not map to a computational ket")
        mapping[int(idx[0])] = k
    if sorted(mapping) != list(range(8)):
        raise CircuitError("basis change is not a bijection onto the computational basis")
    return dict(sorted(mapping.items()))


def _zx_decompose(mat: np.ndarray) -> tuple[int, int]:
    """``(z, x)`` with ``mat`` proportional to ``Z^z X^x``."""
    for z in (0, 1):
        for x in (0, 1):
            ref = np.linalg.matrix_power(NAMED_OPS["Z"], z) @ np.linalg.matrix_power(NAMED_OPS["X"], x)
            ov = np.vdot(ref.reshape(-1), mat.reshape(-1))
            if abs(ov) > TOL and np.max(np.abs(mat - ov / 2 * ref)) <= TOL:
                return z, x
    raise CircuitError("correction is not a Pauli product")


def teleport_network() -> Circuit:
    """Full five-qubit network with mid-circuit measurements and classically
    controlled X/Z corrections, keyed by the three measured bits."""
    ops = list((epr_prep_circuit() + ghz_prep_circuit() + basis_change_circuit()).ops)
    ops += [MeasureZ(q, q - 1) for q in (1, 2, 3)]
    rules = {r.outcome: r for r in epr_correction_table()}
    for branch, k in branch_outcome_map().items():
        pattern = f"{branch:03b}"
        for qubit, g in zip((4, 5), rules[k].ops):
            z, x = _zx_decompose(g.matrix)
            # undo Z^z X^x: apply Z first, then X
            if z:
                ops.append(ClassicallyControlled(GATES["Z"], (qubit,), pattern))
            if x:
                ops.append(ClassicallyControlled(GATES["X"], (qubit,), pattern))
    return Circuit(5, 3, tuple(ops))


def deferred_network() -> Circuit:
    """Measurement-free variant: each correction ``U_k^dagger`` is controlled
    on qubits 1-3 directly, so the output is ``|+++> (x) input``."""
    ops = list((epr_prep_circuit() + ghz_prep_circuit() + basis_change_circuit()).ops)
    rules = {r.outcome: r for r in epr_correction_table()}
    for branch, k in branch_outcome_map().items():
        for qubit, g in zip((4, 5), rules[k].ops):
            if g.label != "I":
                inv = Gate(g.matrix.conj().T, _inverse_label(g.label))
                ops.append(Controlled(inv, (qubit,), (1, 2, 3), f"{branch:03b}"))
    return Circuit(5, 0, tuple(ops))


def _inverse_label(label: str) -> str:
    inv = {"iY": "-iY", "-iY": "iY"}
    return inv.get(label, label)


# ---------------------------------------------------------------------------
# Execution


def run_circuit(
    circuit: Circuit,
    initial: StateVector,
    *,
    seed: int | None = None,
    branch: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[StateVector, tuple[int, ...]]:
    """Apply the ops in order.

    ``branch`` forces the measured bits to its binary digits (bit 0 is the
    most significant); otherwise bits are sampled from ``seed``/``rng``.
    Measured qubits stay in the register, collapsed to ``|bit>``.
    """
    if initial.n_qubits != circuit.n_qubits:
        raise CircuitError(f"circuit has {circuit.n_qubits} qubits, state has {initial.n_qubits}")
    forced = None
    if branch is not None:
        if not 0 <= branch < 1 << circuit.n_bits:
            raise CircuitError(f"branch {branch} out of range for {circuit.n_bits} bits")
        forced = [int(c) for c in f"{branch:0{circuit.n_bits}b}"] if circuit.n_bits else []
    elif rng is None and seed is not None:
        rng = np.random.default_rng(seed)

    state = initial
    bits: list[int | None] = [None] * circuit.n_bits
    for op in circuit.ops:
        if isinstance(op, Unitary):
            state = apply_gate(state, op.gate, op.targets)
        elif isinstance(op, Controlled):
            state = apply_controlled(state, op.gate, op.targets, op.controls, op.pattern)
        elif isinstance(op, ClassicallyControlled):
            if None in bits:
                raise CircuitError("classical bit read before being written")
            if op.fires(bits):
                state = apply_gate(state, op.gate, op.targets)
        else:
            state, bits[op.bit] = _measure_z(state, op.qubit, None if forced is None else forced[op.bit], rng)
    return state, tuple(bits)


def _measure_z(state: StateVector, qubit: int, forced: int | None,
               rng: np.random.Generator | None) -> tuple[StateVector, int]:
    psi = state.amps.reshape([2] * state.n_qubits)
    parts = [np.take(psi, b, axis=qubit - 1) for b in (0, 1)]
    probs = np.array([np.vdot(p, p).real for p in parts])
    if forced is None:
        if rng is None:
            raise CircuitError("measurement needs a seed, an rng or a forced branch")
        forced = sample_outcome(probs, rng) - 1
    if probs[forced] <= TOL:
        raise ZeroProbabilityOutcome(f"qubit {qubit} cannot read {forced}")
    out = np.zeros_like(psi)
    idx = [slice(None)] * state.n_qubits
    idx[qubit - 1] = forced
    out[tuple(idx)] = parts[forced] / np.sqrt(probs[forced])
    return StateVector(state.n_qubits, out.reshape(-1)), forced


def receiver_state(final: StateVector, bits: Sequence[int]) -> StateVector:
    """State of qubits 4, 5 once qubits 1-3 have collapsed to ``bits``."""
    return project_residual(final, basis_state("".join(map(str, bits))), [1, 2, 3]).normalized()


@dataclass
class EquivalenceReport:
    mapping: dict[int, int]  # branch -> outcome k
    distances: dict[tuple[int, int], float]  # (trial, branch) -> phase-aligned distance
    tol: float = TOL

    @property
    def mismatches(self) -> list[tuple[int, int]]:
        return [key for key, d in self.distances.items() if d >= self.tol]

    @property
    def passed(self) -> bool:
        return not self.mismatches

    @property
    def max_distance(self) -> float:
        return max(self.distances.values())


def verify_equivalence(coeffs: UnknownCoeffs | Sequence[UnknownCoeffs], n_trials: int | None = None,
                       seed: int = 0, tol: float = TOL) -> EquivalenceReport:
    """Compare every forced branch of :func:`teleport_network` with the
    measurement-based protocol for the matching outcome.

    Distances on qubits 4, 5 are taken after aligning global phase: the
    X/Z-only classical control realises ``-X`` as ``X``.
    """
    if isinstance(coeffs, UnknownCoeffs):
        trials = [coeffs]
    else:
        trials = list(coeffs)
    if n_trials:
        rng = np.random.default_rng(seed)
        trials += [UnknownCoeffs.haar(rng) for _ in range(n_trials)]
    net = teleport_network()
    mapping = branch_outcome_map()
    distances = {}
    for t, c in enumerate(trials):
        initial = network_input(c)
        for branch, k in mapping.items():
            final, bits = run_circuit(net, initial, branch=branch)
            got = receiver_state(final, bits)
            want = teleport_epr(c, outcome=k).final_state
            distances[(t, branch)] = phase_aligned_distance(got.amps, want.amps)
    return EquivalenceReport(mapping, distances, tol)


def network_fidelity(coeffs: UnknownCoeffs, *, seed: int | None = None, branch: int | None = None):
    """Run the network once; returns ``(bits, outcome k, fidelity to the input pair)``."""
    final, bits = run_circuit(teleport_network(), network_input(coeffs), seed=seed, branch=branch)
    got = receiver_state(final, bits)
    k = branch_outcome_map()[int("".join(map(str, bits)), 2)]
    target = epr_input(coeffs.alpha, coeffs.beta)
    return bits, k, abs(np.vdot(target.amps, got.amps)) ** 2
