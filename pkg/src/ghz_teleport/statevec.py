"""Dense complex state-vector engine.

Qubits are numbered from 1 as in the usual ket notation. Qubit ``j`` of an
``n``-qubit register sits at bit position ``n - j`` of the amplitude index, so
``|q1 q2 ... qn>`` reads left-to-right as a binary number and the literal
``|01000>`` is index ``0b01000``. Internally a state is reshaped to ``[2] * n``
and qubit ``j`` is tensor axis ``j - 1``.

All values are immutable; every operation returns a fresh object.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

TOL = 1e-10
MAX_QUBITS = 24


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state of ``n_qubits`` qubits.

    ``n_qubits == 0`` is allowed and represents the scalar left over when every
    qubit of a register has been measured.
    """

    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 0 or self.n_qubits > MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [0, {MAX_QUBITS}], got {self.n_qubits}")
        amps = _frozen(self.amps).reshape(-1)
        if amps.shape != (1 << self.n_qubits,):
            raise ValueError(f"expected {1 << self.n_qubits} amplitudes, got {amps.size}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > TOL:
            raise ValueError(f"state is not normalized (|psi|^2 = {norm2!r})")
        object.__setattr__(self, "amps", amps)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def amplitude(self, bits: str) -> complex:
        """Amplitude of the computational basis ket spelled as a bit string, e.g. ``"01000"``."""
        if len(bits) != self.n_qubits:
            raise ValueError(f"bit string {bits!r} does not address {self.n_qubits} qubits")
        return complex(self.amps[int(bits, 2)]) if bits else complex(self.amps[0])

    def tensor(self) -> np.ndarray:
        return self.amps.reshape([2] * self.n_qubits)

    def __repr__(self) -> str:
        nz = np.flatnonzero(np.abs(self.amps) > TOL)
        terms = ", ".join(
            f"|{i:0{self.n_qubits}b}>: {complex(self.amps[i]):.4g}" for i in nz[:8]
        )
        more = ", ..." if nz.size > 8 else ""
        return f"StateVector(n_qubits={self.n_qubits}, {{{terms}{more}}})"


@dataclass(frozen=True, eq=False)
class Residual:
    """Unnormalized vector left on the unmeasured qubits after a projection.

    ``prob`` is its squared norm. ``qubits`` lists the original labels of the
    qubits it lives on, in ascending order.
    """

    n_qubits: int
    amps: np.ndarray
    qubits: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "amps", _frozen(self.amps).reshape(-1))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    @property
    def prob(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def normalized(self) -> StateVector:
        norm = self.norm
        if norm <= TOL:
            raise ZeroProbabilityOutcome("cannot normalize a vanishing residual")
        return StateVector(self.n_qubits, self.amps / norm)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    n_qubits: int
    entries: np.ndarray

    # Eigen-decomposition is cubic in the dimension; larger matrices produced
    # here come from partial traces of pure states and are PSD by construction.
    _PSD_CHECK_MAX_DIM = 256

    def __post_init__(self):
        rho = _frozen(self.entries)
        d = 1 << self.n_qubits
        if rho.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > TOL:
            raise ValueError("density matrix does not have unit trace")
        if d <= self._PSD_CHECK_MAX_DIM and np.linalg.eigvalsh(rho).min() < -TOL:
            raise ValueError("density matrix is not positive semidefinite")
        object.__setattr__(self, "entries", rho)

    @classmethod
    def pure(cls, state: StateVector) -> "DensityMatrix":
        return cls(state.n_qubits, np.outer(state.amps, state.amps.conj()))

    def distance(self, other: "DensityMatrix") -> float:
        """Largest absolute entry-wise difference."""
        if other.n_qubits != self.n_qubits:
            raise ValueError("dimension mismatch")
        return float(np.max(np.abs(self.entries - other.entries)))


@dataclass(frozen=True, eq=False)
class Gate:
    """Unitary acting on ``arity`` qubits; ``matrix`` uses the same bit order as states."""

    matrix: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2 or m.shape[0] & (m.shape[0] - 1):
            raise ValueError(f"gate matrix must be 2^k x 2^k, got shape {m.shape}")
        if np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) > TOL:
            raise ValueError(f"gate {self.label!r} is not unitary")
        object.__setattr__(self, "matrix", m)

    @property
    def arity(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    def dagger(self) -> "Gate":
        label = self.label[:-1] if self.label.endswith("†") else self.label + "†"
        return Gate(self.matrix.conj().T, label)

    def __repr__(self) -> str:
        return f"Gate({self.label}, arity={self.arity})"


class ZeroProbabilityOutcome(ValueError):
    """A forced measurement branch has zero probability."""


class Measurement(NamedTuple):
    outcome: int  # 1-based index into the basis
    post_state: StateVector
    probability: float


_S = 1 / np.sqrt(2)
I = Gate(np.eye(2), "I")
X = Gate(np.array([[0, 1], [1, 0]]), "X")
Y = Gate(np.array([[0, -1j], [1j, 0]]), "Y")
Z = Gate(np.array([[1, 0], [0, -1]]), "Z")
H = Gate(np.array([[1, 1], [1, -1]]) * _S, "H")
CNOT = Gate(
    np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
    "CNOT",
)


def phase_gate(theta: float) -> Gate:
    return Gate(np.diag([1.0, np.exp(1j * theta)]), f"P({theta:.6g})")


def make_state(n_qubits: int, amps: Sequence[complex] | np.ndarray) -> StateVector:
    """Build a state from raw amplitudes, dividing out their norm."""
    amps = np.asarray(amps, dtype=np.complex128).reshape(-1)
    if n_qubits < 1:
        raise ValueError("n_qubits must be positive")
    if amps.size != 1 << n_qubits:
        raise ValueError(f"{n_qubits} qubits need {1 << n_qubits} amplitudes, got {amps.size}")
    norm = np.linalg.norm(amps)
    if not np.isfinite(norm) or norm <= TOL:
        raise ValueError("cannot normalize a zero or non-finite vector")
    return StateVector(n_qubits, amps / norm)


def basis_state(bits: str) -> StateVector:
    """Computational basis ket, e.g. ``basis_state("010")``."""
    amps = np.zeros(1 << len(bits), dtype=np.complex128)
    amps[int(bits, 2)] = 1.0
    return StateVector(len(bits), amps)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """``|a> (x) |b>``; the qubits of ``a`` keep the lower labels."""
    if a.n_qubits + b.n_qubits > MAX_QUBITS:
        raise ValueError(f"product exceeds {MAX_QUBITS} qubits")
    return StateVector(a.n_qubits + b.n_qubits, np.kron(a.amps, b.amps))


def _check_qubits(n: int, qubits: Sequence[int], what: str = "target") -> list[int]:
    qubits = [int(q) for q in qubits]
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"{what} qubits must be distinct, got {qubits}")
    for q in qubits:
        if not 1 <= q <= n:
            raise ValueError(f"{what} qubit {q} out of range 1..{n}")
    return qubits


def _apply_matrix(amps: np.ndarray, n: int, matrix: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    k = len(targets)
    axes = [q - 1 for q in targets]
    psi = amps.reshape([2] * n)
    op = matrix.reshape([2] * (2 * k))
    out = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the gate's output axes first; send them back to their slots
    out = np.moveaxis(out, list(range(k)), axes)
    return out.reshape(-1)


def apply_gate(state: StateVector, gate: Gate, targets: Sequence[int]) -> StateVector:
    targets = _check_qubits(state.n_qubits, targets)
    if len(targets) != gate.arity:
        raise ValueError(f"gate {gate.label} acts on {gate.arity} qubits, got targets {targets}")
    return StateVector(state.n_qubits, _apply_matrix(state.amps, state.n_qubits, gate.matrix, targets))


def apply_controlled(
    state: StateVector,
    gate: Gate,
    targets: Sequence[int],
    controls: Sequence[int],
    pattern: str,
) -> StateVector:
    """Apply ``gate`` on ``targets`` in the subspace where ``controls`` read ``pattern``."""
    n = state.n_qubits
    controls = _check_qubits(n, controls, "control")
    targets = _check_qubits(n, targets)
    if set(controls) & set(targets):
        raise ValueError("control and target qubits overlap")
    if len(pattern) != len(controls) or set(pattern) - {"0", "1"}:
        raise ValueError(f"pattern {pattern!r} does not match controls {controls}")
    if len(targets) != gate.arity:
        raise ValueError(f"gate {gate.label} acts on {gate.arity} qubits, got targets {targets}")
    psi = state.amps.reshape([2] * n).copy()
    index: list = [slice(None)] * n
    for q, b in zip(controls, pattern):
        index[q - 1] = int(b)
    index = tuple(index)
    # slicing removes the control axes, so renumber the targets inside the slice
    remaining = [q for q in range(1, n + 1) if q not in controls]
    sub_targets = [remaining.index(q) + 1 for q in targets]
    sub = psi[index]
    psi[index] = _apply_matrix(sub.reshape(-1), len(remaining), gate.matrix, sub_targets).reshape(sub.shape)
    return StateVector(n, psi.reshape(-1))


def inner(a: StateVector, b: StateVector) -> complex:
    """``<a|b>``."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"dimension mismatch: {a.n_qubits} vs {b.n_qubits} qubits")
    return complex(np.vdot(a.amps, b.amps))


def _split(amps: np.ndarray, n: int, measured: Sequence[int]) -> tuple[np.ndarray, tuple[int, ...]]:
    """Matrix view of a state with rows indexed by ``measured`` (in the given order)."""
    measured = _check_qubits(n, measured, "measured")
    rest = tuple(q for q in range(1, n + 1) if q not in measured)
    psi = amps.reshape([2] * n)
    order = [q - 1 for q in measured] + [q - 1 for q in rest]
    mat = np.transpose(psi, order).reshape(1 << len(measured), 1 << len(rest))
    return mat, rest


def _basis_matrix(basis) -> np.ndarray:
    """Rows are the basis vectors. Accepts a MeasurementBasis, StateVectors or an array."""
    if hasattr(basis, "matrix"):
        return np.asarray(basis.matrix)
    if len(basis) and isinstance(basis[0], StateVector):
        return np.stack([v.amps for v in basis])
    return np.asarray(basis, dtype=np.complex128)


def project_residual(state: StateVector, basis_vec: StateVector, measured: Sequence[int]) -> Residual:
    """Partial inner product ``<basis_vec|state>`` over the ``measured`` qubits."""
    if basis_vec.n_qubits != len(measured):
        raise ValueError(f"basis vector has {basis_vec.n_qubits} qubits, {len(measured)} measured")
    mat, rest = _split(state.amps, state.n_qubits, measured)
    return Residual(len(rest), basis_vec.amps.conj() @ mat, rest)


def project_all(state: StateVector, basis, measured: Sequence[int]) -> tuple[np.ndarray, tuple[int, ...]]:
    """Residuals for every basis vector at once.

    Returns an array whose row ``k - 1`` is the residual of outcome ``k`` and
    the labels of the unmeasured qubits.
    """
    vecs = _basis_matrix(basis)
    if vecs.shape[1] != 1 << len(measured):
        raise ValueError(f"basis acts on {vecs.shape[1].bit_length() - 1} qubits, {len(measured)} measured")
    mat, rest = _split(state.amps, state.n_qubits, measured)
    # protocol states are sparse; skip receiver patterns with no weight
    cols = np.flatnonzero(np.any(mat != 0, axis=0))
    if cols.size == mat.shape[1]:
        return vecs.conj() @ mat, rest
    out = np.zeros((vecs.shape[0], mat.shape[1]), dtype=np.complex128)
    out[:, cols] = vecs.conj() @ mat[:, cols]
    return out, rest


def sample_outcome(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Draw a 1-based outcome index from ``probs`` with a single uniform variate."""
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(probs) - 1)) + 1


def measure(
    state: StateVector,
    basis,
    measured: Sequence[int],
    *,
    seed: int | None = None,
    outcome: int | None = None,
    rng: np.random.Generator | None = None,
) -> Measurement:
    """Projective measurement of ``measured`` in an orthonormal ``basis``.

    Exactly one of ``outcome`` (forced 1-based branch), ``seed`` or ``rng``
    selects the branch. The post-measurement state lives on the remaining
    qubits in ascending label order.
    """
    residuals, rest = project_all(state, basis, measured)
    probs = np.einsum("ij,ij->i", residuals.conj(), residuals).real
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError(f"basis is not complete on the measured qubits (sum p = {probs.sum()!r})")
    if outcome is None:
        if rng is None:
            if seed is None:
                raise ValueError("need a seed, an rng or a forced outcome")
            rng = np.random.default_rng(seed)
        outcome = sample_outcome(probs, rng)
    if not 1 <= outcome <= len(probs):
        raise ValueError(f"outcome {outcome} out of range 1..{len(probs)}")
    p = float(probs[outcome - 1])
    if p <= TOL:
        raise ZeroProbabilityOutcome(f"outcome {outcome} has zero probability")
    post = StateVector(len(rest), residuals[outcome - 1] / np.sqrt(p))
    return Measurement(outcome, post, p)


def reduce(state: StateVector, keep: Sequence[int]) -> DensityMatrix:
    """Partial trace over every qubit not in ``keep``; kept qubits stay in ascending order."""
    if not keep:
        raise ValueError("keep set must be nonempty")
    keep = sorted(_check_qubits(state.n_qubits, keep, "kept"))
    traced = [q for q in range(1, state.n_qubits + 1) if q not in keep]
    mat, _ = _split(state.amps, state.n_qubits, keep + traced)
    mat = mat.reshape(1 << len(keep), 1 << len(traced))
    return DensityMatrix(len(keep), mat @ mat.conj().T)


def fidelity(a: StateVector, b: StateVector) -> float:
    """Squared overlap ``|<a|b>|^2``; blind to global phase."""
    return abs(inner(a, b)) ** 2


def phase_aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``min_theta || a - e^{i theta} b ||``."""
    ov = np.vdot(b, a)
    phase = ov / abs(ov) if abs(ov) > TOL else 1.0
    return float(np.linalg.norm(a - phase * b))
