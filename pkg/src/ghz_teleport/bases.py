"""Joint-measurement bases for GHZ-assisted teleportation and their adequacy.

A basis is adequate when every outcome leaves the receivers holding a fixed
unitary image of the input, with an outcome probability that does not depend
on the unknown coefficients. Concretely, for each outcome ``k`` the residual is
linear in ``(alpha, beta)``: ``r_k = M_k @ (alpha, beta)``, and the basis is
adequate iff every nonzero ``M_k`` satisfies ``M_k^H M_k = c_k^2 I``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np

from .states import (
    BellKind,
    EntanglementClass,
    EprForm,
    bell,
    classify3,
    epr_input,
    ghz_chain,
    nplet,
    triplet_mes_family,
)
from .statevec import TOL, Gate, StateVector, project_all, tensor

_S = 1 / np.sqrt(2)
MAX_GENERAL_N = 11  # N + 1 <= 12 measured qubits

# Exact Gram checks are cubic in the dimension; above this size the basis is
# probed with random vectors instead (a non-unitary matrix fails the probe
# with probability one).
_GRAM_CHECK_MAX_DIM = 512


class NonOrthonormalBasis(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MeasurementBasis:
    """Ordered orthonormal basis of ``m_qubits`` qubits.

    Row ``k - 1`` of ``matrix`` is the vector of outcome ``k``.
    """

    m_qubits: int
    matrix: np.ndarray
    family_tag: str = "custom"
    labels: tuple[str, ...] = ()
    phi: float | None = None

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=np.complex128)
        d = 1 << self.m_qubits
        if mat.shape != (d, d):
            raise NonOrthonormalBasis(f"need {d} vectors of dimension {d}, got shape {mat.shape}")
        if not _is_unitary(mat):
            raise NonOrthonormalBasis(f"basis {self.family_tag!r} is not orthonormal")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"v{k}" for k in range(1, d + 1)))
        elif len(self.labels) != d:
            raise ValueError("one label per basis vector required")

    @classmethod
    def from_states(cls, vectors: Sequence[StateVector], family_tag: str = "custom", **kw) -> "MeasurementBasis":
        m = vectors[0].n_qubits
        return cls(m, np.stack([v.amps for v in vectors]), family_tag, **kw)

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def vector(self, k: int) -> StateVector:
        """Basis vector of 1-based outcome ``k``."""
        return StateVector(self.m_qubits, self.matrix[k - 1])

    @property
    def vectors(self) -> list[StateVector]:
        return [self.vector(k) for k in range(1, len(self) + 1)]

    def gram(self) -> np.ndarray:
        return self.matrix.conj() @ self.matrix.T


def _is_unitary(mat: np.ndarray) -> bool:
    d = mat.shape[0]
    if d <= _GRAM_CHECK_MAX_DIM:
        return np.max(np.abs(mat.conj() @ mat.T - np.eye(d))) <= TOL
    probe = np.random.default_rng(0).standard_normal((d, 4)) + 0j
    back = mat.conj().T @ (mat @ probe)
    return np.max(np.abs(back - probe)) <= TOL * np.sqrt(d)


def _pi_pm(phi: float) -> dict[str, np.ndarray]:
    e = np.exp(1j * phi)
    return {"+": np.array([_S, _S * e]), "-": np.array([_S, -_S * e])}


_PHI_PAIR = (BellKind.PHI_PLUS, BellKind.PHI_MINUS)
_PSI_PAIR = (BellKind.PSI_PLUS, BellKind.PSI_MINUS)


def basis_pi123() -> MeasurementBasis:
    labels = tuple(f"|{i:03b}>" for i in range(8))
    return MeasurementBasis(3, np.eye(8), "pi123", labels)


def basis_pi1_23_s2() -> MeasurementBasis:
    vecs, labels = [], []
    for i in (0, 1):
        ket = np.eye(2)[i]
        for kind in _PHI_PAIR + _PSI_PAIR:
            vecs.append(np.kron(ket, bell(kind).amps))
            labels.append(f"|{i}>{kind.value}")
    return MeasurementBasis(3, np.array(vecs), "pi1(23)(2)", tuple(labels))


def _pi_bell_order(n_pi: int) -> list[tuple[tuple[str, ...], BellKind]]:
    """Outcome order: Phi block then Psi block; inside a block the pi-sign
    pattern varies slowest and the Bell sign fastest."""
    order = []
    for pair in (_PHI_PAIR, _PSI_PAIR):
        for signs in itertools.product("+-", repeat=n_pi):
            for kind in pair:
                order.append((signs, kind))
    return order


def basis_pi1_23_s4(phi: float = 0.0) -> MeasurementBasis:
    """``{|pi1+->|Phi+-_23>, |pi1+->|Psi+-_23>}`` ordered to match the
    outcome numbering k = 1..8 used for the correction table."""
    return _basis_pi1_23_s4(float(phi))


@lru_cache(maxsize=16)
def _basis_pi1_23_s4(phi: float) -> MeasurementBasis:
    b = basis_general(2, phi)
    return MeasurementBasis(3, b.matrix, "pi1(23)(4)", b.labels, phi)


def basis_pi13_2_s4(phi: float = 0.0) -> MeasurementBasis:
    """Bell pairs on qubits (1, 3) with ``|pi+->`` on qubit 2."""
    pis = _pi_pm(phi)
    vecs, labels = [], []
    for (sign,), kind in _pi_bell_order(1):
        b = bell(kind).amps.reshape(2, 2)  # axes (q1, q3)
        v = np.einsum("ac,b->abc", b, pis[sign]).reshape(8)
        vecs.append(v)
        labels.append(f"π2{sign}{kind.value}13")
    return MeasurementBasis(3, np.array(vecs), "pi(13)2(4)", tuple(labels), phi)


def basis_ghz_triplet() -> MeasurementBasis:
    fam = triplet_mes_family()
    labels = ("000+111", "000-111", "001+110", "001-110", "010+101", "010-101", "100+011", "100-011")
    return MeasurementBasis.from_states(fam, "pi(123)", labels=labels)


def basis_general(n: int, phi: float = 0.0) -> MeasurementBasis:
    """Basis on qubits 1..n+1: ``|pi+->^(n-1)`` on qubits 1..n-1 and a Bell
    pair on (n, n+1). ``n = 2`` reproduces :func:`basis_pi1_23_s4`."""
    if n < 2 or n > MAX_GENERAL_N:
        raise ValueError(f"N must be in 2..{MAX_GENERAL_N}, got {n}")
    return _basis_general(n, float(phi))


@lru_cache(maxsize=16)
def _basis_general(n: int, phi: float) -> MeasurementBasis:
    pis = _pi_pm(phi)
    order = _pi_bell_order(n - 1)
    prefixes = {}
    for signs in itertools.product("+-", repeat=n - 1):
        v = np.ones(1, dtype=np.complex128)
        for s in signs:
            v = np.kron(v, pis[s])
        prefixes[signs] = v
    mat = np.array([np.kron(prefixes[s], bell(kind).amps) for s, kind in order])
    labels = tuple("π" + "".join(s) + kind.value for s, kind in order)
    tag = "pi1(23)(4)" if n == 2 else f"general(N={n})"
    return MeasurementBasis(n + 1, mat, tag, labels, phi)


BASIS_FAMILIES = {
    "pi123": lambda phi=0.0: basis_pi123(),
    "pi1-23-s2": lambda phi=0.0: basis_pi1_23_s2(),
    "pi1-23-s4": basis_pi1_23_s4,
    "pi13-2-s4": basis_pi13_2_s4,
    "ghz-triplet": lambda phi=0.0: basis_ghz_triplet(),
}


@dataclass(frozen=True)
class BasisClassification:
    s: int | None  # None when the vectors disagree
    per_vector_class: tuple[EntanglementClass, ...]
    entangled_pair_count: int


def s_counts(basis: MeasurementBasis) -> list[int]:
    return [int(np.count_nonzero(np.abs(row) > TOL)) for row in basis.matrix]


def classify(basis: MeasurementBasis) -> BasisClassification:
    counts = set(s_counts(basis))
    s = counts.pop() if len(counts) == 1 else None
    classes: tuple[EntanglementClass, ...] = ()
    if basis.m_qubits == 3:
        classes = tuple(classify3(v) for v in basis.vectors)
    pairs = {c.pair for c in classes if c.pair is not None}
    return BasisClassification(s, classes, len(pairs))


# ---------------------------------------------------------------------------
# Adequacy


@dataclass(frozen=True)
class Nplet:
    """Input form ``alpha|0>^n + beta|1>^n``."""

    n: int



def input_size(form) -> int:
    return form.n if isinstance(form, Nplet) else 2


def input_state(alpha: complex, beta: complex, form) -> StateVector:
    if isinstance(form, Nplet):
        return nplet(alpha, beta, form.n)
    return epr_input(alpha, beta, form)


def target_embedding(form) -> np.ndarray:
    """Columns are the input state for ``(alpha, beta) = (1, 0)`` and ``(0, 1)``."""
    return np.stack([input_state(1, 0, form).amps, input_state(0, 1, form).amps], axis=1)


class VerdictKind(Enum):
    ADEQUATE = "Adequate"
    INADEQUATE = "Inadequate"
    PARTIALLY_USABLE = "PartiallyUsable"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    reason: str | None = None
    usable: tuple[int, ...] | None = None

    def __str__(self) -> str:
        if self.kind is VerdictKind.INADEQUATE:
            return f"Inadequate({self.reason})"
        if self.kind is VerdictKind.PARTIALLY_USABLE:
            return f"PartiallyUsable({len(self.usable)} usable outcomes)"
        return "Adequate"


@dataclass(frozen=True, eq=False)
class AdequacyReport:
    basis_tag: str
    input_form: object
    carrier: int
    receivers: tuple[int, ...]  # qubit labels left after the measurement
    maps: np.ndarray  # (K, d_receivers, 2)
    verdict: Verdict
    probs: tuple[float | None, ...]  # None: depends on the input state
    prob_ranges: tuple[tuple[float, float], ...]
    zero_outcomes: frozenset[int]
    local_corrections: dict[int, tuple[Gate, ...]] = field(default_factory=dict)
    generic_corrections: dict[int, Gate] = field(default_factory=dict)

    @property
    def adequate(self) -> bool:
        return self.verdict.kind is VerdictKind.ADEQUATE

    def correction(self, k: int) -> Gate:
        """Full receiver-space ``U_k`` (maps the input onto the residual of outcome ``k``)."""
        if k in self.generic_corrections:
            return self.generic_corrections[k]
        if k not in self.local_corrections:
            raise KeyError(f"no correction derived for outcome {k}")
        full = np.ones((1, 1), dtype=np.complex128)
        for f in self.local_corrections[k]:
            full = np.kron(full, f.matrix)
        return Gate(canonical_phase(full), f"U{k}")

    @property
    def corrections(self) -> dict[int, Gate]:
        """All derived ``U_k`` as dense matrices; sized 4^receivers each, so
        meant for small registers."""
        keys = sorted(set(self.local_corrections) | set(self.generic_corrections))
        return {k: self.correction(k) for k in keys}

    @property
    def state_dependent(self) -> tuple[int, ...]:
        return tuple(k for k, p in enumerate(self.probs, 1) if p is None)


def outcome_maps(basis: MeasurementBasis, form=EprForm.ANTI_DIAGONAL, carrier: int | None = None,
                 points: Sequence[tuple[complex, complex]] = ((1, 0), (0, 1))) -> tuple[np.ndarray, tuple[int, ...]]:
    """Linear maps ``M_k`` from ``(alpha, beta)`` to the residual of outcome ``k``.

    The maps are recovered from the residuals at two linearly independent
    normalized coefficient points; projection is linear, so any such pair
    gives the same maps.
    """
    n_in = input_size(form)
    carrier = n_in + 1 if carrier is None else carrier
    m = basis.m_qubits
    if n_in + carrier - m != n_in:
        raise ValueError(
            f"measuring {m} qubits of a {n_in}+{carrier} register leaves "
            f"{n_in + carrier - m} receivers, expected {n_in}"
        )
    ghz = ghz_chain(carrier)
    cols = []
    rest: tuple[int, ...] = ()
    for a, b in points:
        res, rest = project_all(tensor(input_state(a, b, form), ghz), basis, range(1, m + 1))
        cols.append(res)
    responses = np.stack(cols, axis=2)  # (K, d, 2): residual for each point
    pts = np.array(points, dtype=np.complex128).T  # columns are the points
    if abs(np.linalg.det(pts)) <= TOL:
        raise ValueError("coefficient points must be linearly independent")
    return responses @ np.linalg.inv(pts), rest


def adequacy(basis: MeasurementBasis, form=EprForm.ANTI_DIAGONAL, carrier: int | None = None) -> AdequacyReport:
    n_in = input_size(form)
    carrier = n_in + 1 if carrier is None else carrier
    maps, receivers = outcome_maps(basis, form, carrier)
    gram = np.conj(np.transpose(maps, (0, 2, 1))) @ maps

    zero, probs, ranges, proportional = set(), [], [], []
    for k, g in enumerate(gram, 1):
        c2 = float(np.trace(g).real) / 2
        eig = np.linalg.eigvalsh(g)
        ranges.append((float(max(eig[0], 0.0)), float(eig[-1])))
        if np.max(np.abs(maps[k - 1])) <= TOL:
            zero.add(k)
            probs.append(0.0)
            continue
        if np.max(np.abs(g - c2 * np.eye(2))) <= TOL:
            probs.append(c2)
            proportional.append(k)
        else:
            probs.append(None)

    dependent = [k for k, p in enumerate(probs, 1) if p is None]
    if dependent:
        verdict = Verdict(VerdictKind.INADEQUATE, "state-dependent")
    elif zero:
        verdict = Verdict(VerdictKind.PARTIALLY_USABLE, usable=tuple(proportional))
    elif abs(sum(probs) - 1.0) > TOL:
        verdict = Verdict(VerdictKind.INADEQUATE, "incomplete")
    else:
        verdict = Verdict(VerdictKind.ADEQUATE, usable=tuple(proportional))

    generic, local = {}, {}
    if verdict.kind is not VerdictKind.INADEQUATE:
        emb = target_embedding(form)
        for k in proportional:
            iso = maps[k - 1] / np.sqrt(probs[k - 1])
            factors = local_completion(iso, emb, n_in)
            if factors is not None:
                local[k] = factors
            else:
                generic[k] = Gate(canonical_phase(polar_completion(iso, emb)), f"U{k}")

    return AdequacyReport(
        basis_tag=basis.family_tag,
        input_form=form,
        carrier=carrier,
        receivers=receivers,
        maps=maps,
        verdict=verdict,
        probs=tuple(probs),
        prob_ranges=tuple(ranges),
        zero_outcomes=frozenset(zero),
        local_corrections=local,
        generic_corrections=generic,
    )


def canonical_phase(mat: np.ndarray) -> np.ndarray:
    """Fix global phase: first nonzero entry (row-major, so (0, 0) when it is
    nonzero) becomes real and positive."""
    flat = mat.reshape(-1)
    idx = np.flatnonzero(np.abs(flat) > TOL)[0]
    return mat * (abs(flat[idx]) / flat[idx])


def _single_support(col: np.ndarray) -> tuple[int, complex] | None:
    nz = np.flatnonzero(np.abs(col) > TOL)
    if nz.size != 1:
        return None
    return int(nz[0]), complex(col[nz[0]])


def local_completion(iso: np.ndarray, emb: np.ndarray, n_recv: int) -> tuple[Gate, ...] | None:
    """Per-receiver single-qubit gates ``G_1 (x) ... (x) G_n`` mapping each
    embedding column onto the matching isometry column, up to a common phase.

    Works when both columns of ``iso`` are single computational kets: the
    gates are bit flips on the differing positions times one relative phase.
    Returns None if no such product exists.
    """
    got = [_single_support(iso[:, i]) for i in (0, 1)]
    want = [_single_support(emb[:, i]) for i in (0, 1)]
    if None in got or None in want:
        return None
    (x, u), (y, v) = got
    (x0, _), (y0, _) = want
    flips = x ^ x0
    if flips != y ^ y0 or x == y:
        return None

    def bit(val: int, r: int) -> int:
        return (val >> (n_recv - 1 - r)) & 1

    distinguishing = [r for r in range(n_recv) if bit(x, r) != bit(y, r)]
    flipped = [r for r in distinguishing if bit(flips, r)]
    phase_q = (flipped or distinguishing)[0]

    xm = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    gates = []
    for r in range(n_recv):
        g = xm.copy() if bit(flips, r) else np.eye(2, dtype=np.complex128)
        if r == phase_q and abs(v / u - 1) > TOL:
            d = np.ones(2, dtype=np.complex128)
            d[bit(y, r)] = v / u
            g = np.diag(d) @ g
        gates.append(Gate(canonical_phase(g), gate_label(g)))
    return tuple(gates)


def polar_completion(iso: np.ndarray, emb: np.ndarray) -> np.ndarray:
    """Unitary extending ``emb[:, i] -> iso[:, i]``; on the orthogonal
    complements it uses the polar factor of their overlap, so directions
    lying in both complements are left fixed."""
    d = emb.shape[0]
    dom_c = _complement(emb)
    ran_c = _complement(iso)
    u, _, vh = np.linalg.svd(ran_c.conj().T @ dom_c)
    return iso @ emb.conj().T + ran_c @ (u @ vh) @ dom_c.conj().T if d > 2 else iso @ emb.conj().T


def _complement(cols: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(np.hstack([cols, np.eye(cols.shape[0])]))
    return q[:, cols.shape[1]:]


# Paper-style names for the single-qubit operators that show up in corrections.
NAMED_OPS = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "-X": -np.array([[0, 1], [1, 0]]),
    "Z": np.array([[1, 0], [0, -1]]),
    "-Z": -np.array([[1, 0], [0, -1]]),
    "iY": np.array([[0, 1], [-1, 0]]),
    "-iY": np.array([[0, -1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
}


def gate_label(mat: np.ndarray, up_to_phase: bool = True) -> str:
    """Name of a single-qubit operator, ``"custom"`` if not recognised."""
    for name, ref in NAMED_OPS.items():
        if name.startswith("-") and up_to_phase:
            continue
        if np.max(np.abs(mat - ref)) <= TOL:
            return name
    if up_to_phase:
        for name, ref in NAMED_OPS.items():
            if equal_up_to_phase(mat, ref):
                return name
    if mat.shape == (2, 2) and abs(mat[0, 1]) <= TOL and abs(mat[1, 0]) <= TOL:
        return f"P({np.angle(mat[1, 1] / mat[0, 0]):.6g})"
    if mat.shape == (2, 2) and abs(mat[0, 0]) <= TOL and abs(mat[1, 1]) <= TOL:
        return f"P({np.angle(mat[1, 0] / mat[0, 1]):.6g})X"
    return "custom"


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = TOL) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return False
    ov = np.vdot(b.reshape(-1), a.reshape(-1))
    if abs(ov) <= tol:
        return False
    return np.max(np.abs(a - (ov / abs(ov)) * b)) <= tol


def compute_pq(pi_vec: StateVector) -> tuple[complex, complex, bool]:
    """Overlaps ``P = <pi|0...0>`` and ``Q = <pi|1...1>`` and whether both are nonzero."""
    p = complex(np.conj(pi_vec.amps[0]))
    q = complex(np.conj(pi_vec.amps[-1]))
    return p, q, abs(p) > TOL and abs(q) > TOL


def pi_prefix(n: int, signs: str, phi: float = 0.0) -> StateVector:
    """``|pi^{s_1}> (x) ... (x) |pi^{s_{n-1}}>`` for a sign string like ``"+-"``."""
    if len(signs) != n - 1:
        raise ValueError(f"need {n - 1} signs, got {signs!r}")
    pis = _pi_pm(phi)
    v = np.ones(1, dtype=np.complex128)
    for s in signs:
        v = np.kron(v, pis[s])
    return StateVector(n - 1, v)

